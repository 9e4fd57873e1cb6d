#pragma once

#include "medagi/registry.hpp"

#include <vector>

namespace medagi {

/// The three reference experts (dermatology, chest X-ray, stained
/// pathology) with their published model descriptions, ascending by id.
std::vector<ExpertDescriptor> seed_experts(Timestamp created_at);

}  // namespace medagi
