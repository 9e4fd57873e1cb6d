#pragma once

#include "medagi/config.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace medagi {

/// `medagi [--config PATH] <command> [args]`, args excluding the program
/// name. Returns 0 on success, 1 on a domain error, 2 on a usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const EnvLookup& env = process_env());

}  // namespace medagi
