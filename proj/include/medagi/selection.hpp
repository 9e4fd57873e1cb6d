#pragma once

#include "medagi/embedding.hpp"
#include "medagi/registry.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace medagi {

struct RankedExpert {
  std::string expert_id;
  double score = 0.0;

  bool operator==(const RankedExpert&) const = default;
};

/// Scores sorted descending; equal scores ordered by ascending expert id.
struct SimilarityRanking {
  std::vector<RankedExpert> entries;
  std::uint64_t query_version = 0;

  bool operator==(const SimilarityRanking&) const = default;
};

struct RouteDecision {
  std::string selected;
  double score = 0.0;
  SimilarityRanking ranking;
  double margin = 0.0;  // top-1 minus top-2, 0 with a single expert
  bool confident = true;

  /// Same decision with the ranking cut to its first `top_k` entries.
  RouteDecision truncated(std::size_t top_k) const;

  bool operator==(const RouteDecision&) const = default;
};

struct SelectionConfig {
  std::optional<double> threshold;  // disabled by default: plain argmax
  std::size_t top_k = 3;

  /// Throws Error(InvalidConfig).
  void validate() const;
};

SentenceEmbedding embed_query(std::string_view question, const EmbeddingProvider& provider);

/// Scores closer than this rank as a tie (then by ascending id), so summation
/// rounding cannot reorder experts whose similarities are mathematically equal.
inline constexpr double kScoreTieResolution = 1e-12;

/// Sorted by score descending, ties by ascending id.
/// Throws Error(EmptyRegistry) or Error(FingerprintMismatch).
SimilarityRanking score_all(const SentenceEmbedding& query, const RegistrySnapshot& snapshot);

/// Embeds the question, ranks every expert and picks the top score.
RouteDecision select_expert(std::string_view question, const RegistrySnapshot& snapshot,
                            const SelectionConfig& config, const EmbeddingProvider& provider);

nlohmann::json to_json(const SimilarityRanking& ranking);
nlohmann::json to_json(const RouteDecision& decision);

}  // namespace medagi
