#include "medagi/selection.hpp"

#include "medagi/error.hpp"

#include <algorithm>
#include <cmath>

namespace medagi {

RouteDecision RouteDecision::truncated(std::size_t top_k) const {
  RouteDecision out = *this;
  if (out.ranking.entries.size() > top_k) out.ranking.entries.resize(top_k);
  return out;
}

void SelectionConfig::validate() const {
  if (top_k < 1) throw Error(ErrorCode::InvalidConfig, "top_k must be at least 1");
  if (threshold && !(*threshold >= -1.0 && *threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "threshold must lie in [-1, 1]");
  }
}

SentenceEmbedding embed_query(std::string_view question, const EmbeddingProvider& provider) {
  return embed_text(question, provider);
}

SimilarityRanking score_all(const SentenceEmbedding& query, const RegistrySnapshot& snapshot) {
  if (snapshot.empty()) throw Error(ErrorCode::EmptyRegistry, "no experts registered");
  const DescriptionIndex& index = *snapshot.index;
  if (query.provider_fingerprint() != index.provider_fingerprint) {
    throw Error(ErrorCode::FingerprintMismatch, "query embedded with " + query.provider_fingerprint() +
                                                    " but index built with " + index.provider_fingerprint);
  }

  SimilarityRanking ranking;
  ranking.query_version = snapshot.version;
  ranking.entries.reserve(snapshot.experts.size());
  for (const auto& expert : snapshot.experts) {
    const auto it = index.entries.find(expert.id);
    if (it == index.entries.end()) {
      throw Error(ErrorCode::FingerprintMismatch, "index has no entry for '" + expert.id + "'");
    }
    ranking.entries.push_back({expert.id, cosine_similarity(query, it->second)});
  }
  // Quantized keys keep the comparator a strict weak ordering.
  const auto key = [](double score) { return std::llround(score / kScoreTieResolution); };
  std::sort(ranking.entries.begin(), ranking.entries.end(), [&](const RankedExpert& a, const RankedExpert& b) {
    const auto ka = key(a.score);
    const auto kb = key(b.score);
    if (ka != kb) return ka > kb;
    return a.expert_id < b.expert_id;
  });
  return ranking;
}

RouteDecision select_expert(std::string_view question, const RegistrySnapshot& snapshot,
                            const SelectionConfig& config, const EmbeddingProvider& provider) {
  if (snapshot.empty()) throw Error(ErrorCode::EmptyRegistry, "no experts registered");
  RouteDecision decision;
  decision.ranking = score_all(embed_query(question, provider), snapshot);
  const auto& top = decision.ranking.entries;
  decision.selected = top.front().expert_id;
  decision.score = top.front().score;
  decision.margin = top.size() > 1 ? top[0].score - top[1].score : 0.0;
  decision.confident = !config.threshold || decision.score >= *config.threshold;
  return decision;
}

nlohmann::json to_json(const SimilarityRanking& ranking) {
  auto entries = nlohmann::json::array();
  for (const auto& e : ranking.entries) entries.push_back({{"expert_id", e.expert_id}, {"score", e.score}});
  return entries;
}

nlohmann::json to_json(const RouteDecision& d) {
  return {{"selected", d.selected},
          {"score", d.score},
          {"margin", d.margin},
          {"confident", d.confident},
          {"registry_version", d.ranking.query_version},
          {"ranking", to_json(d.ranking)}};
}

}  // namespace medagi
