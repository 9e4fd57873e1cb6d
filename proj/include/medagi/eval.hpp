#pragma once

#include "medagi/registry.hpp"
#include "medagi/selection.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace medagi {

struct EvalItem {
  std::string question;
  std::string expected_expert;
};

struct EvalCorpus {
  std::vector<EvalItem> items;
};

/// One JSON object per line with exactly {question, expected_expert}; blank
/// lines are skipped. Throws Error(CorpusParseFailure) with the line number, or
/// Error(IoFailure) when the file cannot be read.
EvalCorpus parse_corpus(std::string_view text);
EvalCorpus load_corpus(const std::filesystem::path& path);

struct EvalItemResult {
  std::string question;
  std::string expected;
  std::string selected;
  double score = 0.0;
  double margin = 0.0;
  bool correct = false;
};

struct EvalReport {
  std::size_t correct = 0;
  double accuracy = 0.0;
  double mean_margin = 0.0;
  // expected -> selected -> count; columns cover every registry expert
  std::map<std::string, std::map<std::string, std::uint64_t>> confusion;
  std::vector<EvalItemResult> per_item;
  std::uint64_t registry_version = 0;
};

inline constexpr int kEvalReportSchemaVersion = 1;

/// Routes every item with select_expert. Throws Error(UnknownExpectedExpert)
/// before scoring anything if a label is missing from the registry.
EvalReport run_eval(const EvalCorpus& corpus, const RegistrySnapshot& snapshot, const SelectionConfig& config,
                    const EmbeddingProvider& provider);

nlohmann::json to_json(const EvalReport& report);
std::string render_table(const EvalReport& report);
void write_report(const EvalReport& report, const std::filesystem::path& path);

}  // namespace medagi
