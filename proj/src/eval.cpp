#include "medagi/eval.hpp"

#include "medagi/error.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace medagi {

using nlohmann::json;

namespace {

[[noreturn]] void corpus_failure(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::CorpusParseFailure, "corpus line " + std::to_string(line) + ": " + what);
}

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r") == std::string_view::npos; }

}  // namespace

EvalCorpus parse_corpus(std::string_view text) {
  EvalCorpus corpus;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (blank(line)) continue;

    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      corpus_failure(line_no, e.what());
    }
    if (!doc.is_object()) corpus_failure(line_no, "expected an object");
    for (const auto& item : doc.items()) {
      if (item.key() != "question" && item.key() != "expected_expert") {
        corpus_failure(line_no, "unknown key '" + item.key() + "'");
      }
    }
    const auto q = doc.find("question");
    const auto e = doc.find("expected_expert");
    if (q == doc.end() || !q->is_string()) corpus_failure(line_no, "'question' must be a string");
    if (e == doc.end() || !e->is_string()) corpus_failure(line_no, "'expected_expert' must be a string");
    corpus.items.push_back({q->get<std::string>(), e->get<std::string>()});
  }
  if (corpus.items.empty()) throw Error(ErrorCode::CorpusParseFailure, "corpus is empty");
  return corpus;
}

EvalCorpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open corpus " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str());
}

EvalReport run_eval(const EvalCorpus& corpus, const RegistrySnapshot& snapshot, const SelectionConfig& config,
                    const EmbeddingProvider& provider) {
  if (snapshot.empty()) throw Error(ErrorCode::EmptyRegistry, "no experts registered");
  for (const auto& item : corpus.items) {
    if (!snapshot.find(item.expected_expert)) {
      throw Error(ErrorCode::UnknownExpectedExpert,
                  "expected expert '" + item.expected_expert + "' is not in the registry");
    }
  }

  EvalReport report;
  report.registry_version = snapshot.version;
  for (const auto& item : corpus.items) {
    auto& row = report.confusion[item.expected_expert];
    for (const auto& expert : snapshot.experts) row.emplace(expert.id, 0);
  }

  double margin_sum = 0.0;
  for (const auto& item : corpus.items) {
    const RouteDecision d = select_expert(item.question, snapshot, config, provider);
    EvalItemResult r{item.question, item.expected_expert, d.selected, d.score, d.margin,
                     d.selected == item.expected_expert};
    report.correct += r.correct ? 1 : 0;
    margin_sum += r.margin;
    ++report.confusion[r.expected][r.selected];
    report.per_item.push_back(std::move(r));
  }
  const auto n = static_cast<double>(corpus.items.size());
  report.accuracy = static_cast<double>(report.correct) / n;
  report.mean_margin = margin_sum / n;
  return report;
}

json to_json(const EvalReport& report) {
  json items = json::array();
  for (const auto& r : report.per_item) {
    items.push_back({{"question", r.question},
                     {"expected", r.expected},
                     {"selected", r.selected},
                     {"score", r.score},
                     {"margin", r.margin},
                     {"correct", r.correct}});
  }
  return {{"schema_version", kEvalReportSchemaVersion},
          {"registry_version", report.registry_version},
          {"items", report.per_item.size()},
          {"correct", report.correct},
          {"accuracy", report.accuracy},
          {"mean_margin", report.mean_margin},
          {"confusion", report.confusion},
          {"per_item", std::move(items)}};
}

std::string render_table(const EvalReport& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-4s %-16s %-16s %9s %9s  %s\n", "ok", "expected", "selected", "score", "margin",
                "question");
  out << line;
  for (const auto& r : report.per_item) {
    std::snprintf(line, sizeof line, "%-4s %-16s %-16s %9.6f %9.6f  ", r.correct ? "yes" : "NO", r.expected.c_str(),
                  r.selected.c_str(), r.score, r.margin);
    out << line << r.question << '\n';
  }
  std::snprintf(line, sizeof line, "accuracy %zu/%zu = %.4f, mean margin %.6f\n", report.correct,
                report.per_item.size(), report.accuracy, report.mean_margin);
  out << line;
  out << "confusion (rows expected, columns selected):\n";
  for (const auto& [expected, row] : report.confusion) {
    out << "  " << expected << ':';
    for (const auto& [selected, count] : row) out << ' ' << selected << '=' << count;
    out << '\n';
  }
  return out.str();
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write report " + path.string());
  out << to_json(report).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

}  // namespace medagi
