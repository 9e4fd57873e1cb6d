#include "medagi/cli.hpp"

#include "medagi/error.hpp"
#include "medagi/eval.hpp"
#include "medagi/gateway.hpp"
#include "medagi/seed.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdio>

namespace medagi {

namespace {

constexpr const char* kDefaultRegistryPath = "registry.json";

std::atomic<HttpServer*> g_serving{nullptr};

void handle_signal(int) {
  if (HttpServer* server = g_serving.load()) server->stop();
}

Timestamp now_seconds() { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); }

GatewayConfig resolve_config(const std::string& config_path, const EnvLookup& env) {
  GatewayConfig cfg = load_config(config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path), env);
  if (!cfg.registry_path) cfg.registry_path = kDefaultRegistryPath;
  return cfg;
}

void print_ranking(std::ostream& out, const RouteDecision& d, std::size_t top_k) {
  char line[160];
  std::snprintf(line, sizeof line, "selected: %s  score=%.6f  margin=%.6f  confident=%s\n", d.selected.c_str(),
                d.score, d.margin, d.confident ? "yes" : "no");
  out << line;
  std::snprintf(line, sizeof line, "%-5s %-24s %10s\n", "rank", "expert", "score");
  out << line;
  const auto shown = d.truncated(top_k);
  for (std::size_t i = 0; i < shown.ranking.entries.size(); ++i) {
    const auto& e = shown.ranking.entries[i];
    std::snprintf(line, sizeof line, "%-5zu %-24s %10.6f\n", i + 1, e.expert_id.c_str(), e.score);
    out << line;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  CLI::App app{"Expert-routing gateway: registry admin, routing, serving and evaluation", "medagi"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "Gateway config file (JSON)");

  auto* seed = app.add_subcommand("seed", "Register the three reference experts");

  auto* expert = app.add_subcommand("expert", "Manage registered experts");
  expert->require_subcommand(1);
  ExpertDescriptor added;
  std::string endpoint;
  auto* add = expert->add_subcommand("add", "Register an expert");
  add->add_option("--id", added.id, "Expert id (slug)")->required();
  add->add_option("--name", added.display_name, "Display name");
  add->add_option("--description", added.description, "Natural-language description")->required();
  add->add_option("--adapter-ref", added.adapter_ref, "Alignment-layer artifact URI")->required();
  add->add_option("--endpoint", endpoint, "Chat backend URL");
  add->add_option("--tag", added.tags, "Tag (repeatable)");
  auto* list = expert->add_subcommand("list", "List experts by ascending id");
  std::string removed_id;
  auto* rm = expert->add_subcommand("rm", "Remove an expert");
  rm->add_option("id", removed_id, "Expert id")->required();

  std::string question;
  auto* route = app.add_subcommand("route", "Select an expert for one question");
  route->add_option("question", question, "Question text")->required();

  auto* serve = app.add_subcommand("serve", "Run the HTTP gateway");

  std::string corpus_path;
  std::string report_path;
  auto* eval = app.add_subcommand("eval", "Score routing accuracy over a labeled corpus");
  eval->add_option("--corpus", corpus_path, "JSON-lines corpus of {question, expected_expert}")->required();
  eval->add_option("--out", report_path, "Report file (default: <corpus>.report.json)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    GatewayConfig cfg = resolve_config(config_path, env);

    if (*serve) {
      const std::string host = cfg.host();
      const int port = cfg.port();
      Gateway gateway(make_runtime(std::move(cfg)));
      RequestLog log(&err);
      HttpServer server(gateway, &log);
      const int bound = server.bind(host, port);
      out << "listening on http://" << host << ':' << bound << std::endl;
      g_serving = &server;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      server.run();
      g_serving = nullptr;
      return 0;
    }

    Runtime rt = make_runtime(cfg);
    Registry& registry = *rt.registry;

    if (*seed) {
      for (auto& d : seed_experts(now_seconds())) {
        const std::string id = d.id;
        if (registry.snapshot()->find(id)) {
          out << "skipped " << id << " (already registered)\n";
          continue;
        }
        const auto version = registry.register_expert(std::move(d));
        out << "registered " << id << " (registry version " << version << ")\n";
      }
      return 0;
    }
    if (*add) {
      if (!endpoint.empty()) added.backend_endpoint = endpoint;
      if (added.display_name.empty()) added.display_name = added.id;
      added.created_at = now_seconds();
      const auto version = registry.register_expert(added);
      out << "registered " << added.id << " (registry version " << version << ")\n";
      return 0;
    }
    if (*list) {
      char line[256];
      for (const auto& d : registry.list_experts()) {
        std::snprintf(line, sizeof line, "%-20s %-20s %s\n", d.id.c_str(), d.display_name.c_str(),
                      d.adapter_ref.c_str());
        out << line;
      }
      return 0;
    }
    if (*rm) {
      const auto version = registry.remove_expert(removed_id);
      out << "removed " << removed_id << " (registry version " << version << ")\n";
      return 0;
    }
    if (*route) {
      const auto snap = registry.snapshot();
      const auto decision = select_expert(question, *snap, cfg.selection, *snap->provider);
      print_ranking(out, decision, cfg.selection.top_k);
      return 0;
    }
    if (*eval) {
      const auto snap = registry.snapshot();
      const auto corpus = load_corpus(corpus_path);
      const auto report = run_eval(corpus, *snap, cfg.selection, *snap->provider);
      const std::filesystem::path target = report_path.empty() ? corpus_path + ".report.json" : report_path;
      write_report(report, target);
      out << render_table(report) << "report written to " << target.string() << '\n';
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace medagi
