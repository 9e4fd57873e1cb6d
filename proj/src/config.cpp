#include "medagi/config.hpp"

#include "medagi/error.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace medagi {

using nlohmann::json;

namespace {

[[noreturn]] void bad_config(const std::string& what) { throw Error(ErrorCode::InvalidConfig, "config: " + what); }

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) bad_config(key + "='" + text + "' is not a non-negative integer");
  return value;
}

std::optional<double> parse_threshold(const std::string& text) {
  if (text.empty() || text == "disabled" || text == "off" || text == "none") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    bad_config("THRESHOLD='" + text + "' is not a number");
  }
}

BackendMode parse_mode(const std::string& text) {
  if (text == "mock") return BackendMode::Mock;
  if (text == "live") return BackendMode::Live;
  bad_config("backend_mode must be 'mock' or 'live', got '" + text + "'");
}

std::uint64_t json_u64(const json& j, const char* key) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    bad_config(std::string(key) + " must be a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

void apply_file(GatewayConfig& cfg, const json& doc) {
  static const std::set<std::string> kKeys = {
      "listen_addr", "registry_path",      "embed_dim",       "threshold",          "top_k",
      "budget_bytes", "backend_mode",      "backend_timeout_ms", "max_image_bytes", "default_adapter_bytes",
      "components"};
  if (!doc.is_object()) bad_config("top level must be an object");
  for (const auto& item : doc.items()) {
    if (!kKeys.contains(item.key())) bad_config("unknown key '" + item.key() + "'");
  }
  try {
    if (doc.contains("listen_addr")) cfg.listen_addr = doc.at("listen_addr").get<std::string>();
    if (doc.contains("registry_path")) cfg.registry_path = doc.at("registry_path").get<std::string>();
    if (doc.contains("embed_dim")) cfg.embed_dim = json_u64(doc.at("embed_dim"), "embed_dim");
    if (doc.contains("threshold")) {
      const auto& t = doc.at("threshold");
      cfg.selection.threshold = t.is_null() ? std::nullopt : std::optional<double>(t.get<double>());
    }
    if (doc.contains("top_k")) cfg.selection.top_k = json_u64(doc.at("top_k"), "top_k");
    if (doc.contains("budget_bytes")) cfg.budget_bytes = json_u64(doc.at("budget_bytes"), "budget_bytes");
    if (doc.contains("backend_mode")) cfg.backend_mode = parse_mode(doc.at("backend_mode").get<std::string>());
    if (doc.contains("backend_timeout_ms")) {
      cfg.backend_timeout_ms = json_u64(doc.at("backend_timeout_ms"), "backend_timeout_ms");
    }
    if (doc.contains("max_image_bytes")) cfg.max_image_bytes = json_u64(doc.at("max_image_bytes"), "max_image_bytes");
    if (doc.contains("default_adapter_bytes")) {
      cfg.default_adapter_bytes = json_u64(doc.at("default_adapter_bytes"), "default_adapter_bytes");
    }
    if (doc.contains("components")) {
      cfg.components.clear();
      for (const auto& c : doc.at("components")) {
        for (const auto& item : c.items()) {
          if (item.key() != "name" && item.key() != "kind" && item.key() != "size_bytes" &&
              item.key() != "load_cost_ms") {
            bad_config("unknown component key '" + item.key() + "'");
          }
        }
        ComponentSpec spec;
        spec.name = c.at("name").get<std::string>();
        spec.kind = component_kind_from_string(c.at("kind").get<std::string>());
        spec.size_bytes = json_u64(c.at("size_bytes"), "size_bytes");
        spec.load_cost_ms = c.contains("load_cost_ms") ? json_u64(c.at("load_cost_ms"), "load_cost_ms") : 0;
        cfg.components.push_back(std::move(spec));
      }
    }
  } catch (const json::exception& e) {
    bad_config(e.what());
  }
}

}  // namespace

std::vector<ComponentSpec> GatewayConfig::default_backbone() {
  return {
      {"vision_encoder", ComponentKind::Backbone, 1'000'000'000ULL, 1200},
      {"query_transformer", ComponentKind::Backbone, 500'000'000ULL, 400},
      {"language_model", ComponentKind::Backbone, 2'500'000'000ULL, 3000},
  };
}

std::string GatewayConfig::host() const {
  const auto colon = listen_addr.rfind(':');
  return colon == std::string::npos ? listen_addr : listen_addr.substr(0, colon);
}

int GatewayConfig::port() const {
  const auto colon = listen_addr.rfind(':');
  if (colon == std::string::npos) return 8080;
  const auto port = parse_u64("LISTEN_ADDR", listen_addr.substr(colon + 1));
  if (port > 65535) bad_config("port out of range in '" + listen_addr + "'");
  return static_cast<int>(port);
}

EnvLookup process_env() {
  return [](const char* name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name)) return std::string(v);
    return std::nullopt;
  };
}

GatewayConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env) {
  GatewayConfig cfg;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open config " + path->string());
    std::stringstream buf;
    buf << in.rdbuf();
    json doc;
    try {
      doc = json::parse(buf.str());
    } catch (const json::parse_error& e) {
      bad_config(path->string() + ": " + e.what());
    }
    apply_file(cfg, doc);
  }

  if (auto v = env("LISTEN_ADDR")) cfg.listen_addr = *v;
  if (auto v = env("REGISTRY_PATH")) cfg.registry_path = *v;
  if (auto v = env("EMBED_DIM")) cfg.embed_dim = parse_u64("EMBED_DIM", *v);
  if (auto v = env("THRESHOLD")) cfg.selection.threshold = parse_threshold(*v);
  if (auto v = env("TOP_K")) cfg.selection.top_k = parse_u64("TOP_K", *v);
  if (auto v = env("BUDGET_BYTES")) cfg.budget_bytes = parse_u64("BUDGET_BYTES", *v);
  if (auto v = env("BACKEND_MODE")) cfg.backend_mode = parse_mode(*v);
  if (auto v = env("BACKEND_TIMEOUT_MS")) cfg.backend_timeout_ms = parse_u64("BACKEND_TIMEOUT_MS", *v);
  if (auto v = env("MAX_IMAGE_BYTES")) cfg.max_image_bytes = parse_u64("MAX_IMAGE_BYTES", *v);

  if (cfg.embed_dim < 2) bad_config("embed_dim must be at least 2");
  if (cfg.budget_bytes == 0) bad_config("budget_bytes must be positive");
  if (cfg.backend_timeout_ms == 0) bad_config("backend_timeout_ms must be positive");
  if (cfg.default_adapter_bytes == 0) bad_config("default_adapter_bytes must be positive");
  cfg.selection.validate();
  cfg.port();
  return cfg;
}

}  // namespace medagi
