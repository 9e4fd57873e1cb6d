#include "medagi/gateway.hpp"

#include <httplib.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <regex>

namespace medagi {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

json error_body(ErrorCode code, std::string_view message) {
  return {{"error", {{"code", to_string(code)}, {"message", message}}}};
}

HttpResult error_result(ErrorCode code, std::string_view message) {
  return HttpResult{http_status(code), error_body(code, message)};
}

HttpResult error_result(const Error& e) { return error_result(e.code(), e.what()); }

json parse_object(std::string_view body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseFailure, std::string("malformed JSON body: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::ParseFailure, "request body must be a JSON object");
  return doc;
}

std::string question_of(const json& doc) {
  const auto it = doc.find("question");
  if (it == doc.end() || !it->is_string()) {
    throw Error(ErrorCode::EmptyInput, "'question' must be a non-empty string");
  }
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(ErrorCode::InvalidDescriptor, std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

// Releases the lease on every exit path, including backend failures.
class LeaseGuard {
 public:
  LeaseGuard(ResourceLedger& ledger, AdapterLease lease) : ledger_(ledger), lease_(std::move(lease)) {}
  ~LeaseGuard() { ledger_.release(lease_); }
  LeaseGuard(const LeaseGuard&) = delete;
  LeaseGuard& operator=(const LeaseGuard&) = delete;

 private:
  ResourceLedger& ledger_;
  AdapterLease lease_;
};

std::string log_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::floor<std::chrono::seconds>(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now - secs).count();
  std::string stamp = format_rfc3339(secs);
  char frac[32];
  std::snprintf(frac, sizeof frac, ".%03lldZ", static_cast<long long>(ms));
  stamp.pop_back();
  return stamp + frac;
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput:
    case ErrorCode::InvalidUtf8:
    case ErrorCode::InvalidDescriptor:
    case ErrorCode::EmbeddingFailure:
    case ErrorCode::DegenerateEmbedding:
      return 422;
    case ErrorCode::ParseFailure:
      return 400;
    case ErrorCode::DuplicateId:
      return 409;
    case ErrorCode::UnknownExpert:
      return 404;
    case ErrorCode::EmptyRegistry:
      return 503;
    case ErrorCode::BackendFailure:
      return 502;
    case ErrorCode::BudgetExhausted:
      return 507;
    default:
      return 500;
  }
}

std::optional<std::string> decode_base64(std::string_view text) {
  static const std::array<int, 256> table = [] {
    std::array<int, 256> t{};
    t.fill(-1);
    const std::string_view alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    for (std::size_t i = 0; i < alphabet.size(); ++i) t[static_cast<unsigned char>(alphabet[i])] = static_cast<int>(i);
    return t;
  }();
  if (text.size() % 4 != 0) return std::nullopt;
  std::string out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    int pad = 0;
    std::uint32_t group = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char c = text[i + k];
      int v = table[static_cast<unsigned char>(c)];
      if (c == '=' && last && k >= 2) {
        ++pad;
        v = 0;
      } else if (v < 0 || pad > 0) {
        return std::nullopt;
      }
      group = (group << 6) | static_cast<std::uint32_t>(v);
    }
    out.push_back(static_cast<char>((group >> 16) & 0xFF));
    if (pad < 2) out.push_back(static_cast<char>((group >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<char>(group & 0xFF));
  }
  return out;
}

std::string MockBackend::chat(const ExpertDescriptor& expert, const BackendRequest& request) {
  return "expert " + expert.id + " received " + std::to_string(request.token_count) +
         " tokens, image=" + (request.image_base64 ? "present" : "absent");
}

std::string HttpBackend::chat(const ExpertDescriptor& expert, const BackendRequest& request) {
  if (!expert.backend_endpoint) {
    throw Error(ErrorCode::BackendFailure, "expert '" + expert.id + "' has no backend_endpoint");
  }
  static const std::regex url_re(R"(^(http://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(*expert.backend_endpoint, m, url_re)) {
    throw Error(ErrorCode::BackendFailure, "unsupported backend endpoint '" + *expert.backend_endpoint + "'");
  }
  const std::string path = m[2].matched ? m[2].str() : "/";

  httplib::Client client(m[1].str());
  const auto sec = static_cast<time_t>(timeout_ms_ / 1000);
  const auto usec = static_cast<time_t>((timeout_ms_ % 1000) * 1000);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);

  const json payload{{"expert_id", expert.id},
                     {"adapter_ref", expert.adapter_ref},
                     {"question", request.question},
                     {"image", request.image_base64 ? json(*request.image_base64) : json(nullptr)},
                     {"session_id", request.session_id ? json(*request.session_id) : json(nullptr)}};
  const auto res = client.Post(path, payload.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::BackendFailure,
                "backend " + *expert.backend_endpoint + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::BackendFailure,
                "backend " + *expert.backend_endpoint + " returned HTTP " + std::to_string(res->status));
  }
  try {
    const auto reply = json::parse(res->body);
    auto answer = reply.at("answer").get<std::string>();
    if (answer.empty()) throw Error(ErrorCode::BackendFailure, "backend returned an empty answer");
    return answer;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BackendFailure, std::string("backend reply is malformed: ") + e.what());
  }
}

Runtime make_runtime(GatewayConfig config) {
  Runtime rt;
  rt.provider = std::make_shared<HashingProvider>(config.embed_dim);
  rt.registry = std::make_shared<Registry>(rt.provider, config.registry_path);
  rt.ledger = std::make_shared<ResourceLedger>(config.budget_bytes);
  for (const auto& spec : config.components) rt.ledger->declare_component(spec);
  if (config.backend_mode == BackendMode::Live) {
    rt.backend = std::make_shared<HttpBackend>(config.backend_timeout_ms);
  } else {
    rt.backend = std::make_shared<MockBackend>();
  }
  rt.config = std::move(config);
  return rt;
}

Gateway::Gateway(Runtime runtime) : runtime_(std::move(runtime)) {
  if (!runtime_.provider->thread_safe()) {
    runtime_.provider = std::make_shared<SerializedProvider>(runtime_.provider);
    runtime_.registry->rebuild_index(runtime_.provider);
  }
  for (const auto& expert : runtime_.registry->snapshot()->experts) bind_adapter(expert);
}

void Gateway::bind_adapter(const ExpertDescriptor& expert) {
  auto& ledger = *runtime_.ledger;
  if (!ledger.is_declared(expert.adapter_ref)) {
    try {
      ledger.declare_component({expert.adapter_ref, ComponentKind::Adapter, runtime_.config.default_adapter_bytes, 0});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DuplicateComponent) throw;
    }
  }
  ledger.bind_expert(expert.id, expert.adapter_ref);
}

HttpResult Gateway::health() const {
  return HttpResult{200,
                    {{"status", "ok"},
                     {"registry_version", runtime_.registry->snapshot()->version},
                     {"resident_bytes", runtime_.ledger->stats().resident_bytes}}};
}

HttpResult Gateway::list_experts() const {
  const auto snap = runtime_.registry->snapshot();
  json experts = json::array();
  for (const auto& e : snap->experts) experts.push_back(to_json(e));
  return HttpResult{200, {{"experts", std::move(experts)}, {"registry_version", snap->version}}};
}

HttpResult Gateway::add_expert(std::string_view body) {
  try {
    json doc = parse_object(body);
    if (!doc.contains("created_at")) {
      doc["created_at"] = format_rfc3339(std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
    }
    ExpertDescriptor expert = descriptor_from_json(doc);
    if (runtime_.ledger->kind_of(expert.adapter_ref) == ComponentKind::Backbone) {
      throw Error(ErrorCode::InvalidDescriptor,
                  "adapter_ref '" + expert.adapter_ref + "' names a backbone component");
    }
    const ExpertDescriptor stored = expert;
    const auto version = runtime_.registry->register_expert(std::move(expert));
    bind_adapter(stored);
    HttpResult result{201, {{"expert", to_json(stored)}, {"registry_version", version}}};
    result.expert_id = stored.id;
    return result;
  } catch (const Error& e) {
    return error_result(e);
  }
}

HttpResult Gateway::remove_expert(std::string_view id) {
  try {
    const auto version = runtime_.registry->remove_expert(id);
    runtime_.ledger->unbind_expert(id);
    HttpResult result{200, {{"removed", id}, {"registry_version", version}}};
    result.expert_id = std::string(id);
    return result;
  } catch (const Error& e) {
    return error_result(e);
  }
}

HttpResult Gateway::route(std::string_view body) const {
  try {
    const json doc = parse_object(body);
    const std::string question = question_of(doc);
    const auto snap = runtime_.registry->snapshot();
    const RouteDecision decision = select_expert(question, *snap, runtime_.config.selection, *snap->provider);
    HttpResult result{200, to_json(decision.truncated(runtime_.config.selection.top_k))};
    result.expert_id = decision.selected;
    result.score = decision.score;
    result.margin = decision.margin;
    return result;
  } catch (const Error& e) {
    return error_result(e);
  }
}

HttpResult Gateway::chat(std::string_view body) {
  const auto started = Clock::now();
  std::optional<std::string> session_id;
  try {
    const json doc = parse_object(body);
    session_id = optional_string(doc, "session_id");
    BackendRequest request;
    request.question = question_of(doc);
    request.session_id = session_id;
    request.image_base64 = optional_string(doc, "image");
    if (request.image_base64) {
      const auto image = decode_base64(*request.image_base64);
      if (!image) throw Error(ErrorCode::InvalidDescriptor, "'image' is not valid base64");
      if (image->size() > runtime_.config.max_image_bytes) {
        HttpResult too_big{413, error_body(ErrorCode::InvalidDescriptor,
                                           "image of " + std::to_string(image->size()) + " bytes exceeds limit of " +
                                               std::to_string(runtime_.config.max_image_bytes))};
        too_big.session_id = session_id;
        return too_big;
      }
    }
    request.token_count = normalize_text(request.question).length();

    const auto snap = runtime_.registry->snapshot();
    const RouteDecision decision = select_expert(request.question, *snap, runtime_.config.selection, *snap->provider);

    HttpResult result;
    result.score = decision.score;
    result.margin = decision.margin;
    result.session_id = session_id;
    std::string answer;
    if (decision.confident) {
      const ExpertDescriptor* expert = snap->find(decision.selected);
      LeaseGuard lease(*runtime_.ledger, runtime_.ledger->acquire(expert->id));
      answer = runtime_.backend->chat(*expert, request);
      result.expert_id = expert->id;
    }
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started).count();
    result.body = {{"expert_id", result.expert_id ? json(*result.expert_id) : json(nullptr)},
                   {"answer", answer},
                   {"decision", to_json(decision.truncated(runtime_.config.selection.top_k))},
                   {"timing_ms", elapsed}};
    return result;
  } catch (const Error& e) {
    auto result = error_result(e);
    result.session_id = session_id;
    return result;
  }
}

void RequestLog::write(std::string_view method, std::string_view path, const HttpResult& result, long long ms) {
  if (!sink_) return;
  json line{{"timestamp", log_timestamp()}, {"method", method}, {"path", path}, {"status", result.status}, {"ms", ms}};
  if (result.expert_id) line["expert_id"] = *result.expert_id;
  if (result.score) line["score"] = *result.score;
  if (result.margin) line["margin"] = *result.margin;
  if (result.session_id) line["session_id"] = *result.session_id;
  std::lock_guard lock(mutex_);
  *sink_ << line.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  sink_->flush();
}

HttpServer::HttpServer(Gateway& gateway, RequestLog* log)
    : gateway_(gateway), log_(log), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;
  const auto max_image = gateway_.runtime().config.max_image_bytes;
  srv.set_payload_max_length(max_image / 3 * 4 + 1024 * 1024);

  const auto wrap = [this](auto handler) {
    return [this, handler](const httplib::Request& req, httplib::Response& res) {
      const auto started = Clock::now();
      const HttpResult result = handler(req);
      res.status = result.status;
      res.set_content(result.body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started).count();
      if (log_) log_->write(req.method, req.path, result, ms);
    };
  };

  srv.Get("/v1/health", wrap([this](const httplib::Request&) { return gateway_.health(); }));
  srv.Get("/v1/experts", wrap([this](const httplib::Request&) { return gateway_.list_experts(); }));
  srv.Post("/v1/experts", wrap([this](const httplib::Request& req) { return gateway_.add_expert(req.body); }));
  srv.Delete(R"(/v1/experts/([^/]+))",
             wrap([this](const httplib::Request& req) { return gateway_.remove_expert(req.matches[1].str()); }));
  srv.Post("/v1/route", wrap([this](const httplib::Request& req) { return gateway_.route(req.body); }));
  srv.Post("/v1/chat", wrap([this](const httplib::Request& req) { return gateway_.chat(req.body); }));
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::IoFailure, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::IoFailure, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::start() {
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  while (!server_->is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
}

void HttpServer::run() { server_->listen_after_bind(); }

void HttpServer::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace medagi
