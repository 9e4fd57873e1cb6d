#pragma once

#include "medagi/backbone.hpp"
#include "medagi/config.hpp"
#include "medagi/embedding.hpp"
#include "medagi/error.hpp"
#include "medagi/registry.hpp"
#include "medagi/selection.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>

namespace httplib {
class Server;
}

namespace medagi {

struct BackendRequest {
  std::string question;
  std::size_t token_count = 0;
  std::optional<std::string> image_base64;
  std::optional<std::string> session_id;
};

/// Client side of an expert's chat service.
class BackendClient {
 public:
  virtual ~BackendClient() = default;
  /// Returns the answer text; throws Error(BackendFailure).
  virtual std::string chat(const ExpertDescriptor& expert, const BackendRequest& request) = 0;
};

/// Deterministic stand-in: "expert {id} received {n} tokens, image={present|absent}".
class MockBackend final : public BackendClient {
 public:
  std::string chat(const ExpertDescriptor& expert, const BackendRequest& request) override;
};

/// POSTs {expert_id, adapter_ref, question, image, session_id} as JSON to the
/// expert's backend_endpoint and expects a 2xx {"answer": "..."} reply.
class HttpBackend final : public BackendClient {
 public:
  explicit HttpBackend(std::uint64_t timeout_ms) : timeout_ms_(timeout_ms) {}
  std::string chat(const ExpertDescriptor& expert, const BackendRequest& request) override;

 private:
  std::uint64_t timeout_ms_;
};

/// Everything a gateway or CLI command needs, wired from one config.
struct Runtime {
  GatewayConfig config;
  std::shared_ptr<const EmbeddingProvider> provider;
  std::shared_ptr<Registry> registry;
  std::shared_ptr<ResourceLedger> ledger;
  std::shared_ptr<BackendClient> backend;
};

Runtime make_runtime(GatewayConfig config);

int http_status(ErrorCode code);

/// Strict standard-alphabet base64 with '=' padding. Returns nullopt on
/// malformed input.
std::optional<std::string> decode_base64(std::string_view text);

struct HttpResult {
  int status = 200;
  nlohmann::json body;
  std::optional<std::string> expert_id = std::nullopt;
  std::optional<double> score = std::nullopt;
  std::optional<double> margin = std::nullopt;
  std::optional<std::string> session_id = std::nullopt;
};

/// Transport-independent request handling for the /v1 endpoints.
class Gateway {
 public:
  explicit Gateway(Runtime runtime);

  HttpResult health() const;
  HttpResult list_experts() const;
  HttpResult add_expert(std::string_view body);
  HttpResult remove_expert(std::string_view id);
  HttpResult route(std::string_view body) const;
  HttpResult chat(std::string_view body);

  const Runtime& runtime() const noexcept { return runtime_; }

 private:
  void bind_adapter(const ExpertDescriptor& expert);

  Runtime runtime_;
};

/// One JSON line per request: {timestamp, method, path, status, ms, ...}.
class RequestLog {
 public:
  explicit RequestLog(std::ostream* sink) : sink_(sink) {}
  void write(std::string_view method, std::string_view path, const HttpResult& result, long long ms);

 private:
  std::mutex mutex_;
  std::ostream* sink_;
};

/// Binds a Gateway to cpp-httplib.
class HttpServer {
 public:
  HttpServer(Gateway& gateway, RequestLog* log);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port; throws Error(IoFailure).
  int bind(const std::string& host, int port);
  /// Serves on a background thread; returns once the listener is running.
  void start();
  /// Serves on the calling thread until stop().
  void run();
  void stop();

 private:
  Gateway& gateway_;
  RequestLog* log_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace medagi
