#pragma once

#include "medagi/backbone.hpp"
#include "medagi/selection.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace medagi {

enum class BackendMode { Mock, Live };

struct GatewayConfig {
  std::string listen_addr = "127.0.0.1:8080";
  std::optional<std::filesystem::path> registry_path;
  std::size_t embed_dim = 256;
  SelectionConfig selection;
  std::uint64_t budget_bytes = 4'100'000'000ULL;
  BackendMode backend_mode = BackendMode::Mock;
  std::uint64_t backend_timeout_ms = 10'000;
  std::size_t max_image_bytes = 8 * 1024 * 1024;
  // Size given to adapters that are registered without an explicit declaration.
  std::uint64_t default_adapter_bytes = 10'000'000;
  std::vector<ComponentSpec> components = default_backbone();

  std::string host() const;
  int port() const;

  /// Vision encoder, query transformer and language model, 4 GB in total.
  static std::vector<ComponentSpec> default_backbone();
};

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

/// std::getenv-backed lookup.
EnvLookup process_env();

/// Reads the optional JSON config file, then applies environment overrides
/// (LISTEN_ADDR, REGISTRY_PATH, EMBED_DIM, THRESHOLD, TOP_K, BUDGET_BYTES,
/// BACKEND_MODE, BACKEND_TIMEOUT_MS, MAX_IMAGE_BYTES).
/// Throws Error(InvalidConfig) or Error(IoFailure).
GatewayConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env = process_env());

}  // namespace medagi
