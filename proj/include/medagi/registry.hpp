#pragma once

#include "medagi/embedding.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace medagi {

using Timestamp = std::chrono::sys_seconds;

struct ExpertDescriptor {
  std::string id;
  std::string display_name;
  std::string description;
  std::string adapter_ref;
  std::optional<std::string> backend_endpoint;
  std::vector<std::string> tags;
  Timestamp created_at{};

  bool operator==(const ExpertDescriptor&) const = default;
};

/// ^[a-z0-9][a-z0-9_-]{0,63}$
bool is_valid_expert_id(std::string_view id);

/// Throws Error(InvalidDescriptor) naming the offending field. Description
/// normalization is checked separately, at embedding time.
void validate_descriptor(const ExpertDescriptor& descriptor);

std::string format_rfc3339(Timestamp t);
/// Accepts "YYYY-MM-DDTHH:MM:SS[.fff](Z|+hh:mm|-hh:mm)"; fractional seconds
/// are truncated. Throws Error(ParseFailure).
Timestamp parse_rfc3339(std::string_view text);

nlohmann::json to_json(const ExpertDescriptor& descriptor);
/// Strict decoding: unknown keys, missing required keys and wrong types all
/// raise Error(InvalidDescriptor).
ExpertDescriptor descriptor_from_json(const nlohmann::json& j);

/// Precomputed description embeddings keyed by expert id.
struct DescriptionIndex {
  std::string provider_fingerprint;
  std::map<std::string, SentenceEmbedding, std::less<>> entries;

  bool operator==(const DescriptionIndex&) const = default;
};

/// Immutable view of the registry at one version.
struct RegistrySnapshot {
  std::vector<ExpertDescriptor> experts;  // ascending id
  std::shared_ptr<const DescriptionIndex> index;
  std::shared_ptr<const EmbeddingProvider> provider;
  std::uint64_t version = 0;

  const ExpertDescriptor* find(std::string_view id) const;
  bool empty() const noexcept { return experts.empty(); }
};

inline constexpr int kRegistrySchemaVersion = 1;

/// Writes {schema_version, experts} to `path` via a temp file + rename.
void save_registry(const std::vector<ExpertDescriptor>& experts, const std::filesystem::path& path);

/// Parses and validates a registry file. Throws Error(IoFailure) or
/// Error(ParseFailure).
std::vector<ExpertDescriptor> read_registry_file(const std::filesystem::path& path);

/// Reads a registry file and embeds every description with `provider`.
/// The resulting version equals the number of experts loaded, as if each
/// had been registered in turn.
RegistrySnapshot load_registry(const std::filesystem::path& path,
                               std::shared_ptr<const EmbeddingProvider> provider);

/// Embeds every description; throws Error(EmbeddingFailure) naming the
/// first expert whose description cannot be embedded.
std::shared_ptr<const DescriptionIndex> build_index(const std::vector<ExpertDescriptor>& experts,
                                                    const EmbeddingProvider& provider);

/// Expert store with copy-on-write snapshots. Writers are serialized;
/// readers grab the current snapshot pointer and never see partial updates.
class Registry {
 public:
  /// When `persist_path` is set and the file exists it is loaded; every
  /// subsequent write is saved there before it becomes visible.
  explicit Registry(std::shared_ptr<const EmbeddingProvider> provider,
                    std::optional<std::filesystem::path> persist_path = std::nullopt);

  Registry(const Registry&) = delete;
  Registry& operator=(const Registry&) = delete;

  std::shared_ptr<const RegistrySnapshot> snapshot() const;

  std::uint64_t register_expert(ExpertDescriptor descriptor);
  std::uint64_t remove_expert(std::string_view id);
  std::vector<ExpertDescriptor> list_experts() const;

  /// Re-embeds every description under `provider` and swaps it in. On
  /// failure the previous index and provider stay active.
  std::shared_ptr<const DescriptionIndex> rebuild_index(std::shared_ptr<const EmbeddingProvider> provider);

  void save(const std::filesystem::path& path) const;

  const std::optional<std::filesystem::path>& persist_path() const noexcept { return persist_path_; }

 private:
  void publish(std::shared_ptr<const RegistrySnapshot> next);

  std::optional<std::filesystem::path> persist_path_;
  std::mutex write_mutex_;
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const RegistrySnapshot> current_;
};

}  // namespace medagi
