#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace medagi {

/// Ordered, normalized tokens of one piece of text. Never empty; every
/// token is lowercase, non-empty and free of whitespace.
class TokenSequence {
 public:
  /// Validates pre-tokenized input. Throws Error(EmptyInput) when `tokens`
  /// is empty and std::invalid_argument when a token breaks the invariants.
  static TokenSequence from_tokens(std::vector<std::string> tokens);

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::size_t length() const noexcept { return tokens_.size(); }

  bool operator==(const TokenSequence&) const = default;

 private:
  explicit TokenSequence(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {}
  friend TokenSequence normalize_text(std::string_view text);

  std::vector<std::string> tokens_;
};

/// One vector per token, all of the same dimension.
struct TokenEmbeddings {
  std::vector<std::vector<double>> vectors;
  std::size_t dimension = 0;
};

/// Pooled sentence vector tagged with the provider configuration that made it.
class SentenceEmbedding {
 public:
  /// Throws Error(DegenerateEmbedding) for empty, non-finite or all-zero input.
  SentenceEmbedding(std::vector<double> values, std::string provider_fingerprint);

  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t dimension() const noexcept { return values_.size(); }
  const std::string& provider_fingerprint() const noexcept { return fingerprint_; }

  bool operator==(const SentenceEmbedding&) const = default;

 private:
  std::vector<double> values_;
  std::string fingerprint_;
};

/// Source of per-token vectors. Implementations must be deterministic for a
/// fixed config_hash, at least within one process.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string id() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string config_hash() const = 0;

  /// False when concurrent calls to encode() are unsafe; the gateway then
  /// wraps the provider in a SerializedProvider.
  virtual bool thread_safe() const { return true; }

  /// Raw encoder output. Callers should go through embed_tokens(), which
  /// checks the result against the declared dimension.
  virtual std::vector<std::vector<double>> encode(const TokenSequence& tokens) const = 0;

  std::string fingerprint() const { return id() + "/" + config_hash(); }
};

/// Built-in reference provider: signed feature hashing of character 3-grams.
class HashingProvider final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDimension = 256;

  explicit HashingProvider(std::size_t dimension = kDefaultDimension);

  std::string id() const override { return "hash-trigram-fnv1a64"; }
  std::size_t dimension() const override { return dimension_; }
  std::string config_hash() const override { return config_hash_; }
  std::vector<std::vector<double>> encode(const TokenSequence& tokens) const override;

 private:
  std::size_t dimension_;
  std::string config_hash_;
};

/// Puts an exclusive-access boundary around a provider that is not safe to
/// share between threads.
class SerializedProvider final : public EmbeddingProvider {
 public:
  explicit SerializedProvider(std::shared_ptr<const EmbeddingProvider> inner);

  std::string id() const override { return inner_->id(); }
  std::size_t dimension() const override { return inner_->dimension(); }
  std::string config_hash() const override { return inner_->config_hash(); }
  std::vector<std::vector<double>> encode(const TokenSequence& tokens) const override;

 private:
  std::shared_ptr<const EmbeddingProvider> inner_;
  mutable std::mutex mutex_;
};

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Lowercases, splits on Unicode whitespace and strips non-alphanumeric
/// characters from both ends of each token. Throws Error(EmptyInput) when
/// nothing survives and Error(InvalidUtf8) on malformed input.
TokenSequence normalize_text(std::string_view text);

/// Reference kernel: pads the token with '#', hashes every character
/// 3-gram with FNV-1a 64 and adds +1/-1 (bit 63 clear/set) at index
/// hash % dimension. The result is L2-normalized unless it is all zero.
std::vector<double> hash_embed_token(std::string_view token, std::size_t dimension);

/// Throws Error(ProviderFailure) if the provider fails or violates its
/// declared dimension / vector count.
TokenEmbeddings embed_tokens(const TokenSequence& tokens, const EmbeddingProvider& provider);

/// Componentwise mean with fixed left-to-right summation.
/// Throws Error(DegenerateEmbedding) if the pooled vector is all zero.
SentenceEmbedding mean_pool(const TokenEmbeddings& embeddings, std::string provider_fingerprint);

/// normalize_text -> embed_tokens -> mean_pool.
SentenceEmbedding embed_text(std::string_view text, const EmbeddingProvider& provider);

/// dot(u, v) / (|u| |v|), clamped to [-1, 1].
/// Throws Error(DimensionMismatch) or Error(ZeroVector).
double cosine_similarity(std::span<const double> u, std::span<const double> v);
double cosine_similarity(const SentenceEmbedding& u, const SentenceEmbedding& v);

}  // namespace medagi
