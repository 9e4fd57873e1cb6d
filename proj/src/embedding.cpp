#include "medagi/embedding.hpp"

#include "medagi/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <locale>
#include <optional>
#include <stdexcept>

namespace medagi {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

// Returns false on malformed UTF-8 (overlongs, surrogates, truncation).
bool decode_utf8(std::string_view text, std::u32string& out) {
  out.clear();
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    char32_t cp = 0;
    std::size_t extra = 0;
    if (lead < 0x80) {
      cp = lead;
    } else if ((lead & 0xE0) == 0xC0) {
      cp = lead & 0x1F;
      extra = 1;
    } else if ((lead & 0xF0) == 0xE0) {
      cp = lead & 0x0F;
      extra = 2;
    } else if ((lead & 0xF8) == 0xF0) {
      cp = lead & 0x07;
      extra = 3;
    } else {
      return false;
    }
    if (i + extra >= text.size() && extra > 0) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto c = static_cast<unsigned char>(text[i + k]);
      if ((c & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (c & 0x3F);
    }
    static constexpr char32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    out.push_back(cp);
    i += extra + 1;
  }
  return true;
}

void append_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Unicode White_Space property.
bool is_space(char32_t cp) {
  return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 ||
         cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 ||
         cp == 0x2029 || cp == 0x202F || cp == 0x205F || cp == 0x3000;
}

// Unicode-aware classification from the C.UTF-8 locale when available.
std::optional<std::locale> utf8_locale() {
  for (const char* name : {"C.UTF-8", "C.utf8", "en_US.UTF-8"}) {
    try {
      return std::locale(name);
    } catch (const std::runtime_error&) {
    }
  }
  return std::nullopt;
}

// nullptr when no UTF-8 locale is installed; callers fall back to ASCII rules.
const std::ctype<wchar_t>* unicode_ctype() {
  static const std::optional<std::locale> loc = utf8_locale();
  static const std::ctype<wchar_t>* facet =
      loc ? &std::use_facet<std::ctype<wchar_t>>(*loc) : nullptr;
  return facet;
}

bool is_alnum(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
  }
  if (const auto* ct = unicode_ctype()) {
    return ct->is(std::ctype_base::alnum, static_cast<wchar_t>(cp));
  }
  return true;
}

char32_t to_lower(char32_t cp) {
  if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + ('a' - 'A') : cp;
  if (const auto* ct = unicode_ctype()) {
    return static_cast<char32_t>(ct->tolower(static_cast<wchar_t>(cp)));
  }
  return cp;
}

bool has_upper_ascii_or_space(std::string_view token) {
  return std::any_of(token.begin(), token.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || is_space(static_cast<unsigned char>(c));
  });
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = kFnvOffset;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

TokenSequence TokenSequence::from_tokens(std::vector<std::string> tokens) {
  if (tokens.empty()) throw Error(ErrorCode::EmptyInput, "token sequence is empty");
  for (const auto& t : tokens) {
    if (t.empty() || has_upper_ascii_or_space(t)) {
      throw std::invalid_argument("token '" + t + "' is not normalized");
    }
  }
  return TokenSequence(std::move(tokens));
}

TokenSequence normalize_text(std::string_view text) {
  std::u32string cps;
  if (!decode_utf8(text, cps)) throw Error(ErrorCode::InvalidUtf8, "input is not valid UTF-8");

  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && is_space(cps[i])) ++i;
    std::size_t end = i;
    while (end < cps.size() && !is_space(cps[end])) ++end;
    std::size_t first = i;
    std::size_t last = end;
    while (first < last && !is_alnum(cps[first])) ++first;
    while (last > first && !is_alnum(cps[last - 1])) --last;
    if (first < last) {
      std::string token;
      for (std::size_t k = first; k < last; ++k) append_utf8(to_lower(cps[k]), token);
      tokens.push_back(std::move(token));
    }
    i = end;
  }
  if (tokens.empty()) throw Error(ErrorCode::EmptyInput, "no tokens survive normalization");
  return TokenSequence(std::move(tokens));
}

std::vector<double> hash_embed_token(std::string_view token, std::size_t dimension) {
  if (dimension < 2) throw std::invalid_argument("hash dimension must be at least 2");
  std::u32string cps;
  if (token.empty() || !decode_utf8(token, cps)) {
    throw std::invalid_argument("token must be non-empty UTF-8");
  }
  cps.insert(cps.begin(), U'#');
  cps.push_back(U'#');

  std::vector<double> vec(dimension, 0.0);
  std::string gram;
  for (std::size_t k = 0; k + 3 <= cps.size(); ++k) {
    gram.clear();
    for (std::size_t j = k; j < k + 3; ++j) append_utf8(cps[j], gram);
    const std::uint64_t h = fnv1a64(gram);
    vec[h % dimension] += (h >> 63) ? -1.0 : 1.0;
  }

  double sq = 0.0;
  for (const double x : vec) sq += x * x;
  if (sq != 0.0) {
    const double norm = std::sqrt(sq);
    for (double& x : vec) x /= norm;
  }
  return vec;
}

HashingProvider::HashingProvider(std::size_t dimension) : dimension_(dimension) {
  if (dimension < 2) throw std::invalid_argument("hash dimension must be at least 2");
  const std::string settings =
      "ngram=3;pad=#;hash=fnv1a64;signed=1;norm=l2;dim=" + std::to_string(dimension);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(settings)));
  config_hash_ = buf;
}

std::vector<std::vector<double>> HashingProvider::encode(const TokenSequence& tokens) const {
  std::vector<std::vector<double>> out;
  out.reserve(tokens.length());
  for (const auto& t : tokens.tokens()) out.push_back(hash_embed_token(t, dimension_));
  return out;
}

SerializedProvider::SerializedProvider(std::shared_ptr<const EmbeddingProvider> inner)
    : inner_(std::move(inner)) {
  if (!inner_) throw std::invalid_argument("SerializedProvider needs a provider");
}

std::vector<std::vector<double>> SerializedProvider::encode(const TokenSequence& tokens) const {
  std::lock_guard lock(mutex_);
  return inner_->encode(tokens);
}

SentenceEmbedding::SentenceEmbedding(std::vector<double> values, std::string provider_fingerprint)
    : values_(std::move(values)), fingerprint_(std::move(provider_fingerprint)) {
  if (values_.empty()) throw Error(ErrorCode::DegenerateEmbedding, "embedding has no components");
  bool any_nonzero = false;
  for (const double x : values_) {
    if (!std::isfinite(x)) throw Error(ErrorCode::DegenerateEmbedding, "embedding has a non-finite component");
    any_nonzero = any_nonzero || x != 0.0;
  }
  if (!any_nonzero) throw Error(ErrorCode::DegenerateEmbedding, "pooled embedding is all zero");
}

TokenEmbeddings embed_tokens(const TokenSequence& tokens, const EmbeddingProvider& provider) {
  const std::size_t dim = provider.dimension();
  std::vector<std::vector<double>> vectors;
  try {
    vectors = provider.encode(tokens);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ProviderFailure, "provider " + provider.id() + " failed: " + e.what());
  }
  if (vectors.size() != tokens.length()) {
    throw Error(ErrorCode::ProviderFailure,
                "provider " + provider.id() + " returned " + std::to_string(vectors.size()) +
                    " vectors for " + std::to_string(tokens.length()) + " tokens");
  }
  for (const auto& v : vectors) {
    if (v.size() != dim) {
      throw Error(ErrorCode::ProviderFailure,
                  "provider " + provider.id() + " declared dimension " + std::to_string(dim) +
                      " but returned " + std::to_string(v.size()));
    }
    if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
      throw Error(ErrorCode::ProviderFailure, "provider " + provider.id() + " returned a non-finite value");
    }
  }
  return TokenEmbeddings{std::move(vectors), dim};
}

SentenceEmbedding mean_pool(const TokenEmbeddings& embeddings, std::string provider_fingerprint) {
  if (embeddings.vectors.empty()) throw std::invalid_argument("mean_pool of no vectors");
  std::vector<double> acc(embeddings.dimension, 0.0);
  for (const auto& v : embeddings.vectors) {
    if (v.size() != acc.size()) throw Error(ErrorCode::DimensionMismatch, "ragged token embeddings");
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
  }
  const auto n = static_cast<double>(embeddings.vectors.size());
  bool any_nonzero = false;
  for (double& x : acc) {
    x /= n;
    any_nonzero = any_nonzero || x != 0.0;
  }
  if (!any_nonzero) throw Error(ErrorCode::DegenerateEmbedding, "pooled embedding is all zero");
  return SentenceEmbedding(std::move(acc), std::move(provider_fingerprint));
}

SentenceEmbedding embed_text(std::string_view text, const EmbeddingProvider& provider) {
  const TokenSequence tokens = normalize_text(text);
  return mean_pool(embed_tokens(tokens, provider), provider.fingerprint());
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::DimensionMismatch, "cosine of " + std::to_string(u.size()) + "-dim and " +
                                                  std::to_string(v.size()) + "-dim vectors");
  }
  double dot = 0.0;
  double uu = 0.0;
  double vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  const double s = dot / (std::sqrt(uu) * std::sqrt(vv));
  return std::clamp(s, -1.0, 1.0);
}

double cosine_similarity(const SentenceEmbedding& u, const SentenceEmbedding& v) {
  return cosine_similarity(std::span<const double>(u.values()), std::span<const double>(v.values()));
}

}  // namespace medagi
