#include "medagi/embedding.hpp"
#include "medagi/error.hpp"

#include "reference_oracle.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace medagi;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected medagi::Error");
  return ErrorCode::InvalidConfig;
}

std::vector<std::string> toks(std::string_view text) { return normalize_text(text).tokens(); }

class ShortProvider final : public EmbeddingProvider {
 public:
  std::string id() const override { return "short"; }
  std::size_t dimension() const override { return 256; }
  std::string config_hash() const override { return "0"; }
  std::vector<std::vector<double>> encode(const TokenSequence& t) const override {
    return std::vector<std::vector<double>>(t.length(), std::vector<double>(128, 1.0));
  }
};

class ThrowingProvider final : public EmbeddingProvider {
 public:
  std::string id() const override { return "down"; }
  std::size_t dimension() const override { return 4; }
  std::string config_hash() const override { return "0"; }
  bool thread_safe() const override { return false; }
  std::vector<std::vector<double>> encode(const TokenSequence&) const override {
    throw std::runtime_error("connection refused");
  }
};

SentenceEmbedding emb(std::vector<double> v) { return SentenceEmbedding(std::move(v), "test"); }

}  // namespace

TEST_CASE("normalize_text applies lowercase, whitespace split and edge strip") {
  CHECK(toks("Skin rash?") == std::vector<std::string>{"skin", "rash"});
  CHECK(toks("A") == std::vector<std::string>{"a"});
  CHECK(toks("  (H&E)  stained\tX-Ray!\n") == std::vector<std::string>{"h&e", "stained", "x-ray"});
  CHECK(toks("Ünïcode ÉCLAT") == std::vector<std::string>{"ünïcode", "éclat"});
  CHECK(code_of([] { normalize_text("  ...  "); }) == ErrorCode::EmptyInput);
  CHECK(code_of([] { normalize_text(""); }) == ErrorCode::EmptyInput);
  CHECK(code_of([] { normalize_text("bad \xC3\x28 utf8"); }) == ErrorCode::InvalidUtf8);
  CHECK(code_of([] { normalize_text("\xE0\x80\x80"); }) == ErrorCode::InvalidUtf8);
  CHECK(code_of([] { normalize_text("cut \xE2\x82"); }) == ErrorCode::InvalidUtf8);
}

TEST_CASE("TokenSequence::from_tokens enforces the invariants") {
  CHECK(TokenSequence::from_tokens({"a", "b"}).length() == 2);
  CHECK(code_of([] { TokenSequence::from_tokens({}); }) == ErrorCode::EmptyInput);
  CHECK_THROWS_AS(TokenSequence::from_tokens({"Upper"}), std::invalid_argument);
  CHECK_THROWS_AS(TokenSequence::from_tokens({"two words"}), std::invalid_argument);
  CHECK_THROWS_AS(TokenSequence::from_tokens({""}), std::invalid_argument);
}

TEST_CASE("fnv1a64 matches published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("hash_embed_token golden values frozen from the standalone oracle") {
  // "#skin#" has four trigrams landing on distinct buckets.
  const auto skin = hash_embed_token("skin", 256);
  REQUIRE(skin.size() == 256);
  for (std::size_t i = 0; i < 256; ++i) {
    double expected = 0.0;
    if (i == 85 || i == 199) expected = 0.5;
    if (i == 134 || i == 200) expected = -0.5;
    CHECK(skin[i] == expected);
  }
  CHECK(std::vector<double>(skin.begin(), skin.begin() + 4) == std::vector<double>{0.0, 0.0, 0.0, 0.0});

  const auto a = hash_embed_token("a", 256);
  CHECK(std::count_if(a.begin(), a.end(), [](double x) { return x != 0.0; }) == 1);
  CHECK(a[94] == -1.0);

  CHECK(hash_embed_token("skin", 256) == skin);
  CHECK(oracle::token_vector("skin", 256) == skin);
}

TEST_CASE("hash_embed_token rejects precondition violations") {
  CHECK_THROWS_AS(hash_embed_token("", 256), std::invalid_argument);
  CHECK_THROWS_AS(hash_embed_token("a", 1), std::invalid_argument);
  CHECK_THROWS_AS(HashingProvider(1), std::invalid_argument);
}

TEST_CASE("hash_embed_token agrees with the reference oracle on random tokens") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    std::string token;
    const std::size_t len = 1 + rng() % 12;
    for (std::size_t k = 0; k < len; ++k) token.push_back("abcdefghijklmnopqrstuvwxyz0123456789-&"[rng() % 38]);
    const std::size_t dim = 2 + rng() % 300;
    CHECK(hash_embed_token(token, dim) == oracle::token_vector(token, dim));
  }
}

TEST_CASE("embed_tokens validates the provider contract") {
  HashingProvider provider;
  const auto one = embed_tokens(TokenSequence::from_tokens({"skin"}), provider);
  REQUIRE(one.vectors.size() == 1);
  CHECK(one.dimension == 256);
  double sq = 0.0;
  for (double x : one.vectors[0]) sq += x * x;
  CHECK(sq == doctest::Approx(1.0).epsilon(1e-15));

  const auto twice = embed_tokens(TokenSequence::from_tokens({"a", "a"}), provider);
  CHECK(twice.vectors[0] == twice.vectors[1]);

  ShortProvider short_provider;
  CHECK(code_of([&] { embed_tokens(TokenSequence::from_tokens({"x"}), short_provider); }) ==
        ErrorCode::ProviderFailure);
  ThrowingProvider down;
  CHECK(code_of([&] { embed_tokens(TokenSequence::from_tokens({"x"}), down); }) == ErrorCode::ProviderFailure);
}

TEST_CASE("HashingProvider fingerprint depends on dimension only") {
  CHECK(HashingProvider(256).fingerprint() == HashingProvider(256).fingerprint());
  CHECK(HashingProvider(256).fingerprint() != HashingProvider(128).fingerprint());
}

TEST_CASE("SerializedProvider forwards identity and output") {
  auto inner = std::make_shared<HashingProvider>(64);
  SerializedProvider wrapped(inner);
  CHECK(wrapped.fingerprint() == inner->fingerprint());
  const auto t = TokenSequence::from_tokens({"chest", "x-ray"});
  CHECK(wrapped.encode(t) == inner->encode(t));
}

TEST_CASE("mean_pool") {
  CHECK(mean_pool({{{1, 0}}, 2}, "f").values() == std::vector<double>{1, 0});
  CHECK(mean_pool({{{1, 0}, {0, 1}}, 2}, "f").values() == std::vector<double>{0.5, 0.5});
  CHECK(code_of([] { mean_pool({{{1, 0}, {-1, 0}}, 2}, "f"); }) == ErrorCode::DegenerateEmbedding);
  CHECK(mean_pool({{{1, 0}}, 2}, "fp").provider_fingerprint() == "fp");
}

TEST_CASE("embed_text reproduces the oracle for a full question") {
  HashingProvider provider;
  const auto u = embed_text("what is this skin condition", provider);
  CHECK(u.dimension() == 256);
  CHECK(u.values() == oracle::sentence("what is this skin condition"));
  CHECK(std::count_if(u.values().begin(), u.values().end(), [](double x) { return x != 0.0; }) == 21);
  CHECK(u.values()[2] == 0.24142135623730948);
  CHECK(u.values()[65] == 0.1);
}

TEST_CASE("cosine_similarity examples and errors") {
  CHECK(cosine_similarity(emb({1, 0}), emb({1, 0})) == 1.0);
  CHECK(cosine_similarity(emb({1, 0}), emb({0, 1})) == 0.0);
  CHECK(std::abs(cosine_similarity(emb({1, 1}), emb({1, 0})) - 0.70710678) < 1e-8);
  CHECK(std::abs(cosine_similarity(emb({1, 1}), emb({1, 0})) - 1.0 / std::sqrt(2.0)) < 1e-15);

  const std::vector<double> zero{0, 0};
  const std::vector<double> x{1, 0};
  const std::vector<double> x3{1, 0, 0};
  CHECK(code_of([&] { cosine_similarity(std::span<const double>(zero), std::span<const double>(x)); }) ==
        ErrorCode::ZeroVector);
  CHECK(code_of([&] { cosine_similarity(std::span<const double>(x3), std::span<const double>(x)); }) ==
        ErrorCode::DimensionMismatch);
  CHECK(code_of([] { emb({0, 0}); }) == ErrorCode::DegenerateEmbedding);
}

TEST_CASE("cosine properties over random vectors") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> alpha(1e-3, 1e3);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t d = 2 + rng() % 64;
    std::vector<double> u(d), v(d);
    for (auto& x : u) x = g(rng);
    for (auto& x : v) x = g(rng);
    const double s = cosine_similarity(emb(u), emb(v));
    CHECK(s == cosine_similarity(emb(v), emb(u)));
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
    CHECK(std::abs(cosine_similarity(emb(u), emb(u)) - 1.0) <= 1e-12);
    const double a = alpha(rng);
    std::vector<double> scaled = u;
    for (auto& x : scaled) x *= a;
    CHECK(std::abs(cosine_similarity(emb(scaled), emb(v)) - s) <= 1e-9);
  }
}

TEST_CASE("pooling is permutation invariant for the context-free provider") {
  HashingProvider provider;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto seq = normalize_text(testutil::random_text(rng, 1, 20));
    auto shuffled = seq.tokens();
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto a = mean_pool(embed_tokens(seq, provider), provider.fingerprint());
    const auto b = mean_pool(embed_tokens(TokenSequence::from_tokens(shuffled), provider), provider.fingerprint());
    for (std::size_t k = 0; k < a.dimension(); ++k) CHECK(std::abs(a.values()[k] - b.values()[k]) <= 1e-9);
  }
}
