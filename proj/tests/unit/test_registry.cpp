#include "medagi/error.hpp"
#include "medagi/registry.hpp"
#include "medagi/seed.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <atomic>
#include <random>
#include <set>
#include <thread>

using namespace medagi;
using testutil::make_expert;

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

std::shared_ptr<const EmbeddingProvider> provider(std::size_t dim = 256) {
  return std::make_shared<HashingProvider>(dim);
}

// Fails on any description containing the token "corrupt".
class PickyProvider final : public EmbeddingProvider {
 public:
  std::string id() const override { return "picky"; }
  std::size_t dimension() const override { return 32; }
  std::string config_hash() const override { return "1"; }
  std::vector<std::vector<double>> encode(const TokenSequence& t) const override {
    for (const auto& tok : t.tokens()) {
      if (tok == "corrupt") throw std::runtime_error("cannot encode");
    }
    return HashingProvider(32).encode(t);
  }
};

void check_coherent(const RegistrySnapshot& snap) {
  std::set<std::string> ids;
  for (const auto& e : snap.experts) ids.insert(e.id);
  REQUIRE(ids.size() == snap.experts.size());
  std::set<std::string> keys;
  for (const auto& [id, embedding] : snap.index->entries) {
    keys.insert(id);
    CHECK(embedding.provider_fingerprint() == snap.index->provider_fingerprint);
  }
  CHECK(keys == ids);
  CHECK(snap.index->provider_fingerprint == snap.provider->fingerprint());
}

ExpertDescriptor random_descriptor(std::mt19937_64& rng, int n) {
  ExpertDescriptor d = make_expert("e" + std::to_string(n) + "-" + std::to_string(rng() % 1000),
                                   testutil::random_text(rng, 1, 30));
  d.display_name = rng() % 2 ? "Name \"quoted\" " + std::to_string(n) : "";
  d.adapter_ref = "s3://bucket/adapters/" + std::to_string(rng());
  if (rng() % 2) d.backend_endpoint = "http://127.0.0.1:" + std::to_string(1000 + rng() % 9000) + "/chat";
  for (std::size_t t = rng() % 4; t > 0; --t) d.tags.push_back(testutil::random_text(rng, 1, 2));
  d.created_at = Timestamp{std::chrono::seconds{static_cast<long long>(rng() % 4'000'000'000ULL)}};
  return d;
}

}  // namespace

TEST_CASE("expert id slug rules") {
  CHECK(is_valid_expert_id("skingpt4"));
  CHECK(is_valid_expert_id("a"));
  CHECK(is_valid_expert_id("x_ray-chat2"));
  CHECK(is_valid_expert_id(std::string(64, 'a')));
  CHECK_FALSE(is_valid_expert_id(std::string(65, 'a')));
  CHECK_FALSE(is_valid_expert_id(""));
  CHECK_FALSE(is_valid_expert_id("-lead"));
  CHECK_FALSE(is_valid_expert_id("Upper"));
  CHECK_FALSE(is_valid_expert_id("has space"));
}

TEST_CASE("RFC 3339 timestamps") {
  const Timestamp t = testutil::fixed_time();
  CHECK(format_rfc3339(t) == "2024-01-15T09:00:00Z");
  CHECK(parse_rfc3339("2024-01-15T09:00:00Z") == t);
  CHECK(parse_rfc3339("2024-01-15T11:30:00+02:30") == t);
  CHECK(parse_rfc3339("2024-01-15t09:00:00.987z") == t);
  CHECK(code_of([] { parse_rfc3339("2024-02-30T00:00:00Z"); }) == ErrorCode::ParseFailure);
  CHECK(code_of([] { parse_rfc3339("2024-01-15 09:00:00"); }) == ErrorCode::ParseFailure);
  CHECK(code_of([] { parse_rfc3339("2024-01-15T09:00:00"); }) == ErrorCode::ParseFailure);
}

TEST_CASE("register, list and remove") {
  Registry reg(provider());
  CHECK(reg.list_experts().empty());
  CHECK(reg.snapshot()->version == 0);

  const auto seeds = seed_experts(testutil::fixed_time());
  const auto& skin = seeds[1];
  REQUIRE(skin.id == "skingpt4");
  CHECK(skin.description.rfind("SkinGPT is a revolutionary dermatology diagnostic system", 0) == 0);
  CHECK(reg.register_expert(skin) == 1);
  CHECK(reg.snapshot()->index->entries.size() == 1);

  CHECK(code_of([&] { reg.register_expert(skin); }) == ErrorCode::DuplicateId);
  CHECK(code_of([&] { reg.register_expert(make_expert("noise", "???")); }) == ErrorCode::EmbeddingFailure);
  auto bad = make_expert("Bad Id", "text");
  CHECK(code_of([&] { reg.register_expert(bad); }) == ErrorCode::InvalidDescriptor);
  auto no_adapter = make_expert("ok", "text");
  no_adapter.adapter_ref.clear();
  CHECK(code_of([&] { reg.register_expert(no_adapter); }) == ErrorCode::InvalidDescriptor);
  auto bad_url = make_expert("ok", "text");
  bad_url.backend_endpoint = "ftp://x";
  CHECK(code_of([&] { reg.register_expert(bad_url); }) == ErrorCode::InvalidDescriptor);
  CHECK(reg.snapshot()->version == 1);

  CHECK(reg.remove_expert("skingpt4") == 2);
  CHECK(reg.list_experts().empty());
  CHECK(reg.snapshot()->index->entries.empty());
  CHECK(code_of([&] { reg.remove_expert("ghost"); }) == ErrorCode::UnknownExpert);
}

TEST_CASE("list_experts is sorted by id") {
  Registry reg(provider());
  reg.register_expert(make_expert("b", "second expert"));
  reg.register_expert(make_expert("a", "first expert"));
  const auto listed = reg.list_experts();
  REQUIRE(listed.size() == 2);
  CHECK(listed[0].id == "a");
  CHECK(listed[1].id == "b");

  Registry seeded(provider());
  for (const auto& d : seed_experts(testutil::fixed_time())) seeded.register_expert(d);
  const auto three = seeded.list_experts();
  REQUIRE(three.size() == 3);
  CHECK(three[0].id == "pathologychat");
  CHECK(three[1].id == "skingpt4");
  CHECK(three[2].id == "xraychat");
  check_coherent(*seeded.snapshot());
}

TEST_CASE("snapshots are immutable after a write") {
  Registry reg(provider());
  reg.register_expert(make_expert("a", "alpha"));
  const auto before = reg.snapshot();
  reg.register_expert(make_expert("b", "beta"));
  CHECK(before->experts.size() == 1);
  CHECK(before->index->entries.size() == 1);
  CHECK(reg.snapshot()->experts.size() == 2);
}

TEST_CASE("rebuild_index") {
  Registry reg(provider());
  for (const auto& d : seed_experts(testutil::fixed_time())) reg.register_expert(d);

  const auto first = reg.rebuild_index(provider());
  const auto second = reg.rebuild_index(provider());
  CHECK(*first == *second);
  CHECK(reg.snapshot()->version == 5);

  reg.rebuild_index(provider(128));
  for (const auto& [id, e] : reg.snapshot()->index->entries) CHECK(e.dimension() == 128);
  check_coherent(*reg.snapshot());
}

TEST_CASE("rebuild_index is all-or-nothing") {
  Registry reg(std::make_shared<PickyProvider>());
  reg.register_expert(make_expert("a", "alpha"));
  reg.register_expert(make_expert("b", "bravo"));
  reg.register_expert(make_expert("c", "charlie"));
  const auto old = reg.snapshot();

  Registry corrupt(provider());
  corrupt.register_expert(make_expert("a", "alpha"));
  corrupt.register_expert(make_expert("b", "a corrupt description"));
  corrupt.register_expert(make_expert("c", "charlie"));
  const auto before = corrupt.snapshot();
  CHECK(code_of([&] { corrupt.rebuild_index(std::make_shared<PickyProvider>()); }) == ErrorCode::EmbeddingFailure);
  CHECK(corrupt.snapshot() == before);
  CHECK(corrupt.snapshot()->index->provider_fingerprint == HashingProvider().fingerprint());
  CHECK(old->version == 3);
}

TEST_CASE("concurrent readers see whole indexes during rebuilds") {
  Registry reg(provider());
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) reg.register_expert(make_expert("e" + std::to_string(i), testutil::random_text(rng, 3, 12)));

  std::atomic<bool> stop{false};
  std::atomic<int> violations{0};
  std::vector<std::thread> readers;
  for (int r = 0; r < 4; ++r) {
    readers.emplace_back([&] {
      std::uint64_t last_version = 0;
      while (!stop) {
        const auto snap = reg.snapshot();
        if (snap->version < last_version) ++violations;
        last_version = snap->version;
        const auto dim = snap->provider->dimension();
        for (const auto& [id, e] : snap->index->entries) {
          if (e.provider_fingerprint() != snap->index->provider_fingerprint || e.dimension() != dim) ++violations;
        }
        if (snap->index->entries.size() != snap->experts.size()) ++violations;
      }
    });
  }
  for (int i = 0; i < 40; ++i) reg.rebuild_index(provider(i % 2 ? 64 : 256));
  stop = true;
  for (auto& t : readers) t.join();
  CHECK(violations == 0);
  CHECK(reg.snapshot()->version == 60);
}

TEST_CASE("save and load round-trip") {
  testutil::TempDir dir;
  const auto path = dir / "registry.json";
  {
    Registry reg(provider(), path);
    for (const auto& d : seed_experts(testutil::fixed_time())) reg.register_expert(d);
  }
  const auto loaded = load_registry(path, provider());
  CHECK(loaded.experts == seed_experts(testutil::fixed_time()));
  CHECK(loaded.version == 3);
  check_coherent(loaded);

  Registry reopened(provider(), path);
  CHECK(reopened.list_experts() == seed_experts(testutil::fixed_time()));
  reopened.remove_expert("xraychat");
  CHECK(read_registry_file(path).size() == 2);
}

TEST_CASE("load_registry rejects malformed files") {
  testutil::TempDir dir;
  const auto path = dir / "r.json";
  const std::string good =
      R"({"id":"a","display_name":"A","description":"alpha","adapter_ref":"x","backend_endpoint":null,"tags":[],"created_at":"2024-01-15T09:00:00Z"})";

  testutil::write_file(path, R"({"schema_version":1,"experts":[)" + good + "," + good + "]}");
  try {
    read_registry_file(path);
    FAIL("duplicate id accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseFailure);
    CHECK(std::string(e.what()).find("duplicate id 'a'") != std::string::npos);
  }

  testutil::write_file(path, R"({"schema_version":2,"experts":[]})");
  try {
    read_registry_file(path);
    FAIL("schema 2 accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseFailure);
    CHECK(std::string(e.what()).find("schema_version 2") != std::string::npos);
  }

  testutil::write_file(path, R"({"schema_version":1,"experts":[],"extra":1})");
  CHECK(code_of([&] { read_registry_file(path); }) == ErrorCode::ParseFailure);
  testutil::write_file(path, R"({"schema_version":1,"experts":[{"id":"a","description":"x","adapter_ref":"y","display_name":"","created_at":"2024-01-15T09:00:00Z","colour":"red"}]})");
  CHECK(code_of([&] { read_registry_file(path); }) == ErrorCode::ParseFailure);
  testutil::write_file(path, "{not json");
  CHECK(code_of([&] { read_registry_file(path); }) == ErrorCode::ParseFailure);
  testutil::write_file(path, R"({"schema_version":1,"experts":[)" +
                                 std::string(R"({"id":"a","display_name":"A","description":"?!","adapter_ref":"x","tags":[],"created_at":"2024-01-15T09:00:00Z"})") +
                                 "]}");
  CHECK(code_of([&] { load_registry(path, provider()); }) == ErrorCode::ParseFailure);
  CHECK(code_of([&] { read_registry_file(dir / "missing.json"); }) == ErrorCode::IoFailure);
}

TEST_CASE("persistence round-trip over random registries") {
  testutil::TempDir dir;
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    Registry reg(provider());
    const int n = static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) reg.register_expert(random_descriptor(rng, i));
    const auto path = dir / ("r" + std::to_string(trial) + ".json");
    reg.save(path);
    const auto loaded = load_registry(path, provider());
    CHECK(loaded.experts == reg.list_experts());
    CHECK(*loaded.index == *reg.snapshot()->index);
  }
}
