#include "medagi/registry.hpp"

#include "medagi/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace medagi {

using nlohmann::json;

namespace {

const std::set<std::string, std::less<>> kDescriptorKeys = {
    "id", "display_name", "description", "adapter_ref", "backend_endpoint", "tags", "created_at"};

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::InvalidDescriptor, "invalid descriptor: " + what);
}

[[noreturn]] void parse_failure(const std::string& what) {
  throw Error(ErrorCode::ParseFailure, "registry parse failure: " + what);
}

const std::string& require_string(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) invalid(std::string("missing '") + key + "'");
  if (!it->is_string()) invalid(std::string("'") + key + "' must be a string");
  return it->get_ref<const std::string&>();
}

bool parse_digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  return std::from_chars(s.data() + pos, s.data() + pos + n, out).ec == std::errc{};
}

std::vector<ExpertDescriptor> sorted_by_id(std::vector<ExpertDescriptor> experts) {
  std::sort(experts.begin(), experts.end(),
            [](const ExpertDescriptor& a, const ExpertDescriptor& b) { return a.id < b.id; });
  return experts;
}

}  // namespace

bool is_valid_expert_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  const auto alnum = [](char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); };
  if (!alnum(id.front())) return false;
  return std::all_of(id.begin() + 1, id.end(), [&](char c) { return alnum(c) || c == '_' || c == '-'; });
}

void validate_descriptor(const ExpertDescriptor& d) {
  if (!is_valid_expert_id(d.id)) invalid("id '" + d.id + "' must match ^[a-z0-9][a-z0-9_-]{0,63}$");
  if (d.description.empty()) invalid("description is empty");
  if (d.adapter_ref.empty()) invalid("adapter_ref is empty");
  if (d.backend_endpoint) {
    const auto& url = *d.backend_endpoint;
    if (!(url.rfind("http://", 0) == 0 || url.rfind("https://", 0) == 0) || url.size() <= 8) {
      invalid("backend_endpoint '" + url + "' is not an http(s) URL");
    }
  }
}

std::string format_rfc3339(Timestamp t) {
  const auto day = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::year_month_day ymd{day};
  const std::chrono::hh_mm_ss hms{t - day};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

Timestamp parse_rfc3339(std::string_view s) {
  const auto fail = [&]() -> Timestamp {
    throw Error(ErrorCode::ParseFailure, "bad RFC 3339 timestamp '" + std::string(s) + "'");
  };
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (!parse_digits(s, 0, 4, y) || s.size() < 20 || s[4] != '-' || !parse_digits(s, 5, 2, mo) ||
      s[7] != '-' || !parse_digits(s, 8, 2, d) || (s[10] != 'T' && s[10] != 't') ||
      !parse_digits(s, 11, 2, h) || s[13] != ':' || !parse_digits(s, 14, 2, mi) || s[16] != ':' ||
      !parse_digits(s, 17, 2, sec)) {
    return fail();
  }
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    if (pos == start) return fail();
  }
  int offset_minutes = 0;
  if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
    ++pos;
  } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    int oh = 0, om = 0;
    if (!parse_digits(s, pos + 1, 2, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
        !parse_digits(s, pos + 4, 2, om) || oh > 23 || om > 59) {
      return fail();
    }
    offset_minutes = (s[pos] == '-' ? -1 : 1) * (oh * 60 + om);
    pos += 6;
  } else {
    return fail();
  }
  if (pos != s.size()) return fail();

  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) return fail();
  return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi - offset_minutes} +
         std::chrono::seconds{sec};
}

json to_json(const ExpertDescriptor& d) {
  return json{{"id", d.id},
              {"display_name", d.display_name},
              {"description", d.description},
              {"adapter_ref", d.adapter_ref},
              {"backend_endpoint", d.backend_endpoint ? json(*d.backend_endpoint) : json(nullptr)},
              {"tags", d.tags},
              {"created_at", format_rfc3339(d.created_at)}};
}

ExpertDescriptor descriptor_from_json(const json& j) {
  if (!j.is_object()) invalid("expected an object");
  for (const auto& item : j.items()) {
    if (!kDescriptorKeys.contains(item.key())) invalid("unknown key '" + item.key() + "'");
  }
  ExpertDescriptor d;
  d.id = require_string(j, "id");
  d.display_name = require_string(j, "display_name");
  d.description = require_string(j, "description");
  d.adapter_ref = require_string(j, "adapter_ref");
  if (const auto it = j.find("backend_endpoint"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) invalid("'backend_endpoint' must be a string or null");
    d.backend_endpoint = it->get<std::string>();
  }
  if (const auto it = j.find("tags"); it != j.end()) {
    if (!it->is_array()) invalid("'tags' must be an array");
    for (const auto& tag : *it) {
      if (!tag.is_string()) invalid("'tags' must contain strings");
      d.tags.push_back(tag.get<std::string>());
    }
  }
  try {
    d.created_at = parse_rfc3339(require_string(j, "created_at"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidDescriptor) throw;
    invalid(e.what());
  }
  validate_descriptor(d);
  return d;
}

const ExpertDescriptor* RegistrySnapshot::find(std::string_view id) const {
  const auto it = std::lower_bound(experts.begin(), experts.end(), id,
                                   [](const ExpertDescriptor& e, std::string_view key) { return e.id < key; });
  return (it != experts.end() && it->id == id) ? &*it : nullptr;
}

void save_registry(const std::vector<ExpertDescriptor>& experts, const std::filesystem::path& path) {
  json doc{{"schema_version", kRegistrySchemaVersion}, {"experts", json::array()}};
  for (const auto& e : sorted_by_id(experts)) doc["experts"].push_back(to_json(e));

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
    out << doc.dump(2) << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot replace " + path.string() + ": " + ec.message());
}

std::vector<ExpertDescriptor> read_registry_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();

  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    parse_failure(path.string() + ": " + e.what());
  }
  if (!doc.is_object()) parse_failure("top level must be an object");
  for (const auto& item : doc.items()) {
    if (item.key() != "schema_version" && item.key() != "experts") {
      parse_failure("unknown key '" + item.key() + "'");
    }
  }
  const auto version = doc.find("schema_version");
  if (version == doc.end()) parse_failure("missing schema_version");
  if (!version->is_number_integer() || version->get<long long>() != kRegistrySchemaVersion) {
    parse_failure("unsupported schema_version " + version->dump() + " (expected " +
                  std::to_string(kRegistrySchemaVersion) + ")");
  }
  const auto list = doc.find("experts");
  if (list == doc.end() || !list->is_array()) parse_failure("'experts' must be an array");

  std::vector<ExpertDescriptor> experts;
  std::set<std::string, std::less<>> seen;
  for (const auto& entry : *list) {
    ExpertDescriptor d;
    try {
      d = descriptor_from_json(entry);
    } catch (const Error& e) {
      parse_failure(e.what());
    }
    if (!seen.insert(d.id).second) parse_failure("duplicate id '" + d.id + "'");
    experts.push_back(std::move(d));
  }
  return sorted_by_id(std::move(experts));
}

std::shared_ptr<const DescriptionIndex> build_index(const std::vector<ExpertDescriptor>& experts,
                                                    const EmbeddingProvider& provider) {
  auto index = std::make_shared<DescriptionIndex>();
  index->provider_fingerprint = provider.fingerprint();
  for (const auto& e : experts) {
    try {
      index->entries.emplace(e.id, embed_text(e.description, provider));
    } catch (const Error& err) {
      throw Error(ErrorCode::EmbeddingFailure,
                  "cannot embed description of '" + e.id + "': " + err.what());
    }
  }
  return index;
}

RegistrySnapshot load_registry(const std::filesystem::path& path,
                               std::shared_ptr<const EmbeddingProvider> provider) {
  RegistrySnapshot snap;
  snap.experts = read_registry_file(path);
  try {
    snap.index = build_index(snap.experts, *provider);
  } catch (const Error& e) {
    parse_failure(path.string() + ": " + e.what());
  }
  snap.provider = std::move(provider);
  snap.version = snap.experts.size();
  return snap;
}

Registry::Registry(std::shared_ptr<const EmbeddingProvider> provider,
                   std::optional<std::filesystem::path> persist_path)
    : persist_path_(std::move(persist_path)) {
  if (!provider) throw std::invalid_argument("Registry needs an embedding provider");
  if (persist_path_ && std::filesystem::exists(*persist_path_)) {
    current_ = std::make_shared<const RegistrySnapshot>(load_registry(*persist_path_, std::move(provider)));
    return;
  }
  auto snap = std::make_shared<RegistrySnapshot>();
  snap->index = build_index({}, *provider);
  snap->provider = std::move(provider);
  current_ = std::move(snap);
}

std::shared_ptr<const RegistrySnapshot> Registry::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return current_;
}

void Registry::publish(std::shared_ptr<const RegistrySnapshot> next) {
  std::lock_guard lock(snapshot_mutex_);
  current_ = std::move(next);
}

std::uint64_t Registry::register_expert(ExpertDescriptor descriptor) {
  validate_descriptor(descriptor);
  std::lock_guard writer(write_mutex_);
  const auto base = snapshot();
  if (base->find(descriptor.id)) {
    throw Error(ErrorCode::DuplicateId, "expert '" + descriptor.id + "' already registered");
  }
  SentenceEmbedding embedding = [&] {
    try {
      return embed_text(descriptor.description, *base->provider);
    } catch (const Error& e) {
      throw Error(ErrorCode::EmbeddingFailure,
                  "cannot embed description of '" + descriptor.id + "': " + e.what());
    }
  }();

  auto next = std::make_shared<RegistrySnapshot>(*base);
  auto index = std::make_shared<DescriptionIndex>(*base->index);
  index->entries.emplace(descriptor.id, std::move(embedding));
  next->index = std::move(index);
  next->experts.push_back(std::move(descriptor));
  next->experts = sorted_by_id(std::move(next->experts));
  next->version = base->version + 1;

  if (persist_path_) save_registry(next->experts, *persist_path_);
  const auto version = next->version;
  publish(std::move(next));
  return version;
}

std::uint64_t Registry::remove_expert(std::string_view id) {
  std::lock_guard writer(write_mutex_);
  const auto base = snapshot();
  if (!base->find(id)) throw Error(ErrorCode::UnknownExpert, "unknown expert '" + std::string(id) + "'");

  auto next = std::make_shared<RegistrySnapshot>(*base);
  std::erase_if(next->experts, [&](const ExpertDescriptor& e) { return e.id == id; });
  auto index = std::make_shared<DescriptionIndex>(*base->index);
  index->entries.erase(index->entries.find(id));
  next->index = std::move(index);
  next->version = base->version + 1;

  if (persist_path_) save_registry(next->experts, *persist_path_);
  const auto version = next->version;
  publish(std::move(next));
  return version;
}

std::vector<ExpertDescriptor> Registry::list_experts() const { return snapshot()->experts; }

std::shared_ptr<const DescriptionIndex> Registry::rebuild_index(
    std::shared_ptr<const EmbeddingProvider> provider) {
  if (!provider) throw std::invalid_argument("rebuild_index needs a provider");
  std::lock_guard writer(write_mutex_);
  const auto base = snapshot();
  auto index = build_index(base->experts, *provider);

  auto next = std::make_shared<RegistrySnapshot>(*base);
  next->index = index;
  next->provider = std::move(provider);
  next->version = base->version + 1;
  publish(std::move(next));
  return index;
}

void Registry::save(const std::filesystem::path& path) const { save_registry(snapshot()->experts, path); }

}  // namespace medagi
