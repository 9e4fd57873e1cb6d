#include "medagi/backbone.hpp"

#include "medagi/error.hpp"

#include <algorithm>

namespace medagi {

std::string_view to_string(ComponentKind kind) {
  return kind == ComponentKind::Backbone ? "backbone" : "adapter";
}

ComponentKind component_kind_from_string(std::string_view text) {
  if (text == "backbone") return ComponentKind::Backbone;
  if (text == "adapter") return ComponentKind::Adapter;
  throw Error(ErrorCode::InvalidConfig, "unknown component kind '" + std::string(text) + "'");
}

ResourceLedger::ResourceLedger(std::uint64_t budget_bytes) : budget_bytes_(budget_bytes) {
  if (budget_bytes == 0) throw Error(ErrorCode::InvalidConfig, "budget_bytes must be positive");
  counters_.budget_bytes = budget_bytes;
}

void ResourceLedger::declare_component(ComponentSpec spec) {
  if (spec.size_bytes == 0) {
    throw Error(ErrorCode::InvalidConfig, "component '" + spec.name + "' has size 0");
  }
  std::lock_guard lock(mutex_);
  if (declared_.contains(spec.name)) {
    throw Error(ErrorCode::DuplicateComponent, "component '" + spec.name + "' already declared");
  }
  declaration_order_.push_back(spec.name);
  auto name = spec.name;
  declared_.emplace(std::move(name), std::move(spec));
}

bool ResourceLedger::is_declared(std::string_view name) const {
  std::lock_guard lock(mutex_);
  return declared_.find(name) != declared_.end();
}

std::optional<ComponentKind> ResourceLedger::kind_of(std::string_view name) const {
  std::lock_guard lock(mutex_);
  const auto it = declared_.find(name);
  if (it == declared_.end()) return std::nullopt;
  return it->second.kind;
}

void ResourceLedger::bind_expert(std::string expert_id, std::string adapter) {
  std::lock_guard lock(mutex_);
  const auto it = declared_.find(adapter);
  if (it == declared_.end() || it->second.kind != ComponentKind::Adapter) {
    throw Error(ErrorCode::UnknownAdapter, "no adapter named '" + adapter + "'");
  }
  bindings_[std::move(expert_id)] = std::move(adapter);
}

void ResourceLedger::unbind_expert(std::string_view expert_id) {
  std::lock_guard lock(mutex_);
  if (const auto it = bindings_.find(expert_id); it != bindings_.end()) bindings_.erase(it);
}

void ResourceLedger::emit_locked(LedgerEvent::Kind kind, const std::string& name, std::uint64_t refcount) {
  if (observer_) observer_(LedgerEvent{kind, name, refcount, resident_bytes_});
}

void ResourceLedger::load_locked(const ComponentSpec& spec, std::uint64_t initial_refcount) {
  resident_[spec.name] = Residency{initial_refcount, clock_};
  resident_bytes_ += spec.size_bytes;
  ++counters_.load_counts[spec.name];
  counters_.simulated_load_ms += spec.load_cost_ms;
  emit_locked(LedgerEvent::Kind::Load, spec.name, initial_refcount);
}

AdapterLease ResourceLedger::acquire(std::string_view expert_id) {
  std::lock_guard lock(mutex_);
  const auto binding = bindings_.find(expert_id);
  if (binding == bindings_.end()) {
    throw Error(ErrorCode::UnknownAdapter, "no adapter bound to expert '" + std::string(expert_id) + "'");
  }
  const ComponentSpec& adapter = declared_.at(binding->second);

  std::vector<const ComponentSpec*> to_load;
  std::uint64_t needed = 0;
  for (const auto& name : declaration_order_) {
    const auto& spec = declared_.at(name);
    if (spec.kind == ComponentKind::Backbone && !resident_.contains(name)) {
      to_load.push_back(&spec);
      needed += spec.size_bytes;
    }
  }
  const bool adapter_warm = resident_.contains(adapter.name);
  if (!adapter_warm) {
    to_load.push_back(&adapter);
    needed += adapter.size_bytes;
  }

  std::vector<std::pair<std::uint64_t, std::string>> idle;  // (last_release, name)
  std::uint64_t reclaimable = 0;
  for (const auto& [name, residency] : resident_) {
    const auto& spec = declared_.at(name);
    if (spec.kind == ComponentKind::Adapter && residency.refcount == 0 && name != adapter.name) {
      idle.emplace_back(residency.last_release, name);
      reclaimable += spec.size_bytes;
    }
  }
  const std::uint64_t free_bytes = budget_bytes_ - resident_bytes_;
  if (needed > free_bytes + reclaimable) {
    throw Error(ErrorCode::BudgetExhausted,
                "cannot fit " + std::to_string(needed) + " bytes for '" + adapter.name + "' within budget " +
                    std::to_string(budget_bytes_) + " (" + std::to_string(free_bytes) + " free, " +
                    std::to_string(reclaimable) + " reclaimable)");
  }

  std::sort(idle.begin(), idle.end());
  for (const auto& [stamp, name] : idle) {
    if (needed <= budget_bytes_ - resident_bytes_) break;
    resident_bytes_ -= declared_.at(name).size_bytes;
    resident_.erase(resident_.find(name));
    ++counters_.evictions;
    emit_locked(LedgerEvent::Kind::Evict, name, 0);
  }

  for (const ComponentSpec* spec : to_load) {
    // Backbone components hold a permanent reference.
    load_locked(*spec, spec->kind == ComponentKind::Backbone ? 1 : 0);
  }
  ++resident_.at(adapter.name).refcount;
  ++counters_.total_acquires;

  AdapterLease lease{next_lease_++, std::string(expert_id), adapter.name};
  outstanding_.emplace(lease.id, lease.adapter);
  return lease;
}

void ResourceLedger::release(const AdapterLease& lease) {
  std::lock_guard lock(mutex_);
  const auto it = outstanding_.find(lease.id);
  if (it == outstanding_.end()) {
    throw Error(ErrorCode::DoubleRelease, "lease " + std::to_string(lease.id) + " is not outstanding");
  }
  auto& residency = resident_.at(it->second);
  --residency.refcount;
  residency.last_release = ++clock_;
  outstanding_.erase(it);
  ++counters_.total_releases;
}

SavingsReport ResourceLedger::savings_report(std::size_t n_experts) const {
  std::lock_guard lock(mutex_);
  if (n_experts == 0) throw Error(ErrorCode::NoComponents, "savings report needs at least one expert");
  std::uint64_t backbone = 0;
  std::vector<std::uint64_t> adapters;
  for (const auto& name : declaration_order_) {
    const auto& spec = declared_.at(name);
    if (spec.kind == ComponentKind::Backbone) {
      backbone += spec.size_bytes;
    } else {
      adapters.push_back(spec.size_bytes);
    }
  }
  if (backbone == 0) throw Error(ErrorCode::NoComponents, "no backbone components declared");
  if (adapters.size() < n_experts) {
    throw Error(ErrorCode::NoComponents, "only " + std::to_string(adapters.size()) + " adapters declared for " +
                                             std::to_string(n_experts) + " experts");
  }

  SavingsReport report;
  report.n_experts = n_experts;
  report.unified_bytes = backbone;
  for (std::size_t j = 0; j < n_experts; ++j) {
    report.unified_bytes += adapters[j];
    report.naive_bytes += backbone + adapters[j];
  }
  report.ratio = static_cast<double>(report.naive_bytes) / static_cast<double>(report.unified_bytes);
  return report;
}

LedgerStats ResourceLedger::stats() const {
  std::lock_guard lock(mutex_);
  LedgerStats s = counters_;
  s.resident_bytes = resident_bytes_;
  s.outstanding_leases = outstanding_.size();
  return s;
}

std::vector<std::string> ResourceLedger::resident() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> names;
  for (const auto& entry : resident_) names.push_back(entry.first);
  return names;
}

std::uint64_t ResourceLedger::refcount(std::string_view name) const {
  std::lock_guard lock(mutex_);
  const auto it = resident_.find(name);
  return it == resident_.end() ? 0 : it->second.refcount;
}

bool ResourceLedger::is_resident(std::string_view name) const {
  std::lock_guard lock(mutex_);
  return resident_.find(name) != resident_.end();
}

void ResourceLedger::set_observer(std::function<void(const LedgerEvent&)> observer) {
  std::lock_guard lock(mutex_);
  observer_ = std::move(observer);
}

}  // namespace medagi
