#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace medagi {

enum class ComponentKind { Backbone, Adapter };

std::string_view to_string(ComponentKind kind);
/// "backbone" or "adapter"; throws Error(InvalidConfig) otherwise.
ComponentKind component_kind_from_string(std::string_view text);

struct ComponentSpec {
  std::string name;
  ComponentKind kind = ComponentKind::Adapter;
  std::uint64_t size_bytes = 0;
  std::uint64_t load_cost_ms = 0;  // simulated, only accumulated
};

/// Proof that an adapter is in use. Copyable so it can cross threads; the
/// ledger rejects a second release of the same id.
struct AdapterLease {
  std::uint64_t id = 0;
  std::string expert_id;
  std::string adapter;
};

struct SavingsReport {
  std::size_t n_experts = 0;
  std::uint64_t unified_bytes = 0;  // one backbone + every adapter
  std::uint64_t naive_bytes = 0;    // every expert ships its own backbone
  double ratio = 0.0;
};

struct LedgerEvent {
  enum class Kind { Load, Evict };
  Kind kind;
  std::string component;
  std::uint64_t refcount = 0;  // refcount of the component when the event fired
  std::uint64_t resident_bytes = 0;  // after the event
};

struct LedgerStats {
  std::uint64_t budget_bytes = 0;
  std::uint64_t resident_bytes = 0;
  std::uint64_t evictions = 0;
  std::uint64_t total_acquires = 0;
  std::uint64_t total_releases = 0;
  std::uint64_t outstanding_leases = 0;
  std::uint64_t simulated_load_ms = 0;
  std::map<std::string, std::uint64_t> load_counts;
};

/// Memory accounting for one shared backbone plus hot-swappable adapters.
/// Backbone components are pinned once loaded; idle adapters are evicted in
/// least-recently-released order when a new adapter needs room.
class ResourceLedger {
 public:
  explicit ResourceLedger(std::uint64_t budget_bytes);

  ResourceLedger(const ResourceLedger&) = delete;
  ResourceLedger& operator=(const ResourceLedger&) = delete;

  /// Throws Error(DuplicateComponent), or Error(InvalidConfig) for size 0.
  void declare_component(ComponentSpec spec);
  bool is_declared(std::string_view name) const;
  std::optional<ComponentKind> kind_of(std::string_view name) const;

  /// Routes acquire(expert_id) to a declared adapter component.
  /// Throws Error(UnknownAdapter) if `adapter` is not a declared adapter.
  void bind_expert(std::string expert_id, std::string adapter);
  void unbind_expert(std::string_view expert_id);

  /// Throws Error(UnknownAdapter) or Error(BudgetExhausted); on failure the
  /// ledger is unchanged.
  AdapterLease acquire(std::string_view expert_id);

  /// Throws Error(DoubleRelease) for a lease that is not outstanding.
  void release(const AdapterLease& lease);

  /// Adapters are taken in declaration order. Throws Error(NoComponents)
  /// when n_experts is 0, no backbone is declared, or fewer than n_experts
  /// adapters exist.
  SavingsReport savings_report(std::size_t n_experts) const;

  LedgerStats stats() const;
  std::vector<std::string> resident() const;
  std::uint64_t refcount(std::string_view name) const;
  bool is_resident(std::string_view name) const;

  /// Invoked synchronously, under the ledger lock, for every load/evict.
  void set_observer(std::function<void(const LedgerEvent&)> observer);

 private:
  struct Residency {
    std::uint64_t refcount = 0;
    std::uint64_t last_release = 0;
  };

  void load_locked(const ComponentSpec& spec, std::uint64_t initial_refcount);
  void emit_locked(LedgerEvent::Kind kind, const std::string& name, std::uint64_t refcount);

  mutable std::mutex mutex_;
  std::uint64_t budget_bytes_;
  std::map<std::string, ComponentSpec, std::less<>> declared_;
  std::vector<std::string> declaration_order_;
  std::map<std::string, std::string, std::less<>> bindings_;
  std::map<std::string, Residency, std::less<>> resident_;
  std::map<std::uint64_t, std::string> outstanding_;
  std::uint64_t resident_bytes_ = 0;
  std::uint64_t clock_ = 0;
  std::uint64_t next_lease_ = 1;
  LedgerStats counters_;
  std::function<void(const LedgerEvent&)> observer_;
};

}  // namespace medagi
