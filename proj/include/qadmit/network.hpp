#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace qadmit {

using Vector = std::vector<double>;
using Matrix = std::vector<std::vector<double>>;

/// Open Jackson network with a global capacity, plus the costs of the
/// admission-control problem.
///
/// Index 0 of `routing` is the outside world: row 0 splits external arrivals
/// over the queues, column 0 collects departures. Queues are 1..N.
struct QueueingNetworkSpec {
  int n_queues = 0;
  Vector service_rates;  // size N, queue i at index i-1
  Matrix routing;        // (N+1) x (N+1)
  double arrival_rate = 0.0;
  int capacity = 0;
  double rejection_cost = 0.0;
  double holding_cost = 0.0;
  double uniformization = 0.0;

  [[nodiscard]] double total_service_rate() const;
  /// Smallest admissible uniformization constant, lambda + sum of mu.
  [[nodiscard]] double min_uniformization() const;
  [[nodiscard]] double mu(int queue) const { return service_rates.at(static_cast<std::size_t>(queue - 1)); }
};

struct SpecIssue {
  std::string message;
};

struct SpecReport {
  std::vector<SpecIssue> violations;
  std::vector<SpecIssue> warnings;

  [[nodiscard]] bool valid() const { return violations.empty(); }
};

/// Thrown when the routing restricted to the queues has a closed class, so
/// the flow equations have no unique solution.
class SingularRoutingError : public std::runtime_error {
 public:
  SingularRoutingError(int queue, const std::string& what)
      : std::runtime_error(what), queue_(queue) {}
  [[nodiscard]] int queue() const noexcept { return queue_; }

 private:
  int queue_;
};

/// Every violated invariant of `spec`. Violations are data, never thrown.
/// Queues unreachable from the outside and unstable queues (arrival rate not
/// below service rate) are reported as warnings only.
std::vector<SpecIssue> validate_spec(const QueueingNetworkSpec& spec);
SpecReport check_spec(const QueueingNetworkSpec& spec);

/// Per-queue arrival rates lambda_i = lambda L_{0i} + sum_j lambda_j L_{ji}.
Vector solve_traffic_equations(const QueueingNetworkSpec& spec);

/// Visit ratios relative to the outside queue, v[0] = 1, size N+1.
Vector solve_visit_ratios(const QueueingNetworkSpec& spec);

struct MultiTierParams {
  int queues_per_tier = 1;
  double bypass_prob = 0.2;
  double arrival_rate = 0.99;
  int capacity = 0;
  double service_rate = 1.0;
  double rejection_cost = 10.0;
  double holding_cost = 0.0;
  /// Zero means lambda + 3 n mu.
  double uniformization = 0.0;

  /// Scaling rules of the reference experiment: S = round(10n/3),
  /// lambda = 0.99, mu = 1/n, R_c = 10, h = 4/(3n), U = lambda + 3 n mu, p = 0.2.
  static MultiTierParams preset(int n);
};

/// Three tiers of n queues each. Arrivals split uniformly over tier 1; a
/// tier-1 job moves to a uniformly chosen tier-2 queue with probability p and
/// leaves otherwise; tier 2 feeds tier 3 uniformly; tier 3 leaves.
QueueingNetworkSpec build_multi_tier(const MultiTierParams& params);

QueueingNetworkSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const QueueingNetworkSpec& spec);
QueueingNetworkSpec load_spec(const std::string& path);

}  // namespace qadmit
