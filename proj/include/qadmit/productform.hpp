#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <vector>

#include "qadmit/network.hpp"
#include "qadmit/policy.hpp"

namespace qadmit {

/// Normalization constants G(0..S) of the network with the outside queue
/// short-circuited:
///   G(s) = sum over x in N^N, |x| = s, of prod_i (v_i / mu_i)^{x_i}.
///
/// Stored rescaled: G(s) = scaled[s] * exp(s * log_scale). The scale is picked
/// so that every per-queue factor is at most one, which keeps `scaled` within
/// [1, C(s+N-1, N-1)] and avoids under/overflow for large S.
struct NormalizingConstants {
  Vector scaled;
  double log_scale = 0.0;

  [[nodiscard]] int capacity() const { return static_cast<int>(scaled.size()) - 1; }
  [[nodiscard]] double log_g(int s) const;
  [[nodiscard]] double g(int s) const;
};

/// Norton flow-equivalent server: load-dependent rates mu(s) = G(s-1)/G(s),
/// mu(0) = 0. Increasing, concave and bounded by the total service rate.
struct EquivalentQueue {
  Vector mu;

  [[nodiscard]] int capacity() const { return static_cast<int>(mu.size()) - 1; }
  [[nodiscard]] double operator()(int s) const { return mu.at(static_cast<std::size_t>(s)); }
};

/// Buzen's convolution over queues 1..N.
NormalizingConstants convolution_constants(const QueueingNetworkSpec& spec);
EquivalentQueue norton_throughput(const NormalizingConstants& constants);
EquivalentQueue equivalent_queue(const QueueingNetworkSpec& spec);

/// All occupancy vectors x in N^N with |x| <= S, in lexicographic order of
/// (x_1, ..., x_N). Fixture indices depend on this order.
class StateSpace {
 public:
  StateSpace(int n_queues, int capacity);

  [[nodiscard]] std::size_t size() const { return states_.size(); }
  [[nodiscard]] const std::vector<int>& state(std::size_t index) const { return states_[index]; }
  [[nodiscard]] int total(std::size_t index) const { return totals_[index]; }
  [[nodiscard]] std::size_t index_of(const std::vector<int>& x) const;
  [[nodiscard]] int n_queues() const { return n_queues_; }
  [[nodiscard]] int capacity() const { return capacity_; }

  /// Number of states, computed without enumerating: C(S+N, N).
  static double count(int n_queues, int capacity);

 private:
  int n_queues_;
  int capacity_;
  std::vector<std::vector<int>> states_;
  std::vector<int> totals_;
  std::map<std::vector<int>, std::size_t> index_;
};

/// Probability distribution over a StateSpace.
struct FullMeasure {
  std::shared_ptr<const StateSpace> space;
  Vector prob;

  [[nodiscard]] double at(const std::vector<int>& x) const { return prob[space->index_of(x)]; }
};

inline constexpr std::size_t kDefaultStateLimit = 20000;

/// Closed-form product-form measure under the threshold policy "admit iff
/// |x| < threshold": proportional to prod_i (v_i / mu_i)^{x_i} (1/lambda)^{S-|x|}
/// on |x| <= threshold, zero above.
FullMeasure product_form_measure(const QueueingNetworkSpec& spec, int threshold,
                                 std::size_t state_limit = kDefaultStateLimit);

/// m(s) = sum over |x| = s of the full measure.
Vector aggregate_measure(const FullMeasure& full);

/// Transition of the uniformized closed chain.
struct SparseEntry {
  std::size_t to;
  double prob;
};

/// Rows of the uniformized closed-network chain under an observation-based
/// policy (self-loops included).
std::vector<std::vector<SparseEntry>> closed_chain_kernel(const QueueingNetworkSpec& spec, const StateSpace& space,
                                                          const Policy& policy);

/// Oracle: solves global balance of the uniformized closed chain directly
/// (sparse LU on P^T - I with a normalization row). Throws when the state
/// space exceeds `state_limit`.
FullMeasure brute_force_stationary(const QueueingNetworkSpec& spec, const Policy& policy,
                                   std::size_t state_limit = kDefaultStateLimit);

/// Rate of departures to the outside conditioned on |x| = s:
///   sum_{|x|=s} m(x)/m(s) * sum_i mu_i L_{i0} 1{x_i > 0}.
/// Entries with m(s) = 0 are reported as NaN.
Vector conditional_departure_rate(const QueueingNetworkSpec& spec, const FullMeasure& full);

/// Aggregated kernel P(s'|s) = sum_{|x|=s} sum_{|y|=s'} m(x)/m(s) P(y|x), as a
/// dense (S+1)x(S+1) row-major matrix. Rows with m(s) = 0 are NaN.
Matrix aggregated_kernel(const QueueingNetworkSpec& spec, const FullMeasure& full, const Policy& policy);

}  // namespace qadmit
