#pragma once

#include <array>
#include <optional>
#include <vector>

#include "qadmit/network.hpp"
#include "qadmit/policy.hpp"
#include "qadmit/productform.hpp"

namespace qadmit {

/// Uniformized birth-death admission MDP on s = 0..S obtained by replacing
/// the network with its Norton equivalent queue.
///
///   p(s+1 | s, 1) = lambda/U  for s < S
///   p(s-1 | s, a) = mu(s)/U
///   r(s, a)       = (lambda R_c a + h (S - s)) / U
///
/// Only the reject action is admissible at s = S.
class AggregatedMdp {
 public:
  struct Params {
    double arrival_rate = 0.0;
    double uniformization = 1.0;
    double rejection_cost = 0.0;
    double holding_cost = 0.0;
    Vector mu;  // mu(0..S), mu(0) = 0
  };

  explicit AggregatedMdp(Params params);

  [[nodiscard]] int capacity() const { return capacity_; }
  [[nodiscard]] int n_states() const { return capacity_ + 1; }
  [[nodiscard]] const Params& params() const { return params_; }
  [[nodiscard]] double mu(int s) const { return params_.mu[static_cast<std::size_t>(s)]; }

  [[nodiscard]] double birth_prob(int s, int a) const;
  [[nodiscard]] double death_prob(int s) const;
  /// {p(s-1), p(s), p(s+1)}; out-of-range neighbours carry zero mass.
  [[nodiscard]] std::array<double, 3> transition(int s, int a) const;
  [[nodiscard]] double reward(int s, int a) const;
  [[nodiscard]] bool admissible(int s, int a) const { return a == kReject || s < capacity_; }

  [[nodiscard]] double r_max() const;
  /// R_c + h/U, the bound on neighbouring reward differences used by the learner.
  [[nodiscard]] double delta_max() const;

  /// Dense transition matrix of the Markov chain induced by `policy`.
  [[nodiscard]] Matrix policy_matrix(const Policy& policy) const;

 private:
  Params params_;
  int capacity_;
};

AggregatedMdp build_aggregated_mdp(const QueueingNetworkSpec& spec, const EquivalentQueue& queue);

struct GainBias {
  double gain = 0.0;
  Vector bias;  // normalized so that bias(S) = 0
};

/// Stationary measure of "admit iff s < n": m(s) proportional to
/// prod_{i<=s} lambda/mu(i) on 0..n, zero above.
Vector threshold_stationary_measure(const AggregatedMdp& mdp, int n);
double threshold_gain(const AggregatedMdp& mdp, int n);

struct ThresholdOptimum {
  int threshold = 0;
  double gain = 0.0;
};

/// Best threshold by enumeration; ties go to the smaller threshold.
ThresholdOptimum optimal_threshold(const AggregatedMdp& mdp);

/// Gain and bias of a fixed policy from the Poisson equation
/// r - g = (I - P) h with h(S) = 0.
GainBias evaluate_policy(const AggregatedMdp& mdp, const Policy& policy);

struct RviResult {
  GainBias gain_bias;
  Policy policy;
  long iterations = 0;
  double span = 0.0;
};

/// Relative value iteration with span stopping sp(Bu - u) < tolerance, then
/// an exact Poisson solve for the greedy policy.
RviResult relative_value_iteration(const AggregatedMdp& mdp, double tolerance, long max_iterations = 1'000'000);

/// Expected number of steps to reach 0 from each state under `policy`.
/// Uses the birth-death difference recursion
///   E tau_s - E tau_{s-1} = U/mu(s) * (1 + (lambda a(s)/U) (E tau_{s+1} - E tau_s)),
/// unrolled downward from s = S.
Vector hitting_times(const AggregatedMdp& mdp, const Policy& policy);

/// Delta(s) = 2 delta_max / m_max(0) * sum_{i<=s} U/mu(i) for s = 1..S, where
/// m_max is the stationary measure of the accept-all policy. Index 0 is 0.
Vector bias_variation_bound(const AggregatedMdp& mdp);

struct MixingProfile {
  Vector distance;               // d(t), t = 0..horizon
  std::optional<long> mix_time;  // first t with d(t) <= 1/4
};

/// Total-variation distance to stationarity from `start` by exact matrix powers.
Vector tv_profile_from(const AggregatedMdp& mdp, const Policy& policy, int start, long horizon);
/// d(t) = max over start states of the TV distance to the stationary measure.
MixingProfile mixing_profile(const AggregatedMdp& mdp, const Policy& policy, long horizon);

/// max over s != s' of the min over threshold policies of the expected time
/// to reach s' from s.
double diameter_estimate(const AggregatedMdp& mdp);

}  // namespace qadmit
