#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "qadmit/mdp.hpp"
#include "qadmit/network.hpp"
#include "qadmit/policy.hpp"
#include "qadmit/simulator.hpp"

namespace qadmit {

inline constexpr int kNumActions = 2;

/// Transition offsets s' - s in {-1, 0, +1} are stored at indices 0, 1, 2.
using LocalDistribution = std::array<double, 3>;

/// Problem constants the learner is allowed to know: the state space, the
/// cost parameters and the uniformization constant. The arrival rate and the
/// network itself stay hidden.
struct LearnerKnowledge {
  int capacity = 0;
  double rejection_cost = 0.0;
  double holding_cost = 0.0;
  double uniformization = 1.0;

  static LearnerKnowledge from_spec(const QueueingNetworkSpec& spec);

  [[nodiscard]] double delta_max() const { return rejection_cost + holding_cost / uniformization; }
  /// Reward upper bound obtained with lambda <= U.
  [[nodiscard]] double reward_bound() const { return rejection_cost + holding_cost * capacity / uniformization; }
};

/// ceil(5 ln T / ln(1/rho)) when rho is given, otherwise the oblivious
/// ceil(ln(T)^2). Always at least 1.
int default_tau_mix(std::int64_t horizon, std::optional<double> rho = std::nullopt);

[[nodiscard]] constexpr int assign_module(std::int64_t t, int tau_mix) { return static_cast<int>(t % tau_mix); }

/// Visit and transition counts per module, split into the totals N folded at
/// episode boundaries and the in-episode counts V.
class ModuleCounts {
 public:
  ModuleCounts(int tau_mix, int capacity);

  [[nodiscard]] int tau_mix() const { return tau_; }
  [[nodiscard]] int capacity() const { return capacity_; }

  [[nodiscard]] std::int64_t total(int c, int s, int a) const { return n_[idx(c, s, a)]; }
  [[nodiscard]] std::int64_t total_transitions(int c, int s, int a, int offset) const {
    return n_trans_[idx(c, s, a) * 3 + static_cast<std::size_t>(offset + 1)];
  }
  [[nodiscard]] std::int64_t episode(int c, int s, int a) const { return v_[idx(c, s, a)]; }

  /// Counts one observed transition. Ramping steps are ignored. Throws
  /// std::logic_error when s' is not a birth-death neighbour of s.
  void record_transition(int c, int s, int a, int next, bool in_ramping);
  /// N += V, V = 0.
  void fold_episode();

  [[nodiscard]] std::int64_t sum_totals() const;
  [[nodiscard]] std::int64_t sum_episode() const;

 private:
  [[nodiscard]] std::size_t idx(int c, int s, int a) const {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(capacity_ + 1) + static_cast<std::size_t>(s)) *
               kNumActions +
           static_cast<std::size_t>(a);
  }

  int tau_;
  int capacity_;
  std::vector<std::int64_t> n_;
  std::vector<std::int64_t> n_trans_;
  std::vector<std::int64_t> v_;
  std::vector<std::int64_t> v_trans_;
};

/// Module with the most folded visits of (s, a); ties go to the smallest id.
int best_module(const ModuleCounts& counts, int s, int a);

struct EmpiricalEstimate {
  LocalDistribution p{0.0, 1.0, 0.0};
  double reward = 0.0;
  std::int64_t visits = 0;
};

/// p_hat = counts / max(1, N), with a self-loop point mass when N = 0, and
/// r_hat = p_hat(s+1) R_c + h (S - s) / U.
EmpiricalEstimate empirical_estimates(const ModuleCounts& counts, int s, int a, int module,
                                      const LearnerKnowledge& knowledge);

struct ConfidenceRadii {
  double reward = 0.0;
  double transition = 0.0;  // L1, capped at 2
};

/// reward: delta_max sqrt(2 ln(2 A t_k) / max(1, N))
/// transition: min(2, sqrt(8 ln(2 A t_k) / max(1, N)))
ConfidenceRadii confidence_radii(std::int64_t t_k, std::int64_t visits, double delta_max, int n_actions = kNumActions);

struct RegionEntry {
  bool admissible = false;
  int module = 0;
  EmpiricalEstimate estimate;
  ConfidenceRadii radii;
};

/// Plausible rewards and birth-death kernels for every (s, a).
struct ConfidenceRegion {
  int capacity = 0;
  double reward_bound = 0.0;
  std::vector<std::array<RegionEntry, kNumActions>> entries;  // indexed by s

  [[nodiscard]] const RegionEntry& at(int s, int a) const { return entries[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]; }
  [[nodiscard]] RegionEntry& at(int s, int a) { return entries[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]; }
};

ConfidenceRegion build_confidence_region(const ModuleCounts& counts, std::int64_t t_k, const LearnerKnowledge& knowledge);

/// Region with zero radii around exact kernels and rewards; EVI on it is plain
/// value iteration on `mdp`.
ConfidenceRegion exact_region(const AggregatedMdp& mdp);

/// True when every admissible (s, a) of `mdp` lies inside the region.
bool region_contains(const ConfidenceRegion& region, const AggregatedMdp& mdp, double slack = 1e-12);

/// Inner maximization of EVI over the L1 ball of `radius` around `p_hat`
/// restricted to the neighbours with `support[k]` set: moves radius/2 onto
/// the best-valued neighbour (capped at 1) and takes the excess from the
/// worst-valued ones first.
LocalDistribution optimistic_transition(const LocalDistribution& p_hat, double radius, const LocalDistribution& values,
                                        const std::array<bool, 3>& support);

struct EviResult {
  Policy policy;
  double gain = 0.0;
  Vector values;
  std::vector<LocalDistribution> kernel;  // optimistic kernel of the greedy action
  long iterations = 0;
  double span = 0.0;
};

/// Extended value iteration, stopped when sp(u_{i+1} - u_i) < epsilon on the
/// undamped operator.
EviResult extended_value_iteration(const ConfidenceRegion& region, double epsilon, long max_iterations = 1'000'000);

struct EpisodeRecord {
  int index = 0;
  std::int64_t start = 0;
  std::int64_t end = 0;  // first step of the next episode
  int threshold = 0;     // leading admitting states of the policy
  bool threshold_shaped = true;
  double optimistic_gain = 0.0;
  double epsilon = 0.0;
  long evi_iterations = 0;
  // The (state, module, action) whose in-episode count hit the stopping rule.
  bool stopped_by_rule = false;
  int stop_state = -1;
  int stop_module = -1;
  int stop_action = -1;
  std::int64_t stop_total_before = 0;
  std::int64_t stop_episode_count = 0;
};

struct RunRecord {
  std::uint64_t seed = 0;
  int tau_mix = 1;
  std::int64_t horizon = 0;
  double optimal_gain = 0.0;
  int optimal_threshold = 0;

  std::vector<std::int64_t> t;  // stored time points (steps completed)
  std::vector<double> cumulative_reward;
  std::vector<double> regret;
  std::vector<double> expected_regret;  // filled when requested
  std::vector<int> threshold;            // threshold in use at step t-1

  std::vector<EpisodeRecord> episodes;
  std::int64_t ramping_steps = 0;

  double total_regret = 0.0;
  int modal_threshold_last_quarter = 0;
};

struct StepInfo {
  std::int64_t t = 0;
  int state = 0;
  int action = 0;
  int next_state = 0;
  int module = 0;
  bool ramping = false;
  const ModuleCounts* counts = nullptr;
  std::int64_t ramping_steps = 0;
};

struct EpisodeStartInfo {
  int index = 0;
  std::int64_t start = 0;
  double epsilon = 0.0;
  const ConfidenceRegion* region = nullptr;
  const EviResult* evi = nullptr;
};

struct LearnerOptions {
  int tau_mix = 1;
  std::int64_t horizon = 0;
  std::int64_t stride = 0;  // 0 means horizon / 1000
  bool record_expected_rewards = false;
  bool episode_log = true;  // include per-episode rows in exported run files
  std::function<void(const StepInfo&)> on_step;
  std::function<void(const EpisodeStartInfo&)> on_episode_start;
  /// Called with the counts before V is folded into N.
  std::function<void(const EpisodeRecord&, const ModuleCounts&)> on_episode_end;
};

/// UCRL-M: episodes with optimistic policies from EVI over a module-wise
/// confidence region, a discarded ramping phase of tau_mix steps, and the
/// doubling stopping rule per (state, module).
///
/// `optimal_gain` is only used to compute regret; `expected_reward`, when
/// set, gives r(s, a) for the expected-reward regret series.
RunRecord run_ucrlm(ObservableEnvironment& env, const LearnerKnowledge& knowledge, double optimal_gain,
                    const LearnerOptions& options,
                    const std::function<double(int, int)>& expected_reward = nullptr);

/// Learner on the network simulator with g* from the exact solver.
RunRecord run_ucrlm(const QueueingNetworkSpec& spec, std::int64_t horizon, int tau_mix, std::uint64_t seed,
                    LearnerOptions options = {});

/// S' A tau log2(8T / (S' A tau)).
double episode_count_bound(int capacity, int tau_mix, std::int64_t horizon, int n_actions = kNumActions);

}  // namespace qadmit
