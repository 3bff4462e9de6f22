#include "qadmit/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

namespace qadmit {

namespace {

// Same aperiodicity damping as the exact solver.
constexpr double kDamping = 0.99;

}  // namespace

LearnerKnowledge LearnerKnowledge::from_spec(const QueueingNetworkSpec& spec) {
  return {.capacity = spec.capacity,
          .rejection_cost = spec.rejection_cost,
          .holding_cost = spec.holding_cost,
          .uniformization = spec.uniformization};
}

int default_tau_mix(std::int64_t horizon, std::optional<double> rho) {
  if (horizon < 2) throw std::invalid_argument("horizon must be at least 2");
  const double log_t = std::log(static_cast<double>(horizon));
  double tau = 0.0;
  if (rho) {
    if (!(*rho > 0.0 && *rho < 1.0)) throw std::invalid_argument("rho must lie in (0, 1)");
    tau = 5.0 * log_t / std::log(1.0 / *rho);
  } else {
    tau = log_t * log_t;
  }
  // Guard against ceil(10.000000000000002) for exact-integer inputs.
  const double rounded = std::round(tau);
  const double result = std::abs(tau - rounded) < 1e-9 * std::max(1.0, tau) ? rounded : std::ceil(tau);
  return std::max(1, static_cast<int>(result));
}

ModuleCounts::ModuleCounts(int tau_mix, int capacity) : tau_(tau_mix), capacity_(capacity) {
  if (tau_mix < 1) throw std::invalid_argument("tau_mix must be >= 1");
  if (capacity < 0) throw std::invalid_argument("capacity must be >= 0");
  const auto cells = static_cast<std::size_t>(tau_mix) * static_cast<std::size_t>(capacity + 1) * kNumActions;
  n_.assign(cells, 0);
  v_.assign(cells, 0);
  n_trans_.assign(cells * 3, 0);
  v_trans_.assign(cells * 3, 0);
}

void ModuleCounts::record_transition(int c, int s, int a, int next, bool in_ramping) {
  const int offset = next - s;
  if (offset < -1 || offset > 1 || next < 0 || next > capacity_) {
    throw std::logic_error("transition " + std::to_string(s) + " -> " + std::to_string(next) +
                           " is not a birth-death move");
  }
  if (c < 0 || c >= tau_ || s < 0 || s > capacity_ || (a != kReject && a != kAdmit)) {
    throw std::out_of_range("module, state or action out of range");
  }
  if (in_ramping) return;
  const std::size_t i = idx(c, s, a);
  ++v_[i];
  ++v_trans_[i * 3 + static_cast<std::size_t>(offset + 1)];
}

void ModuleCounts::fold_episode() {
  for (std::size_t i = 0; i < n_.size(); ++i) {
    n_[i] += v_[i];
    v_[i] = 0;
  }
  for (std::size_t i = 0; i < n_trans_.size(); ++i) {
    n_trans_[i] += v_trans_[i];
    v_trans_[i] = 0;
  }
}

std::int64_t ModuleCounts::sum_totals() const { return std::accumulate(n_.begin(), n_.end(), std::int64_t{0}); }
std::int64_t ModuleCounts::sum_episode() const { return std::accumulate(v_.begin(), v_.end(), std::int64_t{0}); }

int best_module(const ModuleCounts& counts, int s, int a) {
  int best = 0;
  for (int c = 1; c < counts.tau_mix(); ++c) {
    if (counts.total(c, s, a) > counts.total(best, s, a)) best = c;
  }
  return best;
}

EmpiricalEstimate empirical_estimates(const ModuleCounts& counts, int s, int a, int module,
                                      const LearnerKnowledge& knowledge) {
  EmpiricalEstimate est;
  est.visits = counts.total(module, s, a);
  if (est.visits > 0) {
    const auto denom = static_cast<double>(est.visits);
    for (int k = 0; k < 3; ++k) {
      est.p[static_cast<std::size_t>(k)] = static_cast<double>(counts.total_transitions(module, s, a, k - 1)) / denom;
    }
  }
  est.reward = est.p[2] * knowledge.rejection_cost +
               knowledge.holding_cost * (knowledge.capacity - s) / knowledge.uniformization;
  return est;
}

ConfidenceRadii confidence_radii(std::int64_t t_k, std::int64_t visits, double delta_max, int n_actions) {
  if (t_k < 1) throw std::invalid_argument("t_k must be >= 1");
  const double log_term = std::log(2.0 * n_actions * static_cast<double>(t_k));
  const double n = std::max<double>(1.0, static_cast<double>(visits));
  ConfidenceRadii r;
  r.reward = delta_max * std::sqrt(2.0 * log_term / n);
  r.transition = std::min(2.0, std::sqrt(8.0 * log_term / n));
  return r;
}

ConfidenceRegion build_confidence_region(const ModuleCounts& counts, std::int64_t t_k,
                                         const LearnerKnowledge& knowledge) {
  ConfidenceRegion region;
  region.capacity = knowledge.capacity;
  region.reward_bound = knowledge.reward_bound();
  region.entries.resize(static_cast<std::size_t>(knowledge.capacity) + 1);
  for (int s = 0; s <= knowledge.capacity; ++s) {
    for (int a : {kReject, kAdmit}) {
      RegionEntry& e = region.at(s, a);
      e.admissible = a == kReject || s < knowledge.capacity;
      if (!e.admissible) continue;
      e.module = best_module(counts, s, a);
      e.estimate = empirical_estimates(counts, s, a, e.module, knowledge);
      e.radii = confidence_radii(t_k, e.estimate.visits, knowledge.delta_max());
    }
  }
  return region;
}

ConfidenceRegion exact_region(const AggregatedMdp& mdp) {
  ConfidenceRegion region;
  region.capacity = mdp.capacity();
  region.reward_bound = mdp.r_max();
  region.entries.resize(static_cast<std::size_t>(mdp.n_states()));
  for (int s = 0; s <= mdp.capacity(); ++s) {
    for (int a : {kReject, kAdmit}) {
      RegionEntry& e = region.at(s, a);
      e.admissible = mdp.admissible(s, a);
      if (!e.admissible) continue;
      e.estimate.p = mdp.transition(s, a);
      e.estimate.reward = mdp.reward(s, a);
    }
  }
  return region;
}

bool region_contains(const ConfidenceRegion& region, const AggregatedMdp& mdp, double slack) {
  if (region.capacity != mdp.capacity()) return false;
  for (int s = 0; s <= mdp.capacity(); ++s) {
    for (int a : {kReject, kAdmit}) {
      const RegionEntry& e = region.at(s, a);
      if (!e.admissible) continue;
      if (std::abs(mdp.reward(s, a) - e.estimate.reward) > e.radii.reward + slack) return false;
      const LocalDistribution truth = mdp.transition(s, a);
      double l1 = 0.0;
      for (std::size_t k = 0; k < 3; ++k) l1 += std::abs(truth[k] - e.estimate.p[k]);
      if (l1 > e.radii.transition + slack) return false;
    }
  }
  return true;
}

LocalDistribution optimistic_transition(const LocalDistribution& p_hat, double radius, const LocalDistribution& values,
                                        const std::array<bool, 3>& support) {
  std::array<std::size_t, 3> order{};
  std::size_t m = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    if (support[k]) order[m++] = k;
  }
  if (m == 0) throw std::invalid_argument("empty support");
  // Descending value; ties keep the lower offset first.
  std::stable_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m),
                   [&](std::size_t x, std::size_t y) { return values[x] > values[y]; });
  LocalDistribution p{0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < 3; ++k) p[k] = support[k] ? p_hat[k] : 0.0;
  const std::size_t best = order[0];
  p[best] = std::min(1.0, p[best] + radius / 2.0);
  double total = p[0] + p[1] + p[2];
  for (std::size_t i = m; i-- > 1 && total > 1.0;) {
    const std::size_t worst = order[i];
    const double take = std::min(p[worst], total - 1.0);
    p[worst] -= take;
    total -= take;
  }
  if (total < 1.0) p[best] += 1.0 - total;  // support lost mass outside the clipped range
  return p;
}

EviResult extended_value_iteration(const ConfidenceRegion& region, double epsilon, long max_iterations) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  const int cap = region.capacity;
  const auto n = static_cast<std::size_t>(cap) + 1;
  Vector u(n, 0.0);
  Vector bu(n, 0.0);
  Vector diff(n, 0.0);
  std::vector<int> greedy(n, kReject);
  std::vector<LocalDistribution> kernel(n);

  // Optimistic rewards do not depend on u.
  std::vector<std::array<double, kNumActions>> reward(n);
  for (int s = 0; s <= cap; ++s) {
    for (int a : {kReject, kAdmit}) {
      const RegionEntry& e = region.at(s, a);
      if (!e.admissible) continue;
      reward[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] =
          std::clamp(e.estimate.reward + e.radii.reward, 0.0, region.reward_bound);
    }
  }

  EviResult out;
  for (long it = 1;; ++it) {
    for (int s = 0; s <= cap; ++s) {
      const auto si = static_cast<std::size_t>(s);
      const std::array<bool, 3> support{s > 0, true, s < cap};
      const LocalDistribution values{s > 0 ? u[si - 1] : 0.0, u[si], s < cap ? u[si + 1] : 0.0};
      double best = -std::numeric_limits<double>::infinity();
      for (int a : {kReject, kAdmit}) {
        const RegionEntry& e = region.at(s, a);
        if (!e.admissible) continue;
        const LocalDistribution p = optimistic_transition(e.estimate.p, e.radii.transition, values, support);
        const double v = reward[si][static_cast<std::size_t>(a)] + p[0] * values[0] + p[1] * values[1] + p[2] * values[2];
        if (v > best) {
          best = v;
          greedy[si] = a;
          kernel[si] = p;
        }
      }
      bu[si] = best;
      diff[si] = bu[si] - u[si];
    }
    const auto [lo, hi] = std::minmax_element(diff.begin(), diff.end());
    out.span = *hi - *lo;
    out.iterations = it;
    if (out.span < epsilon) {
      out.gain = 0.5 * (*hi + *lo);
      break;
    }
    if (it >= max_iterations) {
      throw std::runtime_error("extended value iteration hit the iteration cap with span " + std::to_string(out.span));
    }
    const double ref = bu[0];
    for (std::size_t s = 0; s < n; ++s) u[s] = (1.0 - kDamping) * u[s] + kDamping * (bu[s] - ref);
  }
  out.policy = Policy(greedy);
  out.values = std::move(u);
  out.kernel = std::move(kernel);
  return out;
}

double episode_count_bound(int capacity, int tau_mix, std::int64_t horizon, int n_actions) {
  const double scale = static_cast<double>(capacity + 1) * n_actions * tau_mix;
  return scale * std::log2(8.0 * static_cast<double>(horizon) / scale);
}

RunRecord run_ucrlm(ObservableEnvironment& env, const LearnerKnowledge& knowledge, double optimal_gain,
                    const LearnerOptions& options, const std::function<double(int, int)>& expected_reward) {
  const int tau = options.tau_mix;
  const std::int64_t horizon = options.horizon;
  if (tau < 1) throw std::invalid_argument("tau_mix must be >= 1");
  if (horizon < tau + 1) throw std::invalid_argument("horizon must exceed tau_mix");
  const std::int64_t stride = options.stride > 0 ? options.stride : std::max<std::int64_t>(1, horizon / 1000);
  const bool track_expected = options.record_expected_rewards && expected_reward;

  RunRecord rec;
  rec.tau_mix = tau;
  rec.horizon = horizon;
  rec.optimal_gain = optimal_gain;

  ModuleCounts counts(tau, knowledge.capacity);
  const std::int64_t quarter_start = horizon - horizon / 4;
  std::map<int, std::int64_t> late_thresholds;
  double cum_reward = 0.0;
  double cum_expected = 0.0;
  std::int64_t t = 0;
  int current_threshold = 0;

  auto take_step = [&](const Policy& policy, bool ramping) {
    const int s = env.observe();
    const int a = policy(s);
    const int c = assign_module(t, tau);
    const Observation obs = env.step(a);
    counts.record_transition(c, s, a, obs.state, ramping);
    if (ramping) ++rec.ramping_steps;
    cum_reward += obs.reward;
    if (track_expected) cum_expected += expected_reward(s, a);
    if (t >= quarter_start) ++late_thresholds[current_threshold];
    if (options.on_step) {
      options.on_step({.t = t, .state = s, .action = a, .next_state = obs.state, .module = c, .ramping = ramping,
                       .counts = &counts, .ramping_steps = rec.ramping_steps});
    }
    ++t;
    if (t % stride == 0 || t == horizon) {
      rec.t.push_back(t);
      rec.cumulative_reward.push_back(cum_reward);
      rec.regret.push_back(optimal_gain * static_cast<double>(t) - cum_reward);
      if (track_expected) rec.expected_regret.push_back(optimal_gain * static_cast<double>(t) - cum_expected);
      rec.threshold.push_back(current_threshold);
    }
    return std::array<int, 3>{s, a, c};
  };

  for (int k = 0; t < horizon; ++k) {
    EpisodeRecord ep;
    ep.index = k;
    ep.start = t;
    const std::int64_t t_k = std::max<std::int64_t>(1, t);
    ep.epsilon = knowledge.delta_max() / std::sqrt(static_cast<double>(t_k));
    const ConfidenceRegion region = build_confidence_region(counts, t_k, knowledge);
    const EviResult evi = extended_value_iteration(region, ep.epsilon);
    ep.optimistic_gain = evi.gain;
    ep.evi_iterations = evi.iterations;
    ep.threshold = evi.policy.first_reject();
    ep.threshold_shaped = evi.policy.as_threshold().has_value();
    current_threshold = ep.threshold;
    if (options.on_episode_start) {
      options.on_episode_start({.index = k, .start = t, .epsilon = ep.epsilon, .region = &region, .evi = &evi});
    }

    for (int i = 0; i < tau && t < horizon; ++i) take_step(evi.policy, /*ramping=*/true);

    while (t < horizon) {
      const auto [s, a, c] = take_step(evi.policy, /*ramping=*/false);
      const std::int64_t before = counts.total(c, s, a);
      const std::int64_t now = counts.episode(c, s, a);
      if (now >= std::max<std::int64_t>(1, before)) {
        ep.stopped_by_rule = true;
        ep.stop_state = s;
        ep.stop_module = c;
        ep.stop_action = a;
        ep.stop_total_before = before;
        ep.stop_episode_count = now;
        break;
      }
    }
    ep.end = t;
    if (options.on_episode_end) options.on_episode_end(ep, counts);
    counts.fold_episode();
    rec.episodes.push_back(ep);
  }

  rec.total_regret = optimal_gain * static_cast<double>(horizon) - cum_reward;
  std::int64_t best_count = -1;
  for (const auto& [thr, count] : late_thresholds) {
    if (count > best_count) {
      best_count = count;
      rec.modal_threshold_last_quarter = thr;
    }
  }
  return rec;
}

RunRecord run_ucrlm(const QueueingNetworkSpec& spec, std::int64_t horizon, int tau_mix, std::uint64_t seed,
                    LearnerOptions options) {
  const AggregatedMdp mdp = build_aggregated_mdp(spec, equivalent_queue(spec));
  const ThresholdOptimum opt = optimal_threshold(mdp);
  options.tau_mix = tau_mix;
  options.horizon = horizon;
  NetworkEnvironment env(NetworkSimulator(spec, seed));
  auto expected = [&mdp](int s, int a) { return mdp.reward(s, mdp.admissible(s, a) ? a : kReject); };
  RunRecord rec = run_ucrlm(env, LearnerKnowledge::from_spec(spec), opt.gain, options, expected);
  rec.seed = seed;
  rec.optimal_threshold = opt.threshold;
  return rec;
}

}  // namespace qadmit
