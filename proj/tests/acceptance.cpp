#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fixtures.hpp"
#include "qadmit/experiment.hpp"
#include "qadmit/learner.hpp"
#include "qadmit/mdp.hpp"
#include "qadmit/network.hpp"
#include "qadmit/productform.hpp"
#include "qadmit/simulator.hpp"

using namespace qadmit;
using qadmit::testing::hitting_times_by_solve;
using qadmit::testing::random_mdp;
using qadmit::testing::random_spec;
using qadmit::testing::tandem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

int worker_count() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

std::vector<QueueingNetworkSpec> norton_instances() {
  std::mt19937_64 rng(20240601);
  std::vector<QueueingNetworkSpec> out;
  for (int k = 0; k < 50; ++k) out.push_back(random_spec(rng, 4, 6));
  return out;
}

// 1. Norton rates equal the conditional departure throughput of the full chain.
Outcome norton_equivalence() {
  double worst = 0.0;
  for (const QueueingNetworkSpec& s : norton_instances()) {
    const EquivalentQueue q = equivalent_queue(s);
    const Vector rate = conditional_departure_rate(s, brute_force_stationary(s, Policy::accept_all(s.capacity)));
    for (int t = 1; t <= s.capacity; ++t) {
      const double err = std::abs(rate[static_cast<std::size_t>(t)] - q(t)) / q(t);
      worst = std::isnan(err) ? std::numeric_limits<double>::infinity() : std::max(worst, err);
    }
  }
  return {worst <= 1e-9, fmt("max rel error %.3g (tol 1e-9)", worst)};
}

// 2. Norton rates are increasing, concave and bounded by the total service rate.
Outcome norton_shape() {
  std::mt19937_64 rng(20240602);
  int bad = 0;
  for (int k = 0; k < 100; ++k) {
    const QueueingNetworkSpec s = random_spec(rng, 6, 12);
    const EquivalentQueue q = equivalent_queue(s);
    for (int t = 1; t <= s.capacity; ++t) {
      if (!(q(t) >= q(t - 1) - 1e-12)) ++bad;
      if (!(q(t) <= s.total_service_rate() + 1e-12)) ++bad;
      if (t >= 2 && !(q(t) - q(t - 1) <= q(t - 1) - q(t - 2) + 1e-12)) ++bad;
    }
  }
  return {bad == 0, std::to_string(bad) + " violations over 100 specs (slack 1e-12)"};
}

// 3. Aggregated brute-force measure and kernel equal the birth-death model.
Outcome aggregation_fidelity() {
  double measure_err = 0.0, kernel_err = 0.0;
  for (const QueueingNetworkSpec& s : norton_instances()) {
    const AggregatedMdp mdp = build_aggregated_mdp(s, equivalent_queue(s));
    for (int n = 0; n <= s.capacity; ++n) {
      const Policy pol = Policy::threshold(s.capacity, n);
      const FullMeasure full = brute_force_stationary(s, pol);
      const Vector agg = aggregate_measure(full);
      const Vector model = threshold_stationary_measure(mdp, n);
      for (std::size_t i = 0; i < agg.size(); ++i) measure_err = std::max(measure_err, std::abs(agg[i] - model[i]));
      const Matrix kern = aggregated_kernel(s, full, pol);
      const Matrix exact = mdp.policy_matrix(pol);
      for (std::size_t i = 0; i < kern.size(); ++i) {
        if (std::isnan(kern[i][0])) continue;
        for (std::size_t j = 0; j < kern.size(); ++j) kernel_err = std::max(kernel_err, std::abs(kern[i][j] - exact[i][j]));
      }
    }
  }
  const bool ok = measure_err <= 1e-9 && kernel_err <= 1e-9;
  return {ok, fmt("measure %.3g, ", measure_err) + fmt("kernel %.3g (tol 1e-9)", kernel_err)};
}

// 4. Threshold enumeration and relative value iteration agree.
Outcome solver_consistency() {
  std::mt19937_64 rng(20240604);
  double worst = 0.0;
  int mismatched = 0;
  for (int k = 0; k < 200; ++k) {
    const AggregatedMdp m = random_mdp(rng, 5, 30);
    const ThresholdOptimum opt = optimal_threshold(m);
    const RviResult rvi = relative_value_iteration(m, 1e-10);
    worst = std::max(worst, std::abs(opt.gain - rvi.gain_bias.gain));
    const std::optional<int> n = rvi.policy.as_threshold();
    if (!n || *n != opt.threshold) ++mismatched;
  }
  return {worst <= 1e-8 && mismatched == 0,
          fmt("max gain gap %.3g (tol 1e-8), ", worst) + std::to_string(mismatched) + " threshold mismatches"};
}

// 5. Hitting-time recursion against the linear solve, and the bias bound.
Outcome hitting_and_bias() {
  std::mt19937_64 rng(20240605);
  double worst = 0.0;
  int bias_bad = 0;
  for (int k = 0; k < 100; ++k) {
    const AggregatedMdp m = random_mdp(rng, 4, 20);
    const int cap = m.capacity();
    const Policy pol = Policy::threshold(cap, static_cast<int>(rng() % static_cast<unsigned>(cap + 1)));
    const Vector a = hitting_times(m, pol);
    const Vector b = hitting_times_by_solve(m, pol);
    for (int s = 1; s <= cap; ++s) {
      const auto i = static_cast<std::size_t>(s);
      worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, b[i]));
    }
    const Vector delta = bias_variation_bound(m);
    const GainBias gb = evaluate_policy(m, Policy::threshold(cap, optimal_threshold(m).threshold));
    for (std::size_t s = 1; s < delta.size(); ++s) {
      if (std::abs(gb.bias[s] - gb.bias[s - 1]) > delta[s] * (1.0 + 1e-12)) ++bias_bad;
    }
  }
  return {worst <= 1e-9 && bias_bad == 0,
          fmt("max rel gap %.3g (tol 1e-9), ", worst) + std::to_string(bias_bad) + " bias bound violations"};
}

// 6. EVI with zero radii is exact; with learned radii it is optimistic.
Outcome evi_degeneracy_and_optimism() {
  std::mt19937_64 rng(20240606);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const AggregatedMdp m = random_mdp(rng, 4, 15);
    const EviResult e = extended_value_iteration(exact_region(m), 1e-7);
    worst = std::max(worst, std::abs(e.gain - optimal_threshold(m).gain));
  }

  const QueueingNetworkSpec spec = build_multi_tier(MultiTierParams::preset(3));
  const AggregatedMdp mdp = build_aggregated_mdp(spec, equivalent_queue(spec));
  const double g_star = optimal_threshold(mdp).gain;
  const LearnerKnowledge know = LearnerKnowledge::from_spec(spec);
  BirthDeathEnvironment env(mdp, 11);
  LearnerOptions opt;
  opt.tau_mix = 1;
  opt.horizon = 100000;
  int checked = 0, failed = 0, episodes = 0;
  opt.on_episode_start = [&](const EpisodeStartInfo& info) {
    ++episodes;
    if (!region_contains(*info.region, mdp)) return;
    ++checked;
    const double t_k = static_cast<double>(std::max<std::int64_t>(1, info.start));
    if (info.evi->gain + know.delta_max() / std::sqrt(t_k) < g_star) ++failed;
  };
  run_ucrlm(env, know, g_star, opt);
  const bool ok = worst <= 1e-6 && failed == 0 && checked > 0;
  return {ok, fmt("zero-radius gap %.3g (tol 1e-6), ", worst) + std::to_string(checked) + "/" +
                  std::to_string(episodes) + " episodes in region, " + std::to_string(failed) + " not optimistic"};
}

// 7. Accept-all occupancy histogram against the product-form aggregate.
Outcome simulator_fidelity() {
  const QueueingNetworkSpec s = tandem(5, 1.0, 2.0, 2.0);
  const std::int64_t steps = 1000000;
  const Trace tr = run_policy(s, Policy::accept_all(5), steps, 7);
  Vector hist(6, 0.0);
  for (int x : tr.state) hist[static_cast<std::size_t>(x)] += 1.0 / static_cast<double>(steps);
  const Vector exact = aggregate_measure(product_form_measure(s, 5));
  double tv = 0.0;
  for (std::size_t i = 0; i < hist.size(); ++i) tv += 0.5 * std::abs(hist[i] - exact[i]);
  return {tv < 0.02, fmt("TV %.4g (tol 0.02)", tv)};
}

std::int64_t index_of_time(const AggregateSeries& a, std::int64_t t) {
  const auto it = std::find(a.t.begin(), a.t.end(), t);
  if (it == a.t.end()) throw std::runtime_error("time point " + std::to_string(t) + " not recorded");
  return it - a.t.begin();
}

// Runs from criteria 8 and 9 with their capacity S.
std::vector<std::pair<const RunRecord*, int>> learning_runs;

// 8. Sublinear regret and the learned threshold on the n = 3 network.
Outcome learning_n3() {
  ExperimentConfig c;
  c.preset_n = {3};
  c.horizon = 200000;
  c.tau_mix.values = {3};
  c.replications = 24;
  c.workers = worker_count();
  static ExperimentResult res;
  res = run_experiment(c);
  const SeriesResult& sr = res.series.at(0);
  if (sr.runs.size() != 24) return {false, std::to_string(sr.failures.size()) + " failed runs"};
  const AggregateSeries& a = sr.aggregate;
  const double full = a.mean_regret[static_cast<std::size_t>(index_of_time(a, c.horizon))];
  const double half = a.mean_regret[static_cast<std::size_t>(index_of_time(a, c.horizon / 2))];
  const double ratio = full / half;
  int hits = 0;
  for (const RunRecord& r : sr.runs) {
    learning_runs.emplace_back(&r, sr.capacity);
    if (r.modal_threshold_last_quarter == sr.optimal_threshold) ++hits;
  }
  const bool ok = half > 0.0 && ratio < 1.8 && hits * 5 >= 24 * 4;
  return {ok, fmt("Reg(T)/Reg(T/2) = %.3f (< 1.8), ", ratio) + std::to_string(hits) + "/24 seeds at n* = " +
                  std::to_string(sr.optimal_threshold) + " (>= 80%)"};
}

// 9. Regret per module collapses across tau on the n = 6 network.
Outcome module_scaling() {
  ExperimentConfig c;
  c.preset_n = {6};
  c.horizon = 300000;
  c.tau_mix.values = {1, 3, 6};
  c.replications = 16;
  c.stride = 1000;
  c.workers = worker_count();
  static ExperimentResult res;
  res = run_experiment(c);
  const std::int64_t common = c.horizon / 6;
  std::vector<double> y;
  std::string detail = "rescaled regret at t/tau = " + std::to_string(common) + ":";
  for (const SeriesResult& sr : res.series) {
    if (sr.runs.size() != 16) return {false, sr.label + " has failed runs"};
    for (const RunRecord& r : sr.runs) learning_runs.emplace_back(&r, sr.capacity);
    const AggregateSeries& a = sr.aggregate;
    const double v = a.mean_regret[static_cast<std::size_t>(index_of_time(a, common * sr.tau_mix))] / sr.tau_mix;
    y.push_back(v);
    detail += fmt(" %.4g", v);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = i + 1; j < y.size(); ++j) {
      worst = std::max(worst, std::abs(y[i] - y[j]) / std::min(std::abs(y[i]), std::abs(y[j])));
    }
  }
  return {y.size() == 3 && worst <= 0.25, detail + fmt(", max pairwise gap %.3f (tol 0.25)", worst)};
}

// 10. Episode counts of every learning run stay below the bound.
Outcome episode_bound() {
  if (learning_runs.empty()) return {false, "no learning runs recorded"};
  int bad = 0;
  double worst = 0.0;
  for (const auto& [run, capacity] : learning_runs) {
    const double bound = episode_count_bound(capacity, run->tau_mix, run->horizon);
    const auto k = static_cast<double>(run->episodes.size());
    worst = std::max(worst, k / bound);
    if (k > bound) ++bad;
  }
  return {bad == 0, std::to_string(bad) + " of " + std::to_string(learning_runs.size()) +
                        fmt(" runs over the bound, max K/bound %.3f", worst)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "Norton rates equal brute-force throughput", 30, norton_equivalence},
      {2, "Norton rates increasing, concave, bounded", 10, norton_shape},
      {3, "aggregated measure and kernel fidelity", 0, aggregation_fidelity},
      {4, "threshold enumeration agrees with RVI", 60, solver_consistency},
      {5, "hitting-time recursion and bias bound", 0, hitting_and_bias},
      {6, "EVI degeneracy and optimism", 0, evi_degeneracy_and_optimism},
      {7, "simulator occupancy matches product form", 60, simulator_fidelity},
      {8, "learning on the n = 3 network", 900, learning_n3},
      {9, "module-count scaling on the n = 6 network", 1800, module_scaling},
      {10, "episode-count bound on every learning run", 0, episode_bound},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(start);
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", c.budget_s);
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
