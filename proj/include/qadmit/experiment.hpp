#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qadmit/learner.hpp"
#include "qadmit/network.hpp"

namespace qadmit {

/// How the number of modules is chosen: a fixed list (one series each), the
/// oblivious ceil(ln^2 T), or ceil(5 ln T / ln(1/rho)).
struct TauMixSetting {
  enum class Kind { kFixed, kOblivious, kRho };
  Kind kind = Kind::kFixed;
  std::vector<int> values{3};
  double rho = 0.5;

  [[nodiscard]] std::vector<int> resolve(std::int64_t horizon) const;
  static TauMixSetting from_json(const nlohmann::json& j);
};

struct ExperimentConfig {
  std::optional<QueueingNetworkSpec> spec;  // explicit network
  std::vector<int> preset_n;                // multi-tier preset sweep otherwise
  std::int64_t horizon = 0;
  TauMixSetting tau_mix;
  std::uint64_t seed = 1;
  int replications = 24;
  std::string output_dir;  // empty: nothing written
  std::int64_t stride = 0;  // 0: horizon / 1000
  int workers = 1;
  bool record_expected_rewards = false;
  bool episode_log = false;
  std::vector<std::string> plots;  // SVGs to emit: regret, threshold, rescaled

  /// Throws std::invalid_argument on malformed or inconsistent configs.
  /// `base_dir` resolves relative spec paths.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::string& base_dir = ".");
  void validate() const;
};

struct AggregateSeries {
  std::string label;
  int tau_mix = 1;
  std::vector<std::int64_t> t;
  std::vector<double> mean_regret;
  std::vector<double> stderr_regret;
  std::vector<double> mean_threshold;
};

/// Pointwise mean and standard error across runs. Runs are folded in seed
/// order, so the result does not depend on completion order.
AggregateSeries aggregate_runs(std::vector<const RunRecord*> runs, std::string label);

void write_aggregate_csv(std::ostream& out, const AggregateSeries& series);
nlohmann::json run_to_json(const RunRecord& run, bool include_episodes);

struct SeriesResult {
  std::string label;
  int queues_per_tier = 0;  // 0 for an explicit spec
  int tau_mix = 1;
  double optimal_gain = 0.0;
  int optimal_threshold = 0;
  int capacity = 0;
  std::vector<RunRecord> runs;
  std::vector<std::string> failures;
  AggregateSeries aggregate;
};

struct ExperimentResult {
  std::vector<SeriesResult> series;
};

/// Runs replications x networks x tau values on `workers` threads. Seeds are
/// base + replication index. Per-run JSON and one aggregate CSV per series
/// are written when an output directory is configured.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

/// Exact analysis of a network: flows, Norton rates, optimal threshold and
/// gain, bias, bias-variation bound, accept-all mixing time, diameter.
struct AnalysisReport {
  QueueingNetworkSpec spec;
  std::vector<std::string> warnings;
  Vector traffic;
  Vector visit_ratios;
  Vector log_g;
  Vector mu;
  int optimal_threshold = 0;
  double optimal_gain = 0.0;
  double rvi_gain = 0.0;
  Vector bias;
  Vector delta;
  std::optional<long> accept_all_mix_time;
  double diameter = 0.0;
};

AnalysisReport analyze_network(const QueueingNetworkSpec& spec, long mixing_horizon = 10000);
nlohmann::json analysis_to_json(const AnalysisReport& report);
/// CSV columns s,G,mu.
void write_norton_csv(std::ostream& out, const AnalysisReport& report);

/// Brute-force consistency checks of the Norton reduction on a small network.
struct OracleReport {
  double max_throughput_rel_error = 0.0;    // conditional departure rate vs mu(s)
  double max_measure_abs_error = 0.0;       // aggregated brute force vs birth-death, all thresholds
  double max_kernel_abs_error = 0.0;        // aggregated kernel vs the MDP kernel
  double max_product_form_abs_error = 0.0;  // closed form vs brute force
  std::size_t states = 0;
  [[nodiscard]] bool passed(double tol = 1e-9) const;
};

OracleReport run_oracle(const QueueingNetworkSpec& spec, std::size_t state_limit);
nlohmann::json oracle_to_json(const OracleReport& report);

}  // namespace qadmit
