#include "qadmit/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "qadmit/mdp.hpp"
#include "qadmit/productform.hpp"
#include "qadmit/svg_plot.hpp"

namespace qadmit {
namespace {

using nlohmann::json;

std::int64_t as_count(const json& j, const char* key) {
  if (!j.is_number()) throw std::invalid_argument(std::string(key) + " must be a number");
  const double v = j.get<double>();
  if (!(v >= 0.0) || std::floor(v) != v || v > 9.0e18) {
    throw std::invalid_argument(std::string(key) + " must be a nonnegative integer");
  }
  return static_cast<std::int64_t>(v);
}

const json* find_any(const json& j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (j.contains(k)) return &j.at(k);
  }
  return nullptr;
}

std::vector<int> int_list(const json& j, const char* key) {
  std::vector<int> out;
  if (j.is_array()) {
    for (const auto& e : j) out.push_back(static_cast<int>(as_count(e, key)));
  } else {
    out.push_back(static_cast<int>(as_count(j, key)));
  }
  return out;
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

struct NetworkCase {
  std::string name;
  int queues_per_tier = 0;
  QueueingNetworkSpec spec;
};

std::vector<NetworkCase> network_cases(const ExperimentConfig& config) {
  std::vector<NetworkCase> out;
  if (config.spec) {
    out.push_back({"spec", 0, *config.spec});
    return out;
  }
  for (int n : config.preset_n) out.push_back({"n" + std::to_string(n), n, build_multi_tier(MultiTierParams::preset(n))});
  return out;
}

struct Job {
  std::size_t series = 0;
  int replication = 0;
};

}  // namespace

std::vector<int> TauMixSetting::resolve(std::int64_t horizon) const {
  switch (kind) {
    case Kind::kFixed: return values;
    case Kind::kOblivious: return {default_tau_mix(horizon)};
    case Kind::kRho: return {default_tau_mix(horizon, rho)};
  }
  return values;
}

TauMixSetting TauMixSetting::from_json(const json& j) {
  TauMixSetting out;
  if (j.is_string()) {
    if (j.get<std::string>() != "oblivious") throw std::invalid_argument("tau_mix string must be \"oblivious\"");
    out.kind = Kind::kOblivious;
    out.values.clear();
  } else if (j.is_object()) {
    if (!j.contains("rho") || !j.at("rho").is_number()) throw std::invalid_argument("tau_mix object needs numeric rho");
    out.kind = Kind::kRho;
    out.rho = j.at("rho").get<double>();
    if (!(out.rho > 0.0 && out.rho < 1.0)) throw std::invalid_argument("rho must lie in (0, 1)");
    out.values.clear();
  } else {
    out.values = int_list(j, "tau_mix");
    if (out.values.empty()) throw std::invalid_argument("tau_mix list is empty");
    for (int v : out.values) {
      if (v < 1) throw std::invalid_argument("tau_mix must be >= 1");
    }
  }
  return out;
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  ExperimentConfig c;

  const json* net = find_any(j, {"network"});
  if (net) {
    if (net->is_string()) {
      std::filesystem::path p(net->get<std::string>());
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      c.spec = load_spec(p.string());
    } else if (net->is_object() && net->contains("preset")) {
      if (net->at("preset") != "multi_tier") throw std::invalid_argument("unknown preset (expected multi_tier)");
      if (!net->contains("n")) throw std::invalid_argument("preset network needs an n list");
      c.preset_n = int_list(net->at("n"), "n");
    } else if (net->is_object() && net->contains("spec")) {
      std::filesystem::path p(net->at("spec").get<std::string>());
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      c.spec = load_spec(p.string());
    } else if (net->is_object()) {
      c.spec = spec_from_json(*net);
    } else {
      throw std::invalid_argument("network must be a path, a preset or an inline spec");
    }
  } else if (j.contains("n")) {
    c.preset_n = int_list(j.at("n"), "n");
  } else {
    throw std::invalid_argument("config needs a network or an n list");
  }

  const json* t = find_any(j, {"T", "horizon"});
  if (!t) throw std::invalid_argument("config needs T");
  c.horizon = as_count(*t, "T");
  if (const json* tau = find_any(j, {"tau_mix", "tau"})) c.tau_mix = TauMixSetting::from_json(*tau);
  if (const json* s = find_any(j, {"seed"})) c.seed = static_cast<std::uint64_t>(as_count(*s, "seed"));
  if (const json* r = find_any(j, {"replications", "reps"})) c.replications = static_cast<int>(as_count(*r, "replications"));
  if (const json* o = find_any(j, {"output_dir", "output"})) c.output_dir = o->get<std::string>();
  if (const json* s = find_any(j, {"stride"})) {
    c.stride = s->is_string() && s->get<std::string>() == "full" ? 1 : as_count(*s, "stride");
  }
  if (const json* w = find_any(j, {"workers"})) c.workers = static_cast<int>(as_count(*w, "workers"));
  if (const json* e = find_any(j, {"record_expected_rewards"})) c.record_expected_rewards = e->get<bool>();
  if (const json* e = find_any(j, {"episode_log"})) c.episode_log = e->get<bool>();
  if (const json* p = find_any(j, {"plots", "series"})) {
    for (const auto& m : *p) {
      const auto name = m.get<std::string>();
      parse_plot_mode(name);
      c.plots.push_back(name);
    }
  }
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (!spec && preset_n.empty()) throw std::invalid_argument("n list must be nonempty for preset sweeps");
  for (int n : preset_n) {
    if (n < 1) throw std::invalid_argument("preset n must be >= 1");
  }
  if (spec) {
    const auto issues = validate_spec(*spec);
    if (!issues.empty()) throw std::invalid_argument("invalid network: " + issues.front().message);
  }
  if (horizon < 1) throw std::invalid_argument("T must be >= 1");
  if (replications < 1) throw std::invalid_argument("replication count must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (stride < 0) throw std::invalid_argument("stride must be >= 0");
  if (tau_mix.kind == TauMixSetting::Kind::kFixed && tau_mix.values.empty()) {
    throw std::invalid_argument("tau_mix list is empty");
  }
}

AggregateSeries aggregate_runs(std::vector<const RunRecord*> runs, std::string label) {
  if (runs.empty()) throw std::invalid_argument("no runs to aggregate");
  std::sort(runs.begin(), runs.end(), [](const RunRecord* a, const RunRecord* b) { return a->seed < b->seed; });
  AggregateSeries out;
  out.label = std::move(label);
  out.tau_mix = runs.front()->tau_mix;
  out.t = runs.front()->t;
  for (const RunRecord* r : runs) {
    if (r->t != out.t) throw std::invalid_argument("runs were stored at different time points");
  }
  const auto n = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < out.t.size(); ++i) {
    double sum = 0.0, thr = 0.0;
    for (const RunRecord* r : runs) {
      sum += r->regret[i];
      thr += r->threshold[i];
    }
    const double mean = sum / n;
    double ss = 0.0;
    for (const RunRecord* r : runs) ss += (r->regret[i] - mean) * (r->regret[i] - mean);
    const double se = runs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    out.mean_regret.push_back(mean);
    out.stderr_regret.push_back(se);
    out.mean_threshold.push_back(thr / n);
  }
  return out;
}

void write_aggregate_csv(std::ostream& out, const AggregateSeries& series) {
  out << "t,mean_regret,stderr_regret,mean_threshold\n";
  for (std::size_t i = 0; i < series.t.size(); ++i) {
    out << series.t[i] << ',' << fmt_g(series.mean_regret[i]) << ',' << fmt_g(series.stderr_regret[i]) << ','
        << fmt_g(series.mean_threshold[i]) << '\n';
  }
}

json run_to_json(const RunRecord& run, bool include_episodes) {
  json j;
  j["seed"] = run.seed;
  j["tau_mix"] = run.tau_mix;
  j["T"] = run.horizon;
  j["optimal_gain"] = run.optimal_gain;
  j["optimal_threshold"] = run.optimal_threshold;
  j["t"] = run.t;
  j["cumulative_reward"] = run.cumulative_reward;
  j["regret"] = run.regret;
  j["threshold"] = run.threshold;
  if (!run.expected_regret.empty()) j["expected_regret"] = run.expected_regret;
  j["summary"] = {{"total_regret", run.total_regret},
                  {"modal_threshold_last_quarter", run.modal_threshold_last_quarter},
                  {"episodes", run.episodes.size()},
                  {"ramping_steps", run.ramping_steps}};
  if (include_episodes) {
    json eps = json::array();
    for (const auto& e : run.episodes) {
      eps.push_back({{"k", e.index},
                     {"start", e.start},
                     {"end", e.end},
                     {"threshold", e.threshold},
                     {"threshold_shaped", e.threshold_shaped},
                     {"optimistic_gain", e.optimistic_gain},
                     {"epsilon", e.epsilon}});
    }
    j["episodes"] = std::move(eps);
  }
  return j;
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  const auto cases = network_cases(config);
  const auto taus = config.tau_mix.resolve(config.horizon);

  ExperimentResult result;
  for (const auto& nc : cases) {
    const AggregatedMdp mdp = build_aggregated_mdp(nc.spec, equivalent_queue(nc.spec));
    const ThresholdOptimum opt = optimal_threshold(mdp);
    for (int tau : taus) {
      SeriesResult s;
      s.label = nc.name + "_tau" + std::to_string(tau);
      s.queues_per_tier = nc.queues_per_tier;
      s.tau_mix = tau;
      s.optimal_gain = opt.gain;
      s.optimal_threshold = opt.threshold;
      s.capacity = nc.spec.capacity;
      result.series.push_back(std::move(s));
    }
  }

  const std::size_t per_case = taus.size();
  std::vector<Job> jobs;
  for (std::size_t k = 0; k < result.series.size(); ++k) {
    for (int r = 0; r < config.replications; ++r) jobs.push_back({k, r});
  }
  std::vector<std::optional<RunRecord>> slots(jobs.size());
  std::vector<std::string> errors(jobs.size());

  if (!config.output_dir.empty()) std::filesystem::create_directories(config.output_dir);

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      const SeriesResult& sr = result.series[job.series];
      const NetworkCase& nc = cases[job.series / per_case];
      const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(job.replication);
      try {
        LearnerOptions opts;
        opts.stride = config.stride;
        opts.record_expected_rewards = config.record_expected_rewards;
        opts.episode_log = config.episode_log;
        RunRecord rec = run_ucrlm(nc.spec, config.horizon, sr.tau_mix, seed, opts);
        for (std::size_t p = 0; p < rec.t.size(); ++p) {
          const double t = static_cast<double>(rec.t[p]);
          const double expect = rec.optimal_gain * t - rec.cumulative_reward[p];
          if (std::fabs(rec.regret[p] - expect) > 1e-9 * std::max(1.0, t)) {
            throw std::logic_error("regret series inconsistent at t=" + std::to_string(rec.t[p]));
          }
        }
        if (!config.output_dir.empty()) {
          const auto path = std::filesystem::path(config.output_dir) /
                            (sr.label + "_seed" + std::to_string(seed) + ".json");
          std::ofstream f(path);
          f << run_to_json(rec, config.episode_log).dump() << '\n';
          if (!f) throw std::runtime_error("cannot write " + path.string());
        }
        slots[i] = std::move(rec);
        if (log) {
          std::lock_guard<std::mutex> lock(log_mutex);
          *log << sr.label << " seed " << seed << ": regret " << fmt_g(slots[i]->total_regret) << ", episodes "
               << slots[i]->episodes.size() << '\n';
        }
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (log) {
          std::lock_guard<std::mutex> lock(log_mutex);
          *log << sr.label << " seed " << seed << " failed: " << e.what() << '\n';
        }
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(config.workers, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_threads; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    SeriesResult& sr = result.series[jobs[i].series];
    if (slots[i]) {
      sr.runs.push_back(std::move(*slots[i]));
    } else {
      sr.failures.push_back("seed " + std::to_string(config.seed + static_cast<std::uint64_t>(jobs[i].replication)) +
                            ": " + errors[i]);
    }
  }

  std::vector<AggregateSeries> plotted;
  for (auto& sr : result.series) {
    if (sr.runs.empty()) {
      if (log) *log << "warning: " << sr.label << ": every run failed, no aggregate\n";
      continue;
    }
    if (!sr.failures.empty() && log) {
      *log << "warning: " << sr.label << ": aggregate over " << sr.runs.size() << " of " << config.replications
           << " runs\n";
    }
    std::vector<const RunRecord*> ptrs;
    for (const auto& r : sr.runs) ptrs.push_back(&r);
    sr.aggregate = aggregate_runs(ptrs, sr.label);
    plotted.push_back(sr.aggregate);
    if (!config.output_dir.empty()) {
      const auto path = std::filesystem::path(config.output_dir) / ("aggregate_" + sr.label + ".csv");
      std::ofstream f(path);
      write_aggregate_csv(f, sr.aggregate);
      if (!f) throw std::runtime_error("cannot write " + path.string());
    }
  }
  if (!config.output_dir.empty() && !plotted.empty()) {
    for (const auto& mode : config.plots) {
      PlotOptions po;
      po.mode = parse_plot_mode(mode);
      std::ofstream f(std::filesystem::path(config.output_dir) / (mode + ".svg"));
      f << render_svg(plotted, po);
    }
  }
  return result;
}

AnalysisReport analyze_network(const QueueingNetworkSpec& spec, long mixing_horizon) {
  const auto report = check_spec(spec);
  if (!report.valid()) {
    std::string msg = "invalid network:";
    for (const auto& v : report.violations) msg += "\n  " + v.message;
    throw std::invalid_argument(msg);
  }
  AnalysisReport out;
  out.spec = spec;
  for (const auto& w : report.warnings) out.warnings.push_back(w.message);
  out.traffic = solve_traffic_equations(spec);
  out.visit_ratios = solve_visit_ratios(spec);
  const NormalizingConstants g = convolution_constants(spec);
  for (int s = 0; s <= g.capacity(); ++s) out.log_g.push_back(g.log_g(s));
  const EquivalentQueue queue = norton_throughput(g);
  out.mu = queue.mu;
  const AggregatedMdp mdp = build_aggregated_mdp(spec, queue);
  const ThresholdOptimum opt = optimal_threshold(mdp);
  out.optimal_threshold = opt.threshold;
  out.optimal_gain = opt.gain;
  const RviResult rvi = relative_value_iteration(mdp, 1e-10);
  out.rvi_gain = rvi.gain_bias.gain;
  out.bias = evaluate_policy(mdp, Policy::threshold(spec.capacity, opt.threshold)).bias;
  out.delta = bias_variation_bound(mdp);
  out.accept_all_mix_time = mixing_profile(mdp, Policy::accept_all(spec.capacity), mixing_horizon).mix_time;
  out.diameter = diameter_estimate(mdp);
  return out;
}

json analysis_to_json(const AnalysisReport& r) {
  json j;
  j["capacity"] = r.spec.capacity;
  j["queues"] = r.spec.n_queues;
  j["uniformization"] = r.spec.uniformization;
  j["warnings"] = r.warnings;
  j["traffic"] = r.traffic;
  j["visit_ratios"] = r.visit_ratios;
  j["log_G"] = r.log_g;
  Vector g;
  for (double lg : r.log_g) g.push_back(std::exp(lg));
  j["G"] = g;
  j["mu"] = r.mu;
  j["threshold"] = r.optimal_threshold;
  j["gain"] = r.optimal_gain;
  j["rvi_gain"] = r.rvi_gain;
  j["bias"] = r.bias;
  j["delta"] = r.delta;
  j["t_mix_accept_all"] = r.accept_all_mix_time ? json(*r.accept_all_mix_time) : json(nullptr);
  j["diameter"] = r.diameter;
  return j;
}

void write_norton_csv(std::ostream& out, const AnalysisReport& report) {
  out << "s,G,mu\n";
  for (std::size_t s = 0; s < report.mu.size(); ++s) {
    out << s << ',' << fmt_g(std::exp(report.log_g[s])) << ',' << fmt_g(report.mu[s]) << '\n';
  }
}

bool OracleReport::passed(double tol) const {
  return max_throughput_rel_error <= tol && max_measure_abs_error <= tol && max_kernel_abs_error <= tol &&
         max_product_form_abs_error <= tol;
}

OracleReport run_oracle(const QueueingNetworkSpec& spec, std::size_t state_limit) {
  const auto issues = validate_spec(spec);
  if (!issues.empty()) throw std::invalid_argument("invalid network: " + issues.front().message);
  const EquivalentQueue queue = equivalent_queue(spec);
  const AggregatedMdp mdp = build_aggregated_mdp(spec, queue);
  OracleReport out;
  for (int n = 0; n <= spec.capacity; ++n) {
    const Policy pol = Policy::threshold(spec.capacity, n);
    const FullMeasure brute = brute_force_stationary(spec, pol, state_limit);
    out.states = brute.space->size();

    const FullMeasure closed = product_form_measure(spec, n, state_limit);
    for (std::size_t i = 0; i < brute.prob.size(); ++i) {
      out.max_product_form_abs_error = std::max(out.max_product_form_abs_error, std::fabs(brute.prob[i] - closed.prob[i]));
    }
    const Vector agg = aggregate_measure(brute);
    const Vector bd = threshold_stationary_measure(mdp, n);
    for (std::size_t s = 0; s < agg.size(); ++s) {
      out.max_measure_abs_error = std::max(out.max_measure_abs_error, std::fabs(agg[s] - bd[s]));
    }
    const Vector rate = conditional_departure_rate(spec, brute);
    for (int s = 1; s <= spec.capacity; ++s) {
      const double r = rate[static_cast<std::size_t>(s)];
      if (std::isnan(r)) continue;
      out.max_throughput_rel_error = std::max(out.max_throughput_rel_error, std::fabs(r - queue(s)) / queue(s));
    }
    const Matrix kern = aggregated_kernel(spec, brute, pol);
    const Matrix exact = mdp.policy_matrix(pol);
    for (std::size_t s = 0; s < kern.size(); ++s) {
      if (std::isnan(kern[s][0])) continue;
      for (std::size_t t = 0; t < kern[s].size(); ++t) {
        out.max_kernel_abs_error = std::max(out.max_kernel_abs_error, std::fabs(kern[s][t] - exact[s][t]));
      }
    }
  }
  return out;
}

json oracle_to_json(const OracleReport& r) {
  return {{"states", r.states},
          {"max_throughput_rel_error", r.max_throughput_rel_error},
          {"max_measure_abs_error", r.max_measure_abs_error},
          {"max_kernel_abs_error", r.max_kernel_abs_error},
          {"max_product_form_abs_error", r.max_product_form_abs_error},
          {"passed", r.passed()}};
}

}  // namespace qadmit
