#include "qadmit/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <regex>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "qadmit/experiment.hpp"
#include "qadmit/network.hpp"
#include "qadmit/productform.hpp"
#include "qadmit/svg_plot.hpp"

namespace qadmit {
namespace {

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string join(const Vector& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + num(v[i]);
  return s;
}

QueueingNetworkSpec read_spec(const std::string& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("cannot open spec file " + path);
  QueueingNetworkSpec spec;
  try {
    spec = load_spec(path);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  const auto report = check_spec(spec);
  if (!report.valid()) {
    std::string msg = path + ": invalid network";
    for (const auto& v : report.violations) msg += "\n  - " + v.message;
    throw ValidationError(msg);
  }
  return spec;
}

void print_analysis(std::ostream& out, const AnalysisReport& r) {
  const auto& sp = r.spec;
  out << "network: " << sp.n_queues << " queues, capacity S = " << sp.capacity << ", lambda = " << num(sp.arrival_rate)
      << ", U = " << num(sp.uniformization) << '\n';
  for (const auto& w : r.warnings) out << "warning: " << w << '\n';
  out << "traffic (lambda_i): " << join(r.traffic) << '\n';
  out << "visit ratios (v_0..v_N): " << join(r.visit_ratios) << '\n';
  out << "optimal threshold n* = " << r.optimal_threshold << '\n';
  out << "optimal gain g* = " << num(r.optimal_gain) << " (value iteration: " << num(r.rvi_gain) << ")\n";
  out << "accept-all t_mix = ";
  if (r.accept_all_mix_time) {
    out << *r.accept_all_mix_time << '\n';
  } else {
    out << "not reached\n";
  }
  out << "diameter estimate = " << num(r.diameter) << '\n';
  out << "s,G,mu,bias,delta\n";
  for (std::size_t s = 0; s < r.mu.size(); ++s) {
    out << s << ',' << num(std::exp(r.log_g[s])) << ',' << num(r.mu[s]) << ',' << num(r.bias[s]) << ','
        << num(r.delta[s]) << '\n';
  }
}

int cmd_analyze(const std::string& spec_path, int preset, bool as_json, const std::string& csv_path, long horizon,
                std::ostream& out) {
  if (spec_path.empty() == (preset == 0)) throw ValidationError("analyze needs exactly one of <spec.json> or --preset");
  const QueueingNetworkSpec spec = preset > 0 ? build_multi_tier(MultiTierParams::preset(preset)) : read_spec(spec_path);
  const AnalysisReport report = analyze_network(spec, horizon);
  if (as_json) {
    out << analysis_to_json(report).dump(2) << '\n';
  } else {
    print_analysis(out, report);
  }
  if (!csv_path.empty()) {
    std::ofstream f(csv_path);
    write_norton_csv(f, report);
    if (!f) throw std::runtime_error("cannot write " + csv_path);
  }
  return kExitOk;
}

int cmd_learn(const std::string& path, int workers, const std::string& output, bool quiet, std::ostream& out,
              std::ostream& err) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  ExperimentConfig config;
  try {
    nlohmann::json j;
    in >> j;
    config = ExperimentConfig::from_json(j, std::filesystem::path(path).parent_path().string());
    if (workers > 0) config.workers = workers;
    if (!output.empty()) config.output_dir = output;
    config.validate();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationError(path + ": " + e.what());
  }
  const ExperimentResult result = run_experiment(config, quiet ? nullptr : &err);
  bool any_failed = false;
  for (const auto& s : result.series) {
    out << s.label << ": S = " << s.capacity << ", n* = " << s.optimal_threshold << ", g* = " << num(s.optimal_gain)
        << ", runs = " << s.runs.size() << '/' << config.replications;
    if (!s.runs.empty()) out << ", final mean regret = " << num(s.aggregate.mean_regret.back());
    out << '\n';
    for (const auto& f : s.failures) out << "  failed " << f << '\n';
    any_failed = any_failed || s.runs.empty();
  }
  return any_failed ? kExitRuntime : kExitOk;
}

int cmd_plot(const std::string& mode_name, const std::vector<std::string>& csvs, const std::string& output,
             const std::vector<int>& taus, bool log_x, const std::string& title, std::ostream& out) {
  PlotOptions opt;
  try {
    opt.mode = parse_plot_mode(mode_name);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  opt.log_x = log_x;
  opt.title = title;
  if (!taus.empty() && taus.size() != csvs.size()) throw ValidationError("--tau needs one value per CSV");
  std::vector<AggregateSeries> series;
  const std::regex tau_re("tau([0-9]+)");
  for (std::size_t i = 0; i < csvs.size(); ++i) {
    if (!std::filesystem::exists(csvs[i])) throw std::runtime_error("cannot open " + csvs[i]);
    AggregateSeries s;
    try {
      s = load_aggregate_csv(csvs[i]);
    } catch (const CsvFormatError& e) {
      throw ValidationError(e.what());
    }
    std::smatch m;
    if (!taus.empty()) {
      s.tau_mix = taus[i];
    } else if (std::regex_search(s.label, m, tau_re)) {
      s.tau_mix = std::stoi(m[1].str());
    } else if (opt.mode == PlotMode::kRescaled) {
      throw ValidationError("rescaled mode needs --tau or a tau<k> file name for " + csvs[i]);
    }
    if (s.tau_mix < 1) throw ValidationError("tau_mix must be >= 1");
    series.push_back(std::move(s));
  }
  std::ofstream f(output);
  f << render_svg(series, opt);
  if (!f) throw std::runtime_error("cannot write " + output);
  out << "wrote " << output << '\n';
  return kExitOk;
}

int cmd_oracle(const std::string& path, std::size_t limit, std::ostream& out) {
  const QueueingNetworkSpec spec = read_spec(path);
  if (StateSpace::count(spec.n_queues, spec.capacity) > static_cast<double>(limit)) {
    throw ValidationError("state space too large for the brute-force oracle (" +
                          num(StateSpace::count(spec.n_queues, spec.capacity)) + " states, limit " +
                          std::to_string(limit) + ")");
  }
  const OracleReport report = run_oracle(spec, limit);
  out << oracle_to_json(report).dump(2) << '\n';
  return report.passed() ? kExitOk : kExitRuntime;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Admission control in queueing networks: exact analysis and UCRL-M experiments", "qadmit"};
  app.require_subcommand(1);

  std::string spec_path, csv_path, config_path, output, plot_mode, plot_out, title;
  int preset = 0, workers = 0;
  long mix_horizon = 10000;
  bool as_json = false, quiet = false, log_x = false;
  std::vector<std::string> csvs;
  std::vector<int> taus;
  std::size_t limit = kDefaultStateLimit;

  auto* analyze = app.add_subcommand("analyze", "exact analysis of a network spec");
  analyze->add_option("spec", spec_path, "network spec JSON");
  analyze->add_option("--preset", preset, "multi-tier preset with n queues per tier instead of a file");
  analyze->add_flag("--json", as_json, "print the report as JSON");
  analyze->add_option("--csv", csv_path, "write s,G,mu to this CSV");
  analyze->add_option("--mix-horizon", mix_horizon, "steps searched for the mixing time");

  auto* learn = app.add_subcommand("learn", "run UCRL-M replications from an experiment config");
  learn->add_option("config", config_path, "experiment config JSON")->required();
  learn->add_option("--workers", workers, "parallel workers (overrides the config)");
  learn->add_option("--output", output, "output directory (overrides the config)");
  learn->add_flag("--quiet", quiet, "no per-run progress");

  auto* plot = app.add_subcommand("plot", "SVG chart from aggregate CSVs");
  plot->add_option("mode", plot_mode, "regret, threshold or rescaled")->required();
  plot->add_option("csv", csvs, "aggregate CSV files")->required();
  plot->add_option("-o,--output", plot_out, "output SVG")->required();
  plot->add_option("--tau", taus, "tau_mix per CSV for rescaled mode")->delimiter(',');
  plot->add_flag("--log-x", log_x, "logarithmic time axis");
  plot->add_option("--title", title, "chart title");

  auto* oracle = app.add_subcommand("oracle", "brute-force checks of the Norton reduction");
  oracle->add_option("spec", spec_path, "network spec JSON")->required();
  oracle->add_option("--limit", limit, "maximum number of network states");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (analyze->parsed()) return cmd_analyze(spec_path, preset, as_json, csv_path, mix_horizon, out);
    if (learn->parsed()) return cmd_learn(config_path, workers, output, quiet, out, err);
    if (plot->parsed()) return cmd_plot(plot_mode, csvs, plot_out, taus, log_x, title, out);
    if (oracle->parsed()) return cmd_oracle(spec_path, limit, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace qadmit
