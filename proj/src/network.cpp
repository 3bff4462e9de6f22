#include "qadmit/network.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "qadmit/linalg.hpp"

namespace qadmit {

namespace {

constexpr double kRowSumTol = 1e-9;

std::string fmt_double(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

bool routing_shape_ok(const QueueingNetworkSpec& spec) {
  const auto n = static_cast<std::size_t>(spec.n_queues) + 1;
  if (spec.routing.size() != n) return false;
  for (const auto& row : spec.routing) {
    if (row.size() != n) return false;
  }
  return true;
}

// Queues reachable from `source` following edges i -> j with L[i][j] > 0
// (forward) or j -> i (backward).
std::vector<bool> reachable(const QueueingNetworkSpec& spec, int source, bool forward) {
  const int n = spec.n_queues + 1;
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::vector<int> stack{source};
  seen[static_cast<std::size_t>(source)] = true;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int j = 0; j < n; ++j) {
      const double w = forward ? spec.routing[i][j] : spec.routing[j][i];
      if (w > 0.0 && !seen[static_cast<std::size_t>(j)]) {
        seen[static_cast<std::size_t>(j)] = true;
        stack.push_back(j);
      }
    }
  }
  return seen;
}

void require_solvable(const QueueingNetworkSpec& spec) {
  if (spec.n_queues < 1 || !routing_shape_ok(spec)) {
    throw std::invalid_argument("routing matrix must be (N+1)x(N+1) with N >= 1");
  }
  const auto exits = reachable(spec, 0, /*forward=*/false);
  for (int i = 1; i <= spec.n_queues; ++i) {
    if (!exits[static_cast<std::size_t>(i)]) {
      throw SingularRoutingError(i, "queue " + std::to_string(i) +
                                        " cannot reach the outside; flow equations are singular");
    }
  }
}

// Solves x_i = b_i + sum_j x_j L_{ji} over the queues 1..N.
Vector solve_flow(const QueueingNetworkSpec& spec, const Vector& rhs) {
  require_solvable(spec);
  const int n = spec.n_queues;
  linalg::DenseMatrix a = linalg::DenseMatrix::Identity(n, n);
  linalg::DenseVector b(n);
  for (int i = 0; i < n; ++i) {
    b(i) = rhs[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) a(i, j) -= spec.routing[j + 1][i + 1];
  }
  linalg::DenseVector x;
  try {
    x = linalg::solve(a, b);
  } catch (const std::runtime_error&) {
    throw SingularRoutingError(0, "flow equations are numerically singular");
  }
  return Vector(x.data(), x.data() + n);
}

}  // namespace

double QueueingNetworkSpec::total_service_rate() const {
  return std::accumulate(service_rates.begin(), service_rates.end(), 0.0);
}

double QueueingNetworkSpec::min_uniformization() const { return arrival_rate + total_service_rate(); }

std::vector<SpecIssue> validate_spec(const QueueingNetworkSpec& spec) { return check_spec(spec).violations; }

SpecReport check_spec(const QueueingNetworkSpec& spec) {
  SpecReport report;
  auto violation = [&](std::string msg) { report.violations.push_back({std::move(msg)}); };
  auto warning = [&](std::string msg) { report.warnings.push_back({std::move(msg)}); };

  if (spec.n_queues < 1) violation("n_queues must be positive, got " + std::to_string(spec.n_queues));
  if (static_cast<int>(spec.service_rates.size()) != spec.n_queues) {
    violation("service_rates has " + std::to_string(spec.service_rates.size()) + " entries, expected " +
              std::to_string(spec.n_queues));
  }
  for (std::size_t i = 0; i < spec.service_rates.size(); ++i) {
    if (!(spec.service_rates[i] > 0.0)) {
      violation("service rate of queue " + std::to_string(i + 1) + " must be > 0, got " +
                fmt_double(spec.service_rates[i]));
    }
  }
  if (!(spec.arrival_rate > 0.0)) violation("arrival rate must be > 0, got " + fmt_double(spec.arrival_rate));
  if (spec.capacity < 1) violation("capacity must be positive, got " + std::to_string(spec.capacity));
  if (!(spec.rejection_cost >= 0.0)) violation("rejection cost must be >= 0");
  if (!(spec.holding_cost >= 0.0)) violation("holding cost must be >= 0");
  const double bound = spec.min_uniformization();
  if (!(spec.uniformization >= bound * (1.0 - 1e-12))) {
    violation("uniformization " + fmt_double(spec.uniformization) + " is below lambda + sum(mu) = " +
              fmt_double(bound));
  }

  if (spec.n_queues < 1 || !routing_shape_ok(spec)) {
    violation("routing matrix must be " + std::to_string(spec.n_queues + 1) + "x" +
              std::to_string(spec.n_queues + 1));
    return report;
  }
  bool entries_ok = true;
  for (std::size_t i = 0; i < spec.routing.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < spec.routing[i].size(); ++j) {
      const double w = spec.routing[i][j];
      if (!(w >= 0.0 && w <= 1.0)) {
        violation("routing entry (" + std::to_string(i) + "," + std::to_string(j) + ") = " + fmt_double(w) +
                  " is outside [0,1]");
        entries_ok = false;
      }
      sum += w;
    }
    if (std::abs(sum - 1.0) > kRowSumTol) {
      violation("routing row " + std::to_string(i) + " sums to " + fmt_double(sum) + ", expected 1");
      entries_ok = false;
    }
  }
  if (spec.routing[0][0] != 0.0) violation("routing entry (0,0) must be 0: external arrivals must enter a queue");
  if (!entries_ok) return report;

  const auto exits = reachable(spec, 0, /*forward=*/false);
  const auto entered = reachable(spec, 0, /*forward=*/true);
  for (int i = 1; i <= spec.n_queues; ++i) {
    if (!exits[static_cast<std::size_t>(i)]) {
      violation("queue " + std::to_string(i) + " cannot reach the outside (closed routing class)");
    }
    if (!entered[static_cast<std::size_t>(i)]) {
      warning("queue " + std::to_string(i) + " is never visited by external arrivals");
    }
  }
  if (report.valid()) {
    const Vector rates = solve_traffic_equations(spec);
    for (int i = 1; i <= spec.n_queues; ++i) {
      if (rates[static_cast<std::size_t>(i - 1)] >= spec.mu(i)) {
        warning("queue " + std::to_string(i) + " is unstable in isolation: arrival rate " +
                fmt_double(rates[static_cast<std::size_t>(i - 1)]) + " >= service rate " + fmt_double(spec.mu(i)));
      }
    }
  }
  return report;
}

Vector solve_traffic_equations(const QueueingNetworkSpec& spec) {
  Vector rhs(static_cast<std::size_t>(std::max(spec.n_queues, 0)));
  for (int i = 1; i <= spec.n_queues && routing_shape_ok(spec); ++i) {
    rhs[static_cast<std::size_t>(i - 1)] = spec.arrival_rate * spec.routing[0][i];
  }
  return solve_flow(spec, rhs);
}

Vector solve_visit_ratios(const QueueingNetworkSpec& spec) {
  Vector rhs(static_cast<std::size_t>(std::max(spec.n_queues, 0)));
  for (int i = 1; i <= spec.n_queues && routing_shape_ok(spec); ++i) {
    rhs[static_cast<std::size_t>(i - 1)] = spec.routing[0][i];
  }
  Vector v = solve_flow(spec, rhs);
  v.insert(v.begin(), 1.0);
  return v;
}

MultiTierParams MultiTierParams::preset(int n) {
  if (n < 1) throw std::invalid_argument("multi-tier preset needs n >= 1");
  MultiTierParams p;
  p.queues_per_tier = n;
  p.bypass_prob = 0.2;
  p.arrival_rate = 0.99;
  p.capacity = static_cast<int>(std::lround(10.0 * n / 3.0));
  p.service_rate = 1.0 / n;
  p.rejection_cost = 10.0;
  p.holding_cost = 4.0 / (3.0 * n);
  p.uniformization = 0.0;
  return p;
}

QueueingNetworkSpec build_multi_tier(const MultiTierParams& params) {
  const int n = params.queues_per_tier;
  if (n < 1) throw std::invalid_argument("queues_per_tier must be >= 1");
  if (!(params.bypass_prob >= 0.0 && params.bypass_prob < 1.0)) {
    throw std::invalid_argument("bypass probability must lie in [0,1)");
  }
  const int total = 3 * n;
  QueueingNetworkSpec spec;
  spec.n_queues = total;
  spec.service_rates.assign(static_cast<std::size_t>(total), params.service_rate);
  spec.routing.assign(static_cast<std::size_t>(total + 1), Vector(static_cast<std::size_t>(total + 1), 0.0));
  auto queue = [n](int tier, int k) { return 1 + tier * n + k; };
  const double share = 1.0 / n;
  for (int k = 0; k < n; ++k) spec.routing[0][queue(0, k)] = share;
  for (int k = 0; k < n; ++k) {
    auto& tier1 = spec.routing[queue(0, k)];
    tier1[0] = 1.0 - params.bypass_prob;
    for (int j = 0; j < n; ++j) tier1[queue(1, j)] = params.bypass_prob * share;
    auto& tier2 = spec.routing[queue(1, k)];
    for (int j = 0; j < n; ++j) tier2[queue(2, j)] = share;
    spec.routing[queue(2, k)][0] = 1.0;
  }
  spec.arrival_rate = params.arrival_rate;
  spec.capacity = params.capacity;
  spec.rejection_cost = params.rejection_cost;
  spec.holding_cost = params.holding_cost;
  spec.uniformization = params.uniformization > 0.0 ? params.uniformization : spec.min_uniformization();
  return spec;
}

QueueingNetworkSpec spec_from_json(const nlohmann::json& j) {
  QueueingNetworkSpec spec;
  spec.n_queues = j.at("queues").get<int>();
  spec.service_rates = j.at("mu").get<Vector>();
  spec.routing = j.at("routing").get<Matrix>();
  spec.arrival_rate = j.at("lambda").get<double>();
  spec.capacity = j.at("capacity").get<int>();
  spec.rejection_cost = j.value("rejection_cost", 0.0);
  spec.holding_cost = j.value("holding_cost", 0.0);
  const auto it = j.find("uniformization");
  if (it == j.end() || (it->is_string() && it->get<std::string>() == "auto")) {
    spec.uniformization = spec.min_uniformization();
  } else if (it->is_number()) {
    spec.uniformization = it->get<double>();
  } else {
    throw std::invalid_argument("uniformization must be a number or \"auto\"");
  }
  return spec;
}

nlohmann::json spec_to_json(const QueueingNetworkSpec& spec) {
  return {{"queues", spec.n_queues},
          {"mu", spec.service_rates},
          {"routing", spec.routing},
          {"lambda", spec.arrival_rate},
          {"capacity", spec.capacity},
          {"rejection_cost", spec.rejection_cost},
          {"holding_cost", spec.holding_cost},
          {"uniformization", spec.uniformization}};
}

QueueingNetworkSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open spec file " + path);
  nlohmann::json j;
  in >> j;
  return spec_from_json(j);
}

}  // namespace qadmit
