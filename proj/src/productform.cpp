#include "qadmit/productform.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace qadmit {

namespace {

// Aggregated mass below this is treated as an unvisited level.
constexpr double kNegligibleMass = 1e-14;

void require_state_limit(int n_queues, int capacity, std::size_t limit) {
  const double count = StateSpace::count(n_queues, capacity);
  if (count > static_cast<double>(limit)) {
    throw std::length_error("state space has " + std::to_string(static_cast<long long>(count)) +
                            " states, above the limit of " + std::to_string(limit) +
                            "; reduce S or N or raise the brute-force limit");
  }
}

}  // namespace

double NormalizingConstants::log_g(int s) const {
  return std::log(scaled.at(static_cast<std::size_t>(s))) + s * log_scale;
}

double NormalizingConstants::g(int s) const { return std::exp(log_g(s)); }

NormalizingConstants convolution_constants(const QueueingNetworkSpec& spec) {
  if (spec.n_queues < 1 || spec.capacity < 1) {
    throw std::invalid_argument("convolution needs N >= 1 and S >= 1");
  }
  const Vector v = solve_visit_ratios(spec);
  Vector load(static_cast<std::size_t>(spec.n_queues));
  for (int i = 1; i <= spec.n_queues; ++i) load[static_cast<std::size_t>(i - 1)] = v[static_cast<std::size_t>(i)] / spec.mu(i);
  const double peak = *std::max_element(load.begin(), load.end());
  if (!(peak > 0.0)) throw std::invalid_argument("no queue receives external flow");

  NormalizingConstants out;
  out.log_scale = std::log(peak);
  out.scaled.assign(static_cast<std::size_t>(spec.capacity) + 1, 0.0);
  out.scaled[0] = 1.0;
  for (double rho : load) {
    const double q = rho / peak;
    if (q == 0.0) continue;
    for (std::size_t s = 1; s < out.scaled.size(); ++s) out.scaled[s] += q * out.scaled[s - 1];
  }
  return out;
}

EquivalentQueue norton_throughput(const NormalizingConstants& constants) {
  EquivalentQueue eq;
  eq.mu.assign(constants.scaled.size(), 0.0);
  const double unscale = std::exp(-constants.log_scale);
  for (std::size_t s = 1; s < eq.mu.size(); ++s) {
    eq.mu[s] = constants.scaled[s - 1] / constants.scaled[s] * unscale;
  }
  return eq;
}

EquivalentQueue equivalent_queue(const QueueingNetworkSpec& spec) {
  return norton_throughput(convolution_constants(spec));
}

StateSpace::StateSpace(int n_queues, int capacity) : n_queues_(n_queues), capacity_(capacity) {
  if (n_queues < 1 || capacity < 0) throw std::invalid_argument("state space needs N >= 1 and S >= 0");
  std::vector<int> x(static_cast<std::size_t>(n_queues), 0);
  // Depth-first over x_1, x_2, ... with increasing values gives lexicographic order.
  auto recurse = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == n_queues) {
      index_.emplace(x, states_.size());
      states_.push_back(x);
      totals_.push_back(capacity - remaining);
      return;
    }
    for (int k = 0; k <= remaining; ++k) {
      x[static_cast<std::size_t>(pos)] = k;
      self(self, pos + 1, remaining - k);
    }
    x[static_cast<std::size_t>(pos)] = 0;
  };
  recurse(recurse, 0, capacity);
}

std::size_t StateSpace::index_of(const std::vector<int>& x) const {
  const auto it = index_.find(x);
  if (it == index_.end()) throw std::out_of_range("state not in state space");
  return it->second;
}

double StateSpace::count(int n_queues, int capacity) {
  // C(S+N, N)
  double c = 1.0;
  for (int k = 1; k <= n_queues; ++k) c = c * (capacity + k) / k;
  return std::round(c);
}

FullMeasure product_form_measure(const QueueingNetworkSpec& spec, int threshold, std::size_t state_limit) {
  if (threshold < 0 || threshold > spec.capacity) throw std::invalid_argument("threshold must lie in [0, S]");
  require_state_limit(spec.n_queues, spec.capacity, state_limit);
  const Vector v = solve_visit_ratios(spec);
  Vector log_factor(static_cast<std::size_t>(spec.n_queues));
  for (int i = 1; i <= spec.n_queues; ++i) {
    const double f = v[static_cast<std::size_t>(i)] * spec.arrival_rate / spec.mu(i);
    log_factor[static_cast<std::size_t>(i - 1)] = f > 0.0 ? std::log(f) : -std::numeric_limits<double>::infinity();
  }

  FullMeasure out;
  auto space = std::make_shared<StateSpace>(spec.n_queues, spec.capacity);
  out.prob.assign(space->size(), 0.0);
  Vector logw(space->size(), -std::numeric_limits<double>::infinity());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < space->size(); ++k) {
    if (space->total(k) > threshold) continue;
    double lw = 0.0;
    const auto& x = space->state(k);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] > 0) lw += x[i] * log_factor[i];
    }
    logw[k] = lw;
    peak = std::max(peak, lw);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < space->size(); ++k) {
    if (std::isfinite(logw[k])) {
      out.prob[k] = std::exp(logw[k] - peak);
      total += out.prob[k];
    }
  }
  for (double& p : out.prob) p /= total;
  out.space = std::move(space);
  return out;
}

Vector aggregate_measure(const FullMeasure& full) {
  Vector m(static_cast<std::size_t>(full.space->capacity()) + 1, 0.0);
  for (std::size_t k = 0; k < full.prob.size(); ++k) m[static_cast<std::size_t>(full.space->total(k))] += full.prob[k];
  return m;
}

std::vector<std::vector<SparseEntry>> closed_chain_kernel(const QueueingNetworkSpec& spec, const StateSpace& space,
                                                          const Policy& policy) {
  if (policy.capacity() != spec.capacity) throw std::invalid_argument("policy capacity does not match the network");
  const double u = spec.uniformization;
  const int n = spec.n_queues;
  std::vector<std::vector<SparseEntry>> rows(space.size());
  std::vector<int> y;
  for (std::size_t k = 0; k < space.size(); ++k) {
    const auto& x = space.state(k);
    const int s = space.total(k);
    auto& row = rows[k];
    double moved = 0.0;
    if (policy(s) == kAdmit && s < spec.capacity) {
      for (int j = 1; j <= n; ++j) {
        const double p = spec.arrival_rate / u * spec.routing[0][j];
        if (p <= 0.0) continue;
        y = x;
        ++y[static_cast<std::size_t>(j - 1)];
        row.push_back({space.index_of(y), p});
        moved += p;
      }
    }
    for (int i = 1; i <= n; ++i) {
      if (x[static_cast<std::size_t>(i - 1)] == 0) continue;
      for (int j = 0; j <= n; ++j) {
        const double p = spec.mu(i) / u * spec.routing[i][j];
        if (p <= 0.0 || j == i) continue;
        y = x;
        --y[static_cast<std::size_t>(i - 1)];
        if (j > 0) ++y[static_cast<std::size_t>(j - 1)];
        row.push_back({space.index_of(y), p});
        moved += p;
      }
    }
    row.push_back({k, 1.0 - moved});
  }
  return rows;
}

FullMeasure brute_force_stationary(const QueueingNetworkSpec& spec, const Policy& policy, std::size_t state_limit) {
  require_state_limit(spec.n_queues, spec.capacity, state_limit);
  auto space = std::make_shared<StateSpace>(spec.n_queues, spec.capacity);
  const auto rows = closed_chain_kernel(spec, *space, policy);
  const auto n = static_cast<Eigen::Index>(space->size());

  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index from = 0; from < n; ++from) {
    for (const auto& e : rows[static_cast<std::size_t>(from)]) {
      const auto to = static_cast<Eigen::Index>(e.to);
      if (to != n - 1) triplets.emplace_back(to, from, e.prob);
    }
    if (from != n - 1) triplets.emplace_back(from, from, -1.0);
  }
  for (Eigen::Index j = 0; j < n; ++j) triplets.emplace_back(n - 1, j, 1.0);
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw std::runtime_error("brute-force stationary: factorization failed");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::VectorXd pi = lu.solve(rhs);

  FullMeasure out;
  out.prob.assign(pi.data(), pi.data() + n);
  for (double& p : out.prob) {
    if (p < 0.0 && p > -1e-13) p = 0.0;
  }
  // Global balance residual ||pi P - pi||_inf.
  Vector flow(out.prob.size(), 0.0);
  for (std::size_t from = 0; from < rows.size(); ++from) {
    for (const auto& e : rows[from]) flow[e.to] += out.prob[from] * e.prob;
  }
  double residual = 0.0;
  for (std::size_t k = 0; k < flow.size(); ++k) residual = std::max(residual, std::abs(flow[k] - out.prob[k]));
  if (residual > 1e-10) {
    throw std::runtime_error("brute-force stationary: balance residual " + std::to_string(residual));
  }
  out.space = std::move(space);
  return out;
}

Vector conditional_departure_rate(const QueueingNetworkSpec& spec, const FullMeasure& full) {
  const auto levels = static_cast<std::size_t>(full.space->capacity()) + 1;
  Vector mass(levels, 0.0);
  Vector flow(levels, 0.0);
  for (std::size_t k = 0; k < full.prob.size(); ++k) {
    const auto& x = full.space->state(k);
    double rate = 0.0;
    for (int i = 1; i <= spec.n_queues; ++i) {
      if (x[static_cast<std::size_t>(i - 1)] > 0) rate += spec.mu(i) * spec.routing[i][0];
    }
    const auto s = static_cast<std::size_t>(full.space->total(k));
    mass[s] += full.prob[k];
    flow[s] += full.prob[k] * rate;
  }
  Vector out(levels, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t s = 0; s < levels; ++s) {
    if (mass[s] > kNegligibleMass) out[s] = flow[s] / mass[s];
  }
  return out;
}

Matrix aggregated_kernel(const QueueingNetworkSpec& spec, const FullMeasure& full, const Policy& policy) {
  const auto levels = static_cast<std::size_t>(full.space->capacity()) + 1;
  const auto rows = closed_chain_kernel(spec, *full.space, policy);
  Matrix kernel(levels, Vector(levels, 0.0));
  Vector mass(levels, 0.0);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto s = static_cast<std::size_t>(full.space->total(k));
    mass[s] += full.prob[k];
    for (const auto& e : rows[k]) {
      kernel[s][static_cast<std::size_t>(full.space->total(e.to))] += full.prob[k] * e.prob;
    }
  }
  for (std::size_t s = 0; s < levels; ++s) {
    for (double& p : kernel[s]) p = mass[s] > kNegligibleMass ? p / mass[s] : std::numeric_limits<double>::quiet_NaN();
  }
  return kernel;
}

}  // namespace qadmit
