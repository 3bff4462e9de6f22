#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "qadmit/mdp.hpp"
#include "qadmit/network.hpp"
#include "qadmit/productform.hpp"

namespace qadmit::testing {

inline QueueingNetworkSpec single_queue(double lambda = 1.0, double mu = 2.0, int capacity = 2, double rc = 10.0,
                                        double h = 1.0, double u = 3.0) {
  QueueingNetworkSpec s;
  s.n_queues = 1;
  s.service_rates = {mu};
  s.routing = {{0.0, 1.0}, {1.0, 0.0}};
  s.arrival_rate = lambda;
  s.capacity = capacity;
  s.rejection_cost = rc;
  s.holding_cost = h;
  s.uniformization = u;
  return s;
}

inline QueueingNetworkSpec tandem(int capacity = 2, double lambda = 1.0, double mu1 = 2.0, double mu2 = 2.0) {
  QueueingNetworkSpec s;
  s.n_queues = 2;
  s.service_rates = {mu1, mu2};
  s.routing = {{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {1.0, 0.0, 0.0}};
  s.arrival_rate = lambda;
  s.capacity = capacity;
  s.rejection_cost = 10.0;
  s.holding_cost = 1.0;
  s.uniformization = s.min_uniformization();
  return s;
}

/// Aggregated MDP with the given Norton rates mu(1..S).
inline AggregatedMdp bd_mdp(double lambda, Vector mu_tail, double u, double rc, double h) {
  AggregatedMdp::Params p;
  p.arrival_rate = lambda;
  p.uniformization = u;
  p.rejection_cost = rc;
  p.holding_cost = h;
  p.mu = {0.0};
  p.mu.insert(p.mu.end(), mu_tail.begin(), mu_tail.end());
  return AggregatedMdp(p);
}

/// The two-state instance used throughout: S=1, lambda=mu(1)=1, U=2, R_c=10, h=1.
inline AggregatedMdp two_state_mdp() { return bd_mdp(1.0, {1.0}, 2.0, 10.0, 1.0); }

/// Random valid Jackson network. Every queue exits with probability at least
/// 0.05 and some routing entries are zeroed.
inline QueueingNetworkSpec random_spec(std::mt19937_64& rng, int max_queues, int max_capacity) {
  std::uniform_int_distribution<int> nq(1, max_queues);
  std::uniform_int_distribution<int> cap(1, max_capacity);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  QueueingNetworkSpec s;
  s.n_queues = nq(rng);
  s.capacity = cap(rng);
  const auto n = static_cast<std::size_t>(s.n_queues);
  for (std::size_t i = 0; i < n; ++i) s.service_rates.push_back(0.3 + 3.0 * unit(rng));
  s.arrival_rate = 0.2 + 3.0 * unit(rng);
  s.routing.assign(n + 1, Vector(n + 1, 0.0));
  for (std::size_t i = 0; i <= n; ++i) {
    Vector w(n + 1, 0.0);
    double sum = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
      if (i == 0 && j == 0) continue;
      w[j] = unit(rng) < 0.25 ? 0.0 : unit(rng);
      sum += w[j];
    }
    if (i == 0 && sum == 0.0) {
      w[1] = 1.0;
      sum = 1.0;
    }
    if (i > 0) {
      // Guaranteed exit keeps every queue able to reach the outside.
      const double exit = 0.05 + 0.9 * unit(rng);
      const double rest = sum > 0.0 ? (1.0 - exit) / sum : 0.0;
      for (std::size_t j = 1; j <= n; ++j) w[j] *= rest;
      w[0] = sum > 0.0 ? exit : 1.0;
      sum = 1.0;
    }
    double total = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
      s.routing[i][j] = w[j] / sum;
      total += s.routing[i][j];
    }
    // Push rounding into the largest entry so rows sum to one to the last ulp.
    auto big = std::max_element(s.routing[i].begin(), s.routing[i].end());
    *big += 1.0 - total;
  }
  s.rejection_cost = 20.0 * unit(rng);
  s.holding_cost = 3.0 * unit(rng);
  s.uniformization = s.min_uniformization() * (1.0 + 0.5 * unit(rng));
  return s;
}

inline AggregatedMdp random_mdp(std::mt19937_64& rng, int max_queues, int max_capacity) {
  const QueueingNetworkSpec spec = random_spec(rng, max_queues, max_capacity);
  return build_aggregated_mdp(spec, equivalent_queue(spec));
}

// Expected steps to hit 0 from the first-step equations
// (1 - p_ss) x_s - p_{s,s-1} x_{s-1} - p_{s,s+1} x_{s+1} = 1, x_0 = 0,
// eliminated from s = 1 upwards without pivoting.
inline Vector hitting_times_by_solve(const AggregatedMdp& mdp, const Policy& pol) {
  const Matrix p = mdp.policy_matrix(pol);
  const int n = mdp.capacity();
  Vector out(static_cast<std::size_t>(n) + 1, 0.0);
  if (n == 0) return out;
  // Pivot i is up_i + ex_i with ex_i = down_i * ex_{i-1} / pivot_{i-1}, which
  // is the eliminated diagonal written without subtraction.
  std::vector<long double> diag(static_cast<std::size_t>(n) + 1), upper(diag), rhs(diag);
  long double excess = 0.0L;
  for (int s = 1; s <= n; ++s) {
    const auto i = static_cast<std::size_t>(s);
    const long double up = s < n ? p[i][i + 1] : 0.0;
    const long double down = p[i][i - 1];
    upper[i] = -up;
    rhs[i] = 1.0L;
    excess = s == 1 ? down : down * excess / diag[i - 1];
    if (s > 1) rhs[i] += down / diag[i - 1] * rhs[i - 1];
    diag[i] = up + excess;
  }
  std::vector<long double> x(static_cast<std::size_t>(n) + 2, 0.0L);
  for (int s = n; s >= 1; --s) {
    const auto i = static_cast<std::size_t>(s);
    x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    out[i] = static_cast<double>(x[i]);
  }
  return out;
}

}  // namespace qadmit::testing
