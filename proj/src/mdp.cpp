#include "qadmit/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "qadmit/linalg.hpp"

namespace qadmit {

namespace {

// Damping of the value-iteration operator, u <- (1-g) u + g Bu. Removes
// period-2 oscillations without moving the fixed point of Bu - u.
constexpr double kDamping = 0.99;

double span(const Vector& x) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return *hi - *lo;
}

}  // namespace

AggregatedMdp::AggregatedMdp(Params params) : params_(std::move(params)) {
  if (params_.mu.empty()) throw std::invalid_argument("mu must have S+1 entries");
  capacity_ = static_cast<int>(params_.mu.size()) - 1;
  if (!(params_.uniformization > 0.0)) throw std::invalid_argument("uniformization must be positive");
  if (params_.arrival_rate < 0.0) throw std::invalid_argument("arrival rate must be >= 0");
  if (params_.mu[0] != 0.0) throw std::invalid_argument("mu(0) must be 0");
  for (int s = 1; s <= capacity_; ++s) {
    if (!(mu(s) > 0.0)) throw std::invalid_argument("mu(" + std::to_string(s) + ") must be positive");
    if ((params_.arrival_rate + mu(s)) / params_.uniformization > 1.0 + 1e-12) {
      throw std::invalid_argument("lambda + mu(" + std::to_string(s) + ") exceeds the uniformization constant");
    }
  }
}

double AggregatedMdp::birth_prob(int s, int a) const {
  return (a == kAdmit && s < capacity_) ? params_.arrival_rate / params_.uniformization : 0.0;
}

double AggregatedMdp::death_prob(int s) const { return mu(s) / params_.uniformization; }

std::array<double, 3> AggregatedMdp::transition(int s, int a) const {
  const double up = birth_prob(s, a);
  const double down = death_prob(s);
  return {down, 1.0 - up - down, up};
}

double AggregatedMdp::reward(int s, int a) const {
  return (params_.arrival_rate * params_.rejection_cost * a + params_.holding_cost * (capacity_ - s)) /
         params_.uniformization;
}

double AggregatedMdp::r_max() const {
  return (params_.arrival_rate * params_.rejection_cost + params_.holding_cost * capacity_) / params_.uniformization;
}

double AggregatedMdp::delta_max() const {
  return params_.rejection_cost + params_.holding_cost / params_.uniformization;
}

Matrix AggregatedMdp::policy_matrix(const Policy& policy) const {
  const auto n = static_cast<std::size_t>(n_states());
  Matrix p(n, Vector(n, 0.0));
  for (int s = 0; s <= capacity_; ++s) {
    const auto [down, stay, up] = transition(s, policy(s));
    const auto i = static_cast<std::size_t>(s);
    p[i][i] = stay;
    if (s > 0) p[i][i - 1] = down;
    if (s < capacity_) p[i][i + 1] = up;
  }
  return p;
}

AggregatedMdp build_aggregated_mdp(const QueueingNetworkSpec& spec, const EquivalentQueue& queue) {
  if (queue.capacity() != spec.capacity) throw std::invalid_argument("equivalent queue capacity differs from spec");
  return AggregatedMdp({.arrival_rate = spec.arrival_rate,
                        .uniformization = spec.uniformization,
                        .rejection_cost = spec.rejection_cost,
                        .holding_cost = spec.holding_cost,
                        .mu = queue.mu});
}

Vector threshold_stationary_measure(const AggregatedMdp& mdp, int n) {
  if (n < 0 || n > mdp.capacity()) throw std::invalid_argument("threshold must lie in [0, S]");
  Vector m(static_cast<std::size_t>(mdp.n_states()), 0.0);
  m[0] = 1.0;
  const double lambda = mdp.params().arrival_rate;
  for (int s = 1; s <= n; ++s) m[static_cast<std::size_t>(s)] = m[static_cast<std::size_t>(s - 1)] * lambda / mdp.mu(s);
  double total = 0.0;
  for (double x : m) total += x;
  for (double& x : m) x /= total;
  return m;
}

double threshold_gain(const AggregatedMdp& mdp, int n) {
  const Vector m = threshold_stationary_measure(mdp, n);
  double g = 0.0;
  for (int s = 0; s <= n; ++s) g += m[static_cast<std::size_t>(s)] * mdp.reward(s, s < n ? kAdmit : kReject);
  return g;
}

ThresholdOptimum optimal_threshold(const AggregatedMdp& mdp) {
  // With w_s = prod_{i<=s} lambda/mu(i) and Z_n = sum_{s<=n} w_s,
  //   g(n+1) - g(n) = w_{n+1} / (U Z_n Z_{n+1})
  //                   * (R_c (mu(n+1) Z_n - lambda Z_{n-1}) - h sum_{s<=n} w_s (n+1-s)).
  // Everything is kept relative to w_n, and differences are summed since the
  // current best, so gains that agree to many digits are still ordered.
  const auto& p = mdp.params();
  const double lambda = p.arrival_rate;
  ThresholdOptimum best{0, threshold_gain(mdp, 0)};
  if (lambda <= 0.0) return best;
  double z = 1.0;       // Z_n / w_n
  double z_prev = 0.0;  // Z_{n-1} / w_n
  double moment = 1.0;  // sum_{s<=n} w_s (n+1-s) / w_n
  double since_best = 0.0;
  for (int n = 0; n < mdp.capacity(); ++n) {
    const double mu_next = mdp.mu(n + 1);
    const double rho = lambda / mu_next;
    const double d = p.rejection_cost * (mu_next * z - lambda * z_prev) - p.holding_cost * moment;
    const double step = rho * d / (p.uniformization * z * (z + rho));
    if (!std::isfinite(step)) break;
    since_best += step;
    if (since_best > 0.0) {
      best.threshold = n + 1;
      since_best = 0.0;
    }
    z_prev = z / rho;
    moment = (moment + z + rho) / rho;
    z = (z + rho) / rho;
  }
  best.gain = threshold_gain(mdp, best.threshold);
  return best;
}

GainBias evaluate_policy(const AggregatedMdp& mdp, const Policy& policy) {
  const int n = mdp.n_states();
  const Matrix p = mdp.policy_matrix(policy);
  // Unknowns h(0..S), g.
  linalg::DenseMatrix a = linalg::DenseMatrix::Zero(n + 1, n + 1);
  linalg::DenseVector b = linalg::DenseVector::Zero(n + 1);
  for (int s = 0; s < n; ++s) {
    for (int t = 0; t < n; ++t) a(s, t) = (s == t ? 1.0 : 0.0) - p[s][t];
    a(s, n) = 1.0;
    b(s) = mdp.reward(s, policy(s));
  }
  a(n, n - 1) = 1.0;
  const linalg::DenseVector x = linalg::solve(a, b, 1e-9);
  GainBias out;
  out.gain = x(n);
  out.bias.assign(x.data(), x.data() + n);
  return out;
}

RviResult relative_value_iteration(const AggregatedMdp& mdp, double tolerance, long max_iterations) {
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  const int n = mdp.n_states();
  Vector u(static_cast<std::size_t>(n), 0.0);
  Vector bu(u.size());
  Vector diff(u.size());
  std::vector<int> greedy(u.size(), kReject);
  RviResult out;
  for (long it = 1;; ++it) {
    for (int s = 0; s < n; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a : {kReject, kAdmit}) {
        if (!mdp.admissible(s, a)) continue;
        const auto [down, stay, up] = mdp.transition(s, a);
        double v = mdp.reward(s, a) + stay * u[s];
        if (s > 0) v += down * u[s - 1];
        if (s + 1 < n) v += up * u[s + 1];
        if (v > best) {
          best = v;
          greedy[s] = a;
        }
      }
      bu[s] = best;
      diff[s] = bu[s] - u[s];
    }
    out.span = span(diff);
    out.iterations = it;
    if (out.span < tolerance) break;
    if (it >= max_iterations) {
      throw std::runtime_error("relative value iteration hit the iteration cap with span " + std::to_string(out.span));
    }
    const double ref = bu[static_cast<std::size_t>(n - 1)];
    for (int s = 0; s < n; ++s) u[s] = (1.0 - kDamping) * u[s] + kDamping * bu[s] - kDamping * ref;
  }
  out.policy = Policy(greedy);
  out.gain_bias = evaluate_policy(mdp, out.policy);
  return out;
}

Vector hitting_times(const AggregatedMdp& mdp, const Policy& policy) {
  const int cap = mdp.capacity();
  // step[s] = E tau_s - E tau_{s-1}
  Vector step(static_cast<std::size_t>(cap) + 2, 0.0);
  for (int s = cap; s >= 1; --s) {
    step[s] = (1.0 + mdp.birth_prob(s, policy(s)) * step[s + 1]) / mdp.death_prob(s);
  }
  Vector tau(static_cast<std::size_t>(cap) + 1, 0.0);
  for (int s = 1; s <= cap; ++s) tau[s] = tau[s - 1] + step[s];
  return tau;
}

Vector bias_variation_bound(const AggregatedMdp& mdp) {
  const Vector m_max = threshold_stationary_measure(mdp, mdp.capacity());
  const double factor = 2.0 * mdp.delta_max() / m_max[0];
  Vector delta(static_cast<std::size_t>(mdp.n_states()), 0.0);
  double acc = 0.0;
  for (int s = 1; s <= mdp.capacity(); ++s) {
    acc += mdp.params().uniformization / mdp.mu(s);
    delta[s] = factor * acc;
  }
  return delta;
}

namespace {

Vector policy_stationary(const AggregatedMdp& mdp, const Policy& policy) {
  const Matrix p = mdp.policy_matrix(policy);
  const int n = mdp.n_states();
  linalg::DenseMatrix dense(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) dense(i, j) = p[i][j];
  const linalg::DenseVector pi = linalg::stationary(dense);
  return Vector(pi.data(), pi.data() + n);
}

double tv(const Vector& a, const Vector& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return 0.5 * d;
}

}  // namespace

Vector tv_profile_from(const AggregatedMdp& mdp, const Policy& policy, int start, long horizon) {
  const Matrix p = mdp.policy_matrix(policy);
  const Vector pi = policy_stationary(mdp, policy);
  const auto n = static_cast<std::size_t>(mdp.n_states());
  Vector dist(n, 0.0);
  dist[static_cast<std::size_t>(start)] = 1.0;
  Vector next(n);
  Vector out;
  out.reserve(static_cast<std::size_t>(horizon) + 1);
  for (long t = 0; t <= horizon; ++t) {
    out.push_back(tv(dist, pi));
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (dist[i] == 0.0) continue;
      for (std::size_t j = (i > 0 ? i - 1 : 0); j <= std::min(i + 1, n - 1); ++j) next[j] += dist[i] * p[i][j];
    }
    dist.swap(next);
  }
  return out;
}

MixingProfile mixing_profile(const AggregatedMdp& mdp, const Policy& policy, long horizon) {
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  MixingProfile out;
  out.distance.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
  for (int s = 0; s < mdp.n_states(); ++s) {
    const Vector d = tv_profile_from(mdp, policy, s, horizon);
    for (std::size_t t = 0; t < d.size(); ++t) out.distance[t] = std::max(out.distance[t], d[t]);
  }
  for (long t = 0; t <= horizon; ++t) {
    if (out.distance[static_cast<std::size_t>(t)] <= 0.25) {
      out.mix_time = t;
      break;
    }
  }
  return out;
}

double diameter_estimate(const AggregatedMdp& mdp) {
  const int cap = mdp.capacity();
  if (cap == 0) return 0.0;
  const double inf = std::numeric_limits<double>::infinity();
  const auto n = static_cast<std::size_t>(cap) + 1;
  // best[s][t]: min over thresholds of the expected passage time s -> t.
  Matrix best(n, Vector(n, inf));
  for (int thr = 0; thr <= cap; ++thr) {
    const Policy pol = Policy::threshold(cap, thr);
    // Expected one-level passage times; birth-death paths cross every level.
    Vector up(n, inf);    // s -> s+1
    Vector down(n, inf);  // s -> s-1
    for (int s = 0; s < cap; ++s) {
      const double b = mdp.birth_prob(s, pol(s));
      if (b <= 0.0) break;
      const double prev = s > 0 ? up[s - 1] : 0.0;
      up[s] = (1.0 + mdp.death_prob(s) * prev) / b;
    }
    for (int s = cap; s >= 1; --s) {
      const double next = s < cap ? down[s + 1] : 0.0;
      const double b = mdp.birth_prob(s, pol(s));
      down[s] = (1.0 + (b > 0.0 ? b * next : 0.0)) / mdp.death_prob(s);
    }
    for (int from = 0; from <= cap; ++from) {
      double acc = 0.0;
      for (int to = from + 1; to <= cap; ++to) {
        acc += up[to - 1];
        best[from][to] = std::min(best[from][to], acc);
      }
      acc = 0.0;
      for (int to = from - 1; to >= 0; --to) {
        acc += down[to + 1];
        best[from][to] = std::min(best[from][to], acc);
      }
    }
  }
  double d = 0.0;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t t = 0; t < n; ++t)
      if (s != t) d = std::max(d, best[s][t]);
  return d;
}

}  // namespace qadmit
