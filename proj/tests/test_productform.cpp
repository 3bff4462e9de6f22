#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "qadmit/productform.hpp"

using namespace qadmit;
using qadmit::testing::random_spec;
using qadmit::testing::single_queue;
using qadmit::testing::tandem;

namespace {

// G(s) by explicit enumeration of all x with |x| = s.
double enumerated_g(const QueueingNetworkSpec& spec, int s) {
  const Vector v = solve_visit_ratios(spec);
  const StateSpace space(spec.n_queues, s);
  double g = 0.0;
  for (std::size_t k = 0; k < space.size(); ++k) {
    if (space.total(k) != s) continue;
    double term = 1.0;
    for (int i = 1; i <= spec.n_queues; ++i) {
      term *= std::pow(v[static_cast<std::size_t>(i)] / spec.mu(i), space.state(k)[static_cast<std::size_t>(i - 1)]);
    }
    g += term;
  }
  return g;
}

double sum(const Vector& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_SUITE("productform") {
  TEST_CASE("single-queue constants are geometric") {
    const NormalizingConstants g = convolution_constants(single_queue(1.0, 2.0, 4, 10, 1, 3));
    REQUIRE(g.capacity() == 4);
    for (int s = 0; s <= 4; ++s) CHECK(g.g(s) == doctest::Approx(std::pow(0.5, s)).epsilon(1e-14));
    const EquivalentQueue q = norton_throughput(g);
    CHECK(q(0) == 0.0);
    for (int s = 1; s <= 4; ++s) CHECK(q(s) == doctest::Approx(2.0).epsilon(1e-14));
  }

  TEST_CASE("tandem constants") {
    const NormalizingConstants g = convolution_constants(tandem(3));
    CHECK(g.g(0) == doctest::Approx(1.0));
    CHECK(g.g(1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g.g(2) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(g.g(3) == doctest::Approx(0.5).epsilon(1e-14));
    const EquivalentQueue q = equivalent_queue(tandem(3));
    CHECK(q(0) == 0.0);
    CHECK(q(1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(q(2) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
    CHECK(q(3) == doctest::Approx(1.5).epsilon(1e-14));
  }

  TEST_CASE("G(0) = 1 and capacity errors") {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 20; ++k) CHECK(convolution_constants(random_spec(rng, 4, 6)).g(0) == doctest::Approx(1.0));
    QueueingNetworkSpec s = tandem(2);
    s.capacity = 0;
    CHECK_THROWS_AS(convolution_constants(s), std::invalid_argument);
  }

  TEST_CASE("rescaling survives large capacities") {
    const QueueingNetworkSpec s = single_queue(1.0, 1e-3, 2000, 10, 1, 2.0);
    const NormalizingConstants g = convolution_constants(s);
    CHECK(std::isfinite(g.log_g(2000)));
    CHECK(g.log_g(2000) == doctest::Approx(2000 * std::log(1e3)).epsilon(1e-12));
    const EquivalentQueue q = norton_throughput(g);
    CHECK(q(2000) == doctest::Approx(1e-3).epsilon(1e-10));
  }

  TEST_CASE("convolution matches enumeration") {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 40; ++k) {
      const QueueingNetworkSpec s = random_spec(rng, 4, 5);
      const NormalizingConstants g = convolution_constants(s);
      for (int t = 0; t <= s.capacity; ++t) CHECK(g.g(t) == doctest::Approx(enumerated_g(s, t)).epsilon(1e-10));
    }
  }

  TEST_CASE("state space enumeration is lexicographic") {
    const StateSpace sp(2, 2);
    REQUIRE(sp.size() == 6);
    CHECK(StateSpace::count(2, 2) == 6.0);
    const std::vector<std::vector<int>> expected{{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {2, 0}};
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(sp.state(i) == expected[i]);
      CHECK(sp.index_of(expected[i]) == i);
    }
    CHECK(StateSpace::count(4, 6) == 210.0);
    CHECK_THROWS((void)sp.index_of({3, 0}));
  }

  TEST_CASE("product form on the single queue") {
    const FullMeasure m = product_form_measure(single_queue(), 2);
    REQUIRE(m.prob.size() == 3);
    CHECK(m.at({0}) == doctest::Approx(4.0 / 7.0).epsilon(1e-14));
    CHECK(m.at({1}) == doctest::Approx(2.0 / 7.0).epsilon(1e-14));
    CHECK(m.at({2}) == doctest::Approx(1.0 / 7.0).epsilon(1e-14));
    CHECK(aggregate_measure(m) == m.prob);
  }

  TEST_CASE("threshold 0 puts unit mass on the empty state") {
    std::mt19937_64 rng(7);
    const QueueingNetworkSpec s = random_spec(rng, 3, 4);
    const FullMeasure m = product_form_measure(s, 0);
    CHECK(m.at(std::vector<int>(static_cast<std::size_t>(s.n_queues), 0)) == 1.0);
    const Vector agg = aggregate_measure(m);
    CHECK(agg[0] == 1.0);
    for (std::size_t i = 1; i < agg.size(); ++i) CHECK(agg[i] == 0.0);

    const FullMeasure b = brute_force_stationary(s, Policy::threshold(s.capacity, 0));
    CHECK(b.at(std::vector<int>(static_cast<std::size_t>(s.n_queues), 0)) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("tandem with S = 1 is a three-term product") {
    const QueueingNetworkSpec s = tandem(1, 1.0, 2.0, 4.0);
    const FullMeasure m = product_form_measure(s, 1);
    const double z = 1.0 + 0.5 + 0.25;
    CHECK(m.at({0, 0}) == doctest::Approx(1.0 / z).epsilon(1e-14));
    CHECK(m.at({1, 0}) == doctest::Approx(0.5 / z).epsilon(1e-14));
    CHECK(m.at({0, 1}) == doctest::Approx(0.25 / z).epsilon(1e-14));
  }

  TEST_CASE("tandem aggregate at S = 2") {
    const Vector agg = aggregate_measure(product_form_measure(tandem(2), 2));
    CHECK(agg[0] == doctest::Approx(4.0 / 11.0).epsilon(1e-14));
    CHECK(agg[1] == doctest::Approx(4.0 / 11.0).epsilon(1e-14));
    CHECK(agg[2] == doctest::Approx(3.0 / 11.0).epsilon(1e-14));
  }

  TEST_CASE("brute force agrees with the product form") {
    const FullMeasure b = brute_force_stationary(single_queue(), Policy::accept_all(2));
    CHECK(b.at({0}) == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
    CHECK(b.at({1}) == doctest::Approx(2.0 / 7.0).epsilon(1e-12));
    CHECK(b.at({2}) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));

    const FullMeasure bt = brute_force_stationary(tandem(2), Policy::accept_all(2));
    const FullMeasure pt = product_form_measure(tandem(2), 2);
    for (std::size_t i = 0; i < bt.prob.size(); ++i) CHECK(std::abs(bt.prob[i] - pt.prob[i]) <= 1e-10);
  }

  TEST_CASE("measures are normalized") {
    std::mt19937_64 rng(9);
    for (int k = 0; k < 20; ++k) {
      const QueueingNetworkSpec s = random_spec(rng, 4, 6);
      for (int n = 0; n <= s.capacity; ++n) CHECK(std::abs(sum(product_form_measure(s, n).prob) - 1.0) <= 1e-12);
    }
  }

  TEST_CASE("state limit") {
    const QueueingNetworkSpec s = build_multi_tier(MultiTierParams::preset(6));
    CHECK_THROWS_AS(product_form_measure(s, s.capacity), std::length_error);
    CHECK_THROWS_AS(brute_force_stationary(s, Policy::accept_all(s.capacity)), std::length_error);
    CHECK_THROWS_AS(product_form_measure(tandem(3), 3, 5), std::length_error);
    CHECK_THROWS(product_form_measure(tandem(3), 4));
  }

  TEST_CASE("closed kernel rows are stochastic") {
    std::mt19937_64 rng(13);
    for (int k = 0; k < 10; ++k) {
      const QueueingNetworkSpec s = random_spec(rng, 3, 4);
      const StateSpace space(s.n_queues, s.capacity);
      const auto rows = closed_chain_kernel(s, space, Policy::accept_all(s.capacity));
      for (const auto& row : rows) {
        double total = 0.0;
        for (const auto& e : row) {
          CHECK(e.prob >= 0.0);
          total += e.prob;
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
      }
    }
  }

  TEST_CASE("conditional throughput equals the Norton rate") {
    std::mt19937_64 rng(17);
    for (int k = 0; k < 20; ++k) {
      const QueueingNetworkSpec s = random_spec(rng, 4, 5);
      const EquivalentQueue q = equivalent_queue(s);
      const FullMeasure b = brute_force_stationary(s, Policy::accept_all(s.capacity));
      const Vector rate = conditional_departure_rate(s, b);
      for (int t = 1; t <= s.capacity; ++t) {
        CHECK(std::abs(rate[static_cast<std::size_t>(t)] - q(t)) <= 1e-9 * q(t));
      }
    }
  }

  TEST_CASE("property: Norton rates increase, are concave and bounded") {
    std::mt19937_64 rng(19);
    for (int k = 0; k < 100; ++k) {
      const QueueingNetworkSpec s = random_spec(rng, 6, 12);
      const EquivalentQueue q = equivalent_queue(s);
      CHECK(q(0) == 0.0);
      for (int t = 1; t <= s.capacity; ++t) {
        CHECK(q(t) > 0.0);
        CHECK(q(t) >= q(t - 1) - 1e-12);
        CHECK(q(t) <= s.total_service_rate() + 1e-12);
        if (t >= 2) CHECK(q(t) - q(t - 1) <= q(t - 1) - q(t - 2) + 1e-12);
      }
    }
  }

  TEST_CASE("departure rate is NaN where the measure vanishes") {
    const QueueingNetworkSpec s = tandem(3);
    const FullMeasure b = brute_force_stationary(s, Policy::threshold(3, 1));
    const Vector rate = conditional_departure_rate(s, b);
    CHECK(rate[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::isnan(rate[2]));
    CHECK(std::isnan(rate[3]));
    const Matrix kern = aggregated_kernel(s, b, Policy::threshold(3, 1));
    CHECK(std::isnan(kern[3][3]));
  }
}
