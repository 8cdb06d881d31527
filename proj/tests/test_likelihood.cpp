#include "simile/likelihood.hpp"

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace simile;
namespace quad = boost::math::quadrature;

namespace {

const FlowgraphParams kFlow{6.0, 136.0 / 13.0, 4.0, 16.0 / 7.0, 10.0, 100.0 / 12.0, 0.4};

Matrix to_matrix(const std::vector<double>& v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

std::vector<double> normal_sample(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> y(n);
  for (double& v : y) v = nd(eng);
  return y;
}

double phi_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Always returns the same value; lands every draw in one place.
class ConstantSimulator final : public Simulator {
 public:
  explicit ConstantSimulator(double v) : v_(v) {}
  std::size_t dim() const override { return 1; }
  void fill(Engine&, std::span<double> out) const override { std::fill(out.begin(), out.end(), v_); }

 private:
  double v_;
};

// Trapezoids on the lattice nodes integrate the piecewise-linear density exactly.
double integrate_tabulated(const FirstPassageDensity& d, double a, double b) {
  std::vector<double> knots{a};
  for (std::size_t j = 0; j < d.pdf.size(); ++j) {
    const double t = d.step * static_cast<double>(j);
    if (t > a && t < b) knots.push_back(t);
  }
  knots.push_back(b);
  double s = 0.0;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    s += 0.5 * (knots[i] - knots[i - 1]) * (d.pdf_at(knots[i]) + d.pdf_at(knots[i - 1]));
  }
  return s;
}

double gamma_pdf(GammaShapeRate g, double t) {
  return boost::math::pdf(boost::math::gamma_distribution<double>(g.shape, 1.0 / g.rate), t);
}

}  // namespace

TEST_SUITE("likelihood") {
  TEST_CASE("simile estimate on hand-built counts") {
    ObservedCells obs{{{1, 2}, {3, 1}}, 3};
    const std::vector<std::uint64_t> counts{5, 10, 0, 85};
    const auto ll = loglik_from_counts(counts, obs, 100);
    CHECK(ll.value == doctest::Approx(2 * std::log(0.1) + std::log(0.85)));
    CHECK(ll.zero_cells == 0);
    const std::vector<std::uint64_t> hole{5, 0, 10, 85};
    const auto bad = loglik_from_counts(hole, obs, 100);
    CHECK(std::isinf(bad.value));
    CHECK(bad.value < 0);
    CHECK(bad.zero_cells == 1);
  }

  TEST_CASE("degenerate and unreachable simulators") {
    const auto y = to_matrix({0.0, 1.0, 2.0, 0.1});
    const auto grid = build_grid(y, 4, Support::real_line());
    const auto one = observed_cells(grid, to_matrix({0.05, 0.1}));
    const auto ll = simile_loglik(ConstantSimulator(0.0), grid, one, 1000, RngStream(1, 3));
    CHECK(ll.value == 0.0);
    const auto far = simile_loglik(ConstantSimulator(100.0), grid, one, 1000, RngStream(1, 3));
    CHECK(std::isinf(far.value));
    CHECK(far.zero_cells == 1);
  }

  TEST_CASE("cell counts do not depend on the worker count") {
    const auto y = normal_sample(25, 4);
    const auto grid = build_grid(to_matrix(y), 50, Support::real_line());
    const auto sim = make_simulator(ModelSpec{ModelId::normal, {0.5}});
    const std::size_t n = 5 * kChunkSize + 17;
    const auto a = simulate_cell_counts(*sim, grid, n, RngStream(9, 3), 1);
    const auto b = simulate_cell_counts(*sim, grid, n, RngStream(9, 3), 4);
    CHECK(a == b);
    std::uint64_t total = 0;
    for (auto c : a) total += c;
    CHECK(total == n);
  }

  TEST_CASE("estimate converges to the exact interval-censored value") {
    const auto y = normal_sample(25, 12);
    const auto grid = build_grid(to_matrix(y), 50, Support::real_line());
    const auto cells = observed_cells(grid, to_matrix(y));
    const double mu = 0.3;
    const auto p = normal_cell_probabilities(grid, mu);
    double exact = 0.0;
    double var_unit = 0.0;
    for (const auto& [c, m] : cells.cells) {
      exact += static_cast<double>(m) * std::log(p[c]);
      var_unit += static_cast<double>(m * m) * (1 - p[c]) / p[c];
    }
    const auto sim = make_simulator(ModelSpec{ModelId::normal, {mu}});
    double previous = kInf;
    for (std::size_t n_sim : {10'000u, 100'000u, 1'000'000u}) {
      double mean_abs = 0.0;
      const int reps = 8;
      for (int r = 0; r < reps; ++r) {
        const auto ll = simile_loglik(*sim, grid, cells, n_sim, RngStream(100 + r, 3, n_sim));
        REQUIRE(ll.is_finite());
        const double bound = 5.0 * std::sqrt(var_unit / static_cast<double>(n_sim));
        CHECK(std::abs(ll.value - exact) < bound);
        mean_abs += std::abs(ll.value - exact) / reps;
      }
      CHECK(mean_abs < previous);
      previous = mean_abs;
    }
  }

  TEST_CASE("-inf estimates become rarer as nSim grows") {
    const auto y = normal_sample(25, 21);
    const auto grid = build_grid(to_matrix(y), 50, Support::real_line());
    const auto cells = observed_cells(grid, to_matrix(y));
    std::mt19937_64 eng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> mus(100);
    for (double& m : mus) m = u(eng);
    std::size_t previous = 101;
    for (std::size_t n_sim : {300u, 3'000u, 30'000u}) {
      std::size_t neg_inf = 0;
      for (std::size_t i = 0; i < mus.size(); ++i) {
        const auto ll = simile_loglik(ModelSpec{ModelId::normal, {mus[i]}}, grid, cells, n_sim, RngStream(5, 3, i));
        if (!ll.is_finite()) ++neg_inf;
      }
      MESSAGE("nSim=" << n_sim << " -inf count " << neg_inf);
      CHECK(neg_inf < previous);
      previous = neg_inf;
    }
  }

  TEST_CASE("exact normal and lognormal likelihoods") {
    const std::vector<double> one{0.7};
    CHECK(exact_loglik_normal(0.7, 1.0, one) == doctest::Approx(-std::log(std::sqrt(2 * std::numbers::pi))));
    const auto y = normal_sample(10, 2);
    std::vector<double> shifted(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) shifted[i] = y[i] - 1.3;
    CHECK(exact_loglik_normal(1.3, 1.0, y) == doctest::Approx(exact_loglik_normal(0.0, 1.0, shifted)));

    const double mu = 0.4;
    const std::vector<double> ey{std::exp(mu)};
    CHECK(exact_loglik_lognormal(mu, 1.0, ey) ==
          doctest::Approx(-std::log(std::sqrt(2 * std::numbers::pi)) - mu));
    std::vector<double> pos(y.size()), logs(y.size());
    double sum_log = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      pos[i] = std::exp(y[i]);
      logs[i] = y[i];
      sum_log += y[i];
    }
    CHECK(exact_loglik_lognormal(-0.2, 1.4, pos) ==
          doctest::Approx(exact_loglik_normal(-0.2, 1.4, logs) - sum_log));
  }

  TEST_CASE("indirect density integrates to one") {
    for (auto [mu, sigma] : {std::pair{0.0, 1.0}, std::pair{-0.5, 0.4}, std::pair{1.0, 2.0}}) {
      quad::exp_sinh<double> integrator;
      const double total = integrator.integrate([&](double y) { return indirect_pdf(y, mu, sigma); });
      CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(indirect_pdf(0.0, 0.0, 1.0) == 0.0);
  }

  TEST_CASE("indirect density matches simulation in every decile") {
    const std::size_t n = 10'000'000;
    auto draws = simulate_indirect(0.0, 1.0, n, RngStream(3, 1));
    std::sort(draws.begin(), draws.end());
    std::vector<double> edges{0.0};
    for (int k = 1; k < 10; ++k) edges.push_back(draws[n * k / 10]);
    edges.push_back(kInf);
    const double se = std::sqrt(0.1 * 0.9 / static_cast<double>(n));
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
      double mass;
      auto f = [](double y) { return indirect_pdf(y, 0.0, 1.0); };
      if (std::isinf(edges[k + 1])) {
        mass = quad::exp_sinh<double>().integrate(f, edges[k], kInf);
      } else {
        mass = quad::gauss_kronrod<double, 61>::integrate(f, edges[k], edges[k + 1], 15, 1e-12);
      }
      CHECK(std::abs(mass - 0.1) < 4 * se);
    }
  }

  TEST_CASE("network density against one-dimensional quadrature") {
    std::mt19937_64 eng(19);
    std::uniform_real_distribution<double> rate(0.01, 1.0), pt(0.01, 60.0);
    auto oracle = [](double l1, double l2, double l3, double y1, double y2) {
      const double m = std::min(y1, y2);
      auto g = [=](double x) {
        return l1 * std::exp(-l1 * x) * l2 * std::exp(-l2 * (y1 - x)) * l3 * std::exp(-l3 * (y2 - x));
      };
      return quad::gauss_kronrod<double, 61>::integrate(g, 0.0, m, 15, 1e-14);
    };
    for (int i = 0; i < 100; ++i) {
      double l1 = rate(eng);
      const double l2 = rate(eng), l3 = rate(eng);
      if (i % 10 == 0) l1 = l2 + l3;  // the a = 0 branch
      const double y1 = pt(eng), y2 = pt(eng);
      const double want = oracle(l1, l2, l3, y1, y2);
      const double got = network_pdf(l1, l2, l3, y1, y2);
      CHECK(std::abs(got - want) <= 1e-10 * want);
    }
    CHECK(network_pdf(0.3, 0.1, 0.1, 0.0, 5.0) == 0.0);
    CHECK(network_pdf(0.3, 0.1, 0.1, 5.0, 0.0) == 0.0);
  }

  TEST_CASE("network density integrates to one") {
    const double l1 = 0.3, l2 = 1.0 / 15.0, l3 = 1.0 / 40.0;
    // Outer y1, inner y2 split at the kink y2 = y1. The square [0, 2000]^2
    // leaves out less than 1e-20 of the mass.
    const double upper = 2000.0;
    auto inner = [&](double y1) {
      auto f = [&](double y2) { return network_pdf(l1, l2, l3, y1, y2); };
      return quad::gauss_kronrod<double, 61>::integrate(f, 0.0, y1, 15, 1e-11) +
             quad::gauss_kronrod<double, 61>::integrate(f, y1, upper, 15, 1e-11);
    };
    const double total = quad::gauss_kronrod<double, 61>::integrate(inner, 0.0, upper, 15, 1e-10);
    CHECK(std::abs(total - 1.0) < 1e-4);
  }

  TEST_CASE("flowgraph oracle without loops is the convolution of two gammas") {
    FlowgraphParams no_loop = kFlow;
    no_loop.p = 1e-12;
    const auto density = flowgraph_pdf_oracle(no_loop, 90.0, std::size_t{1} << 15);
    CHECK(density.loop_terms == 0);
    const auto a = no_loop.g01(), c = no_loop.g12();
    for (double t : {1.0, 5.0, 10.0, 16.0, 25.0, 40.0, 60.0}) {
      auto f = [&](double s) { return gamma_pdf(a, s) * gamma_pdf(c, t - s); };
      const double want = quad::gauss_kronrod<double, 61>::integrate(f, 0.0, t, 20, 1e-13);
      CHECK(std::abs(density.pdf_at(t) - want) < 1e-6);
    }
  }

  TEST_CASE("flowgraph oracle mean and simulation deciles") {
    const auto density = flowgraph_pdf_oracle(kFlow, std::span<const double>{});
    CHECK(density.deficit < 1e-3);
    double mean = 0.0, mass = 0.0;
    for (std::size_t j = 0; j < density.pdf.size(); ++j) {
      mean += density.step * static_cast<double>(j) * density.pdf[j] * density.step;
      mass += density.pdf[j] * density.step;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::abs(mean - kFlow.first_passage_mean()) < 2 * density.step);

    const std::size_t n = 10'000'000;
    auto draws = simulate_flowgraph02(kFlow, n, RngStream(8, 1));
    std::sort(draws.begin(), draws.end());
    const double se = std::sqrt(0.1 * 0.9 / static_cast<double>(n));
    double prev = 0.0;
    for (int k = 1; k <= 10; ++k) {
      const double hi = k < 10 ? draws[n * static_cast<std::size_t>(k) / 10] : density.t_max();
      const double m = integrate_tabulated(density, prev, hi);
      const double want = k < 10 ? 0.1 : 0.1 - density.deficit;
      CHECK(std::abs(m - want) < 4 * se + 1e-4);
      prev = hi;
    }
  }

  TEST_CASE("flowgraph explicit components") {
    FlowgraphComponentData comp;
    comp.t01 = {5.0, 7.0, 3.0};
    comp.t10 = {4.0};
    comp.t12 = {9.0, 12.0};
    comp.x = 1;
    comp.n = 3;
    const auto theta = kFlow.to_theta();
    double want = 0.0;
    for (double t : comp.t01) want += std::log(gamma_pdf(kFlow.g01(), t));
    for (double t : comp.t10) want += std::log(gamma_pdf(kFlow.g10(), t));
    for (double t : comp.t12) want += std::log(gamma_pdf(kFlow.g12(), t));
    want += std::log(3 * 0.4 * 0.6 * 0.6);
    const auto set = make_flowgraph_likelihood(FlowgraphData{comp, {}}, ZeroTwoMode::oracle);
    CHECK(set.components().size() == 4);
    CHECK(set.evaluate(theta, 0).value == doctest::Approx(want).epsilon(1e-12));
    CHECK(flowgraph_joint_loglik(kFlow, FlowgraphData{comp, {}}, ZeroTwoMode::simile).value ==
          doctest::Approx(want).epsilon(1e-12));

    CHECK(binomial_logpmf(0, 28, 1e-300) == doctest::Approx(0.0));
    CHECK(binomial_logpmf(0, 0, 0.3) == 0.0);

    const std::vector<double> t02{20.0, 25.0};
    const auto with = make_flowgraph_likelihood(FlowgraphData{comp, t02}, ZeroTwoMode::oracle);
    const auto density = flowgraph_pdf_oracle(kFlow, t02);
    CHECK(with.evaluate(theta, 0).value ==
          doctest::Approx(want + std::log(density.pdf_at(20.0)) + std::log(density.pdf_at(25.0))));
  }

  TEST_CASE("conjugate normal oracle") {
    const std::vector<double> none;
    const auto prior = conjugate_posterior_oracle(1.0, 10.0, none);
    CHECK(prior.mean == 1.0);
    CHECK(prior.sd == doctest::Approx(10.0));
    const auto y = normal_sample(25, 8);
    double ybar = 0;
    for (double v : y) ybar += v / 25.0;
    const auto flat = conjugate_posterior_oracle(1.0, 1e12, y);
    CHECK(flat.mean == doctest::Approx(ybar));
    CHECK(flat.sd == doctest::Approx(0.2));
    const auto post = conjugate_posterior_oracle(1.0, 10.0, y);
    CHECK(post.sd == doctest::Approx(1.0 / std::sqrt(25.0 + 0.01)));
    CHECK(std::round(post.sd * 1000) / 1000 == doctest::Approx(0.200));
  }

  TEST_CASE("normal cell probabilities sum to one") {
    const auto y = normal_sample(25, 1);
    const auto grid = build_grid(to_matrix(y), 50, Support::real_line());
    const auto p = normal_cell_probabilities(grid, 0.5);
    double s = 0;
    for (double v : p) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    const auto [lo, hi] = grid.axis(0).bounds(3);
    CHECK(p[3] == doctest::Approx(phi_cdf(hi - 0.5) - phi_cdf(lo - 0.5)));
  }
}
