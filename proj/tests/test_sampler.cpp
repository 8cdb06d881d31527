#include "simile/sampler.hpp"
#include "simile/transforms.hpp"

#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/normal.hpp>
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace simile;

namespace {

std::vector<double> normal_sample(std::size_t n, double mu, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> nd(mu, 1.0);
  std::vector<double> y(n);
  for (double& v : y) v = nd(eng);
  return y;
}

LogLikFn exact_normal(std::vector<double> y, double shift = 0.0) {
  return [y = std::move(y), shift](std::span<const double> t, std::uint64_t) {
    return LogLikelihood::exact(exact_loglik_normal(t[0], 1.0, y) + shift);
  };
}

std::vector<double> column(const Matrix& m, Eigen::Index c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, c);
  return out;
}

// Kolmogorov-Smirnov distance of an exact-likelihood chain's kept draws to
// the analytic conjugate posterior.
double conjugate_ks(std::size_t n_keep, std::uint64_t seed) {
  const auto y = normal_sample(25, 0.0, 2024);
  const std::vector<Prior> priors{{PriorFamily::normal, 1.0, 10.0}};
  ChainConfig c;
  c.n_burn = 1000;
  c.n_keep = n_keep;
  c.seed = seed;
  const auto d = mh_run(exact_normal(y), priors, c);
  auto sorted = column(d.draws, 0);
  std::sort(sorted.begin(), sorted.end());
  const auto oracle = conjugate_posterior_oracle(1.0, 10.0, y);
  const boost::math::normal_distribution<double> post(oracle.mean, oracle.sd);
  double ks = 0.0;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = boost::math::cdf(post, sorted[i]);
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
  }
  return ks;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("simile_test_" + name);
}

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("transforms round-trip and jacobians") {
    const std::vector<ParamSupport> sup{ParamSupport::real, ParamSupport::positive, ParamSupport::unit};
    const std::vector<double> theta{-1.7, 0.03, 0.42};
    const auto back = from_unconstrained(sup, to_unconstrained(sup, theta));
    for (std::size_t i = 0; i < 3; ++i) CHECK(back[i] == doctest::Approx(theta[i]).epsilon(1e-12));
    CHECK(to_unconstrained(ParamSupport::unit, 0.5) == 0.0);
    CHECK(log_jacobian(ParamSupport::unit, 0.0) == doctest::Approx(std::log(0.25)));
    CHECK(log_jacobian(ParamSupport::positive, 0.7) == doctest::Approx(0.7));
    CHECK(log_jacobian(ParamSupport::unit, 800.0) == doctest::Approx(-800.0));
    CHECK_THROWS(to_unconstrained(ParamSupport::positive, -1.0));
    CHECK_THROWS(to_unconstrained(ParamSupport::unit, 1.0));
  }

  TEST_CASE("prior densities") {
    const Prior n{PriorFamily::normal, 0.0, 10.0};
    CHECK(n.log_density(0.0) == doctest::Approx(-std::log(10.0 * std::sqrt(2 * std::numbers::pi))));
    CHECK(n.log_density(0.0) == doctest::Approx(-3.2215).epsilon(1e-4));

    const Prior ln{PriorFamily::lognormal, 0.3, 1.7};
    for (double x : {0.01, 0.5, 1.0, 7.0}) {
      CHECK(ln.log_density(x) ==
            doctest::Approx(std::log(boost::math::pdf(boost::math::lognormal_distribution<double>(0.3, 1.7), x))));
      // normal density on log x plus the jacobian of x -> log x
      const double on_log = std::log(boost::math::pdf(boost::math::normal_distribution<double>(0.3, 1.7), std::log(x)));
      CHECK(ln.log_density(x) == doctest::Approx(on_log - std::log(x)));
    }
    const Prior wide{PriorFamily::lognormal, 0.0, 10.0};
    CHECK(std::isinf(wide.log_density(0.0)));
    CHECK(std::isfinite(wide.log_density(1e-300)));

    const Prior lg{PriorFamily::logit_normal, 0.0, 3.0};
    const double p = 0.4, lp = std::log(p / (1 - p));
    CHECK(lg.log_density(p) ==
          doctest::Approx(std::log(boost::math::pdf(boost::math::normal_distribution<double>(0.0, 3.0), lp)) -
                          std::log(p * (1 - p))));
    CHECK(std::isinf(lg.log_density(1.0)));
    CHECK(lg.median() == doctest::Approx(0.5));

    const double truth[7] = {6.0, 136.0 / 13.0, 4.0, 16.0 / 7.0, 10.0, 100.0 / 12.0, 0.4};
    std::vector<Prior> priors;
    double want = 0.0;
    for (int i = 0; i < 6; ++i) {
      priors.push_back({PriorFamily::lognormal, std::log(truth[i]), 3.0});
      want += std::log(boost::math::pdf(boost::math::lognormal_distribution<double>(std::log(truth[i]), 3.0), truth[i]));
    }
    priors.push_back(lg);
    want += lg.log_density(0.4);
    const double got = log_prior(priors, truth);
    CHECK(std::isfinite(got));
    CHECK(got == doctest::Approx(want));

    const auto j = Prior::from_json(nlohmann::json::parse(R"({"family": "logit-normal", "m": 0, "s": 3})"));
    CHECK(j.family == PriorFamily::logit_normal);
    CHECK_THROWS(Prior::from_json(nlohmann::json::parse(R"({"family": "cauchy", "m": 0, "s": 3})")));
  }

  TEST_CASE("zero proposal scale keeps the chain at its start") {
    const std::vector<Prior> priors{{PriorFamily::normal, 1.0, 10.0}};
    ChainConfig c;
    c.n_burn = 50;
    c.n_keep = 200;
    c.initial = {0.25};
    c.scales = {0.0};
    const auto d = mh_run(exact_normal(normal_sample(25, 0.0, 1)), priors, c);
    for (Eigen::Index i = 0; i < d.draws.rows(); ++i) REQUIRE(d.draws(i, 0) == 0.25);
    CHECK(d.acceptance_rate == 1.0);
  }

  TEST_CASE("exact-likelihood chain matches the conjugate posterior") {
    const auto y = normal_sample(25, 0.0, 2024);
    const std::vector<Prior> priors{{PriorFamily::normal, 1.0, 10.0}};
    ChainConfig c;
    c.n_burn = 1000;
    c.n_keep = 10000;
    c.seed = 1;
    const auto d = mh_run(exact_normal(y), priors, c, {"mu"});
    const auto oracle = conjugate_posterior_oracle(1.0, 10.0, y);
    const auto mu = column(d.draws, 0);
    const auto s = summarize_column(mu, "mu");
    CHECK(std::abs(s.mean - oracle.mean) < 3 * mcse_mean(mu));
    CHECK(std::abs(s.sd / oracle.sd - 1.0) < 0.05);
  }

  TEST_CASE("kept draws follow the analytic posterior at nKeep = 10^4") {
    const double ks = conjugate_ks(10'000, 1);
    MESSAGE("KS distance " << ks);
    CHECK(ks < 0.02);
  }

  TEST_CASE("KS distance to the analytic posterior shrinks with chain length") {
    const double ks = conjugate_ks(1'000'000, 1);
    MESSAGE("KS distance at nKeep = 10^6: " << ks);
    CHECK(ks < 0.005);
  }

  TEST_CASE("-inf candidates are never accepted") {
    const std::vector<Prior> priors{{PriorFamily::normal, 0.0, 1.0}};
    ChainConfig c;
    c.n_burn = 100;
    c.n_keep = 500;
    c.initial = {0.3};
    c.scales = {1.0};
    LogLikFn only_start = [](std::span<const double>, std::uint64_t id) {
      return LogLikelihood{id == 0 ? -1.0 : -kInf, 10, id == 0 ? 0u : 1u};
    };
    const auto d = mh_run(only_start, priors, c);
    for (Eigen::Index i = 0; i < d.draws.rows(); ++i) REQUIRE(d.draws(i, 0) == 0.3);
    CHECK(d.neg_inf_rejections + d.prior_rejections == 600);
    CHECK(d.neg_inf_rejections > 0);
    CHECK(d.acceptance_rate == 0.0);

    LogLikFn half_line = [](std::span<const double> t, std::uint64_t) {
      return t[0] > 0.5 ? LogLikelihood{-kInf, 1, 1} : LogLikelihood::exact(0.0);
    };
    c.initial = {0.0};
    const auto h = mh_run(half_line, priors, c);
    CHECK(h.draws.maxCoeff() <= 0.5);
    CHECK(h.neg_inf_rejections > 0);
  }

  TEST_CASE("seed determinism and constant-shift invariance") {
    const auto y = normal_sample(25, 0.0, 5);
    const std::vector<Prior> priors{{PriorFamily::normal, 1.0, 10.0}};
    ChainConfig c;
    c.n_burn = 300;
    c.n_keep = 1000;
    c.seed = 17;
    const auto a = mh_run(exact_normal(y), priors, c);
    const auto b = mh_run(exact_normal(y), priors, c);
    CHECK(a.draws == b.draws);
    const auto shifted = mh_run(exact_normal(y, 123.4), priors, c);
    CHECK(a.draws == shifted.draws);
    c.seed = 18;
    const auto other = mh_run(exact_normal(y), priors, c);
    CHECK_FALSE(a.draws == other.draws);
  }

  TEST_CASE("adaptation shrinks, grows and freezes after burnin") {
    const std::vector<double> s{1.0, 2.0};
    const auto down = adapt_scales(s, 0, 25);
    CHECK(down[0] == doctest::Approx(1.0 / 1.1));
    const auto up = adapt_scales(s, 25, 25);
    CHECK(up[1] == doctest::Approx(2.2));
    const auto same = adapt_scales(s, 8, 25);
    CHECK(same == s);

    const std::vector<Prior> priors{{PriorFamily::normal, 1.0, 10.0}, {PriorFamily::lognormal, 0.0, 10.0}};
    LogLikFn ll = [y = normal_sample(25, 0.0, 3)](std::span<const double> t, std::uint64_t) {
      return LogLikelihood::exact(exact_loglik_normal(t[0], t[1], y));
    };
    ChainConfig c;
    c.n_burn = 500;
    c.n_keep = 2000;
    c.scales = {2.0, 2.0};
    const auto d = mh_run(ll, priors, c);
    REQUIRE(d.adaptation.size() == 20);
    CHECK(d.adaptation.back().iteration == 500);
    CHECK(d.final_scales == d.adaptation.back().scales);
    CHECK(d.final_scales[0] < 2.0);
  }

  TEST_CASE("quantiles and summaries") {
    std::vector<double> x(100);
    for (int i = 0; i < 100; ++i) x[static_cast<std::size_t>(i)] = i + 1;
    CHECK(quantile_sorted(x, 0.5) == doctest::Approx(50.5));
    CHECK(quantile_sorted(x, 0.025) == doctest::Approx(3.475));
    CHECK(quantile_sorted(x, 0.975) == doctest::Approx(97.525));
    const std::vector<double> c(50, 2.5);
    const auto s = summarize_column(c, "c");
    CHECK(s.mean == 2.5);
    CHECK(s.sd == 0.0);
    CHECK(s.q025 == 2.5);
    CHECK(s.q50 == 2.5);
    CHECK(s.q975 == 2.5);

    const auto iid = normal_sample(4000, 0.0, 9);
    const double ess = effective_sample_size(iid);
    CHECK(ess > 3000);
    CHECK(ess < 5500);
    std::vector<double> sticky;
    for (double v : normal_sample(400, 0.0, 10)) sticky.insert(sticky.end(), 10, v);
    CHECK(effective_sample_size(sticky) < 800);
  }

  TEST_CASE("summary table layout") {
    std::vector<ParameterSummary> rows{{"mu", -0.2241, 0.2012, -0.62, -0.22, 0.17}};
    const auto t = format_summary_table(rows, "Exact");
    CHECK(t.find("Method") == 0);
    CHECK(t.find("Std.Dev.") != std::string::npos);
    CHECK(t.find("-0.224") != std::string::npos);
    CHECK(t.find("0.201") != std::string::npos);
  }

  TEST_CASE("trace export") {
    PosteriorDraws empty;
    empty.names = {"mu"};
    CHECK_THROWS(export_trace(empty, temp_file("empty.csv")));
    PosteriorDraws d;
    d.names = {"mu", "sigma"};
    d.draws.resize(3, 2);
    d.draws << 0.1, 1.0, -0.3333333333333333, 1.25, 1e-17, 3.0;
    const auto path = temp_file("trace.csv");
    export_trace(d, path);
    std::ifstream in(path);
    std::size_t lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    CHECK(lines == 4);
    const auto back = read_trace(path);
    CHECK(back.names == d.names);
    CHECK(back.draws == d.draws);
    std::filesystem::remove(path);
  }
}
