#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "felogit/cmle.hpp"
#include "felogit/localpoly.hpp"
#include "felogit/montecarlo.hpp"
#include "felogit/stats.hpp"
#include "support/test_helpers.hpp"

using namespace felogit;

TEST_CASE("R_n rule values") {
  CHECK(default_undersmoothing(500) == doctest::Approx(5.0));
  CHECK(default_undersmoothing(1000) == doctest::Approx(20.0));
}

TEST_CASE("constant responses are reproduced exactly") {
  const DgpConfig cfg{.dgp = 1, .T = 2, .n = 200, .beta0 = 1.0, .seed = 3};
  PanelDataset data = generate(cfg);
  // force S = 1 for everyone
  for (auto& u : data.individuals) {
    u.y = {1, 0};
    u.s = 1;
  }
  const std::vector<double> g =
      local_poly_fit(data, Eigen::Vector2d(0.1, -0.2), 1, 0.5);
  CHECK(g[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g[2] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("huge bandwidth with degree 0 recovers sample frequencies") {
  const DgpConfig cfg{.dgp = 2, .T = 2, .n = 300, .beta0 = 1.0, .seed = 4};
  const PanelDataset data = generate(cfg);
  std::vector<double> freq(3, 0.0);
  for (const auto& u : data.individuals) {
    freq[static_cast<std::size_t>(u.s)] += 1.0 / data.size();
  }
  const std::vector<double> g =
      local_poly_fit(data, Eigen::Vector2d(0.0, 0.0), 0, 1e6);
  for (int j = 0; j <= 2; ++j) {
    CHECK(g[static_cast<std::size_t>(j)] ==
          doctest::Approx(freq[static_cast<std::size_t>(j)]).epsilon(1e-9));
  }
}

TEST_CASE("polynomial responses of degree <= ell are fitted exactly") {
  Rng rng(51);
  const int n = 120;
  Eigen::MatrixXd x(n, 2);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(-1.0, 1.0);
    x(i, 1) = rng.uniform(-1.0, 1.0);
  }
  const Eigen::VectorXd scales = Eigen::VectorXd::Ones(2);
  for (int ell = 1; ell <= 2; ++ell) {
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      const double a = x(i, 0);
      const double b = x(i, 1);
      y(i) = 0.3 + 1.2 * a - 0.7 * b;
      if (ell >= 2) y(i) += 0.5 * a * a - 0.9 * a * b + 0.25 * b * b;
    }
    const Eigen::Vector2d x0(0.21, -0.37);
    const double fitted = local_poly_smooth(x, y, x0, ell, 0.8, scales);
    double truth = 0.3 + 1.2 * x0(0) - 0.7 * x0(1);
    if (ell >= 2) {
      truth += 0.5 * x0(0) * x0(0) - 0.9 * x0(0) * x0(1) +
               0.25 * x0(1) * x0(1);
    }
    CHECK(fitted == doctest::Approx(truth).epsilon(1e-10));
  }
}

TEST_CASE("output is a probability vector and is order invariant") {
  const DgpConfig cfg{.dgp = 2, .T = 2, .n = 250, .beta0 = 1.0, .seed = 8};
  PanelDataset data = generate(cfg);
  const CmleFit fit = fit_cmle(data);
  const GammaEstimate est = make_gamma_estimate(data, fit, 5.0);

  Rng rng(9);
  Eigen::VectorXd q(2);
  for (int trial = 0; trial < 25; ++trial) {
    q << rng.uniform(-0.45, 0.45), rng.uniform(-0.45, 0.45);
    const std::vector<double> g = est.gamma(q);
    double total = 0.0;
    for (double v : g) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      total += v;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }

  PanelDataset shuffled = data;
  std::mt19937 mix(123);
  std::shuffle(shuffled.individuals.begin(), shuffled.individuals.end(), mix);
  const GammaEstimate est2 = make_gamma_estimate(shuffled, fit, 5.0);
  q << 0.05, -0.11;
  const std::vector<double> a = est.gamma(q);
  const std::vector<double> b = est2.gamma(q);
  for (int j = 0; j <= 2; ++j) {
    CHECK(a[static_cast<std::size_t>(j)] ==
          doctest::Approx(b[static_cast<std::size_t>(j)]).epsilon(1e-9));
  }
}

TEST_CASE("bandwidth rule behaviour") {
  const DgpConfig cfg{.dgp = 1, .T = 2, .n = 500, .beta0 = 1.0, .seed = 10};
  const PanelDataset data = generate(cfg);
  const CmleFit fit = fit_cmle(data);

  SUBCASE("undersmoothing direction") {
    const BandwidthResult base = bandwidth_rule(data, fit, 5.0);
    const BandwidthResult doubled = bandwidth_rule(data, fit, 10.0);
    REQUIRE(base.pilot_ok);
    REQUIRE(doubled.pilot_ok);
    const double factor = std::pow(2.0, -1.0 / (2 + 4));  // pT = 2
    for (std::size_t t = 0; t < base.h.size(); ++t) {
      CHECK(doubled.h[t] == doctest::Approx(base.h[t] * factor).epsilon(1e-6));
    }
  }
  SUBCASE("pilot fit sits near the truth for the degenerate design") {
    const BandwidthResult r = bandwidth_rule(data, fit, 5.0);
    REQUIRE(r.pilot_ok);
    // alpha = -X_T beta + eta with eta = 0: the best constant is ~0
    CHECK(std::abs(r.alpha_pilot) < 0.2);
    for (double h : r.h) {
      CHECK(h > 1e-2);
      CHECK(h < 10.0);
    }
  }
}

TEST_CASE("accuracy against the closed-form target on the degenerate design") {
  // With a point-mass individual effect the probabilities P(S=j|X=x) have
  // the closed form C_j(x,b) e^{j a} / prod_t (1 + e^{x_t b + a}) with
  // a = -x_T b. Local linear fits with the rule bandwidth should land
  // within a few percent on average.
  const DgpConfig cfg{.dgp = 1, .T = 2, .n = 10000, .beta0 = 1.0, .seed = 12};
  const PanelDataset data = generate(cfg);
  const CmleFit fit = fit_cmle(data);
  const GammaEstimate est =
      make_gamma_estimate(data, fit, default_undersmoothing(data.size()));

  Rng rng(13);
  double mae = 0.0;
  const int n_queries = 100;
  Eigen::VectorXd beta(1);
  beta << 1.0;
  for (int qi = 0; qi < n_queries; ++qi) {
    Eigen::VectorXd q(2);
    q << rng.uniform(-0.35, 0.35), rng.uniform(-0.35, 0.35);
    const std::vector<double> g = est.gamma(q);

    Eigen::MatrixXd xu(2, 1);
    xu << q(0), q(1);
    const double a = -q(1);
    const std::vector<double> c = symmetric_sums(xu, beta);
    double denom = 1.0;
    for (int t = 0; t < 2; ++t) denom *= 1.0 + std::exp(xu(t, 0) + a);
    for (int j = 0; j <= 2; ++j) {
      const double truth =
          c[static_cast<std::size_t>(j)] * std::exp(j * a) / denom;
      mae += std::abs(g[static_cast<std::size_t>(j)] - truth) /
             (3.0 * n_queries);
    }
  }
  CHECK(mae <= 0.03);
}
