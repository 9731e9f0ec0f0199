#include <doctest.h>

#include <cmath>

#include "felogit/bounds.hpp"
#include "felogit/cmle.hpp"
#include "felogit/errors.hpp"
#include "felogit/montecarlo.hpp"
#include "felogit/simple.hpp"
#include "felogit/stats.hpp"
#include "support/test_helpers.hpp"

using namespace felogit;

namespace {

PanelDataset make_unbalanced_degenerate(std::size_t n, double beta0,
                                        std::uint64_t seed) {
  // T_i in {2, 3}, alpha pinned to the reference period (the 2nd), so the
  // marginal effect at that period is exactly beta0 / 4.
  Rng rng(seed);
  PanelDataset data;
  data.p = 1;
  data.covariate_names = {"x1"};
  for (std::size_t i = 0; i < n; ++i) {
    const int T = (rng.uniform01() < 0.5) ? 2 : 3;
    PanelUnit u;
    u.id = std::to_string(i + 1);
    u.x.resize(T, 1);
    for (int t = 0; t < T; ++t) u.x(t, 0) = rng.uniform(-0.5, 0.5);
    const double alpha = -u.x(1, 0) * beta0;
    u.y.resize(static_cast<std::size_t>(T));
    u.period_labels.resize(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      u.y[static_cast<std::size_t>(t)] =
          (u.x(t, 0) * beta0 + alpha + rng.logistic() >= 0.0) ? 1 : 0;
      u.period_labels[static_cast<std::size_t>(t)] = t + 1;
      u.s += u.y[static_cast<std::size_t>(t)];
    }
    data.individuals.push_back(std::move(u));
  }
  return data;
}

// Difference-in-differences style design: treatment applied at the
// second period only, effect covariates (d, time dummy), beta0 = (1,1),
// alpha = -0.5 + 1.5 D.
PanelDataset make_did(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PanelDataset data;
  data.p = 2;
  data.covariate_names = {"d", "post"};
  for (std::size_t i = 0; i < n; ++i) {
    const double D = (rng.uniform01() < 0.5) ? 1.0 : 0.0;
    const double alpha = -0.5 + 1.5 * D;
    PanelUnit u;
    u.id = std::to_string(i + 1);
    u.x.resize(2, 2);
    u.x << 0.0, 0.0, D, 1.0;
    u.y.resize(2);
    u.period_labels = {1, 2};
    for (int t = 0; t < 2; ++t) {
      const double idx = u.x(t, 0) + u.x(t, 1) + alpha + rng.logistic();
      u.y[static_cast<std::size_t>(t)] = idx >= 0.0 ? 1 : 0;
      u.s += u.y[static_cast<std::size_t>(t)];
    }
    data.individuals.push_back(std::move(u));
  }
  return data;
}

}  // namespace

TEST_CASE("stratification") {
  SUBCASE("balanced data is one stratum") {
    const DgpConfig cfg{.dgp = 1, .T = 2, .n = 100, .beta0 = 1.0, .seed = 1};
    const PanelDataset data = generate(cfg);
    const std::vector<TStratum> strata = stratify_by_T(data);
    REQUIRE(strata.size() == 1);
    CHECK(strata[0].weight == doctest::Approx(1.0));
    CHECK(strata[0].T == 2);
  }
  SUBCASE("even split gives half weights") {
    PanelDataset data = make_unbalanced_degenerate(4000, 1.0, 3);
    const std::vector<TStratum> strata = stratify_by_T(data);
    REQUIRE(strata.size() == 2);
    CHECK(strata[0].T == 2);
    CHECK(strata[1].T == 3);
    CHECK(strata[0].weight == doctest::Approx(0.5).epsilon(0.05));
    CHECK(strata[0].weight + strata[1].weight == doctest::Approx(1.0));
    CHECK(reference_period(data) == 1);
  }
  SUBCASE("undersized strata are flagged") {
    PanelDataset data = make_unbalanced_degenerate(50, 1.0, 5);
    CHECK_THROWS_AS(stratify_by_T(data, 40), EstimationError);
  }
}

TEST_CASE("unbalanced panel estimation recovers the degenerate target") {
  const PanelDataset data = make_unbalanced_degenerate(2000, 1.0, 7);
  const CmleFit fit = fit_cmle(data);
  CHECK(std::abs(fit.beta_hat(0) - 1.0) < 0.25);

  const SimpleEstimate simple =
      estimate_simple(data, fit, EffectTarget::ame(0));
  const double se = simple.sigma_hat / std::sqrt(2000.0);
  CHECK(std::abs(simple.delta_hat - 0.25) < 3.5 * se + simple.bbar_hat);

  GammaOptions gopts;
  ProjectionConfig proj;
  const BoundsEstimate bounds =
      estimate_bounds(data, fit, gopts, proj, EffectTarget::ame(0));
  CHECK(bounds.lower <= bounds.upper + 1e-12);
  CHECK(std::abs(0.5 * (bounds.lower + bounds.upper) - 0.25) < 0.08);
}

TEST_CASE("treatment effect decomposition") {
  const PanelDataset data = make_did(2500, 11);
  CmleFit fit = fit_cmle(data);
  // slope on (d, post) is (1, 1)
  CHECK(std::abs(fit.beta_hat(0) - 1.0) < 0.5);
  CHECK(std::abs(fit.beta_hat(1) - 1.0) < 0.5);
  // pin the slope so the check below isolates the weight machinery
  fit.beta_hat << 1.0, 1.0;

  GammaOptions gopts;
  ProjectionConfig proj;
  const AteBounds ab = ate_bounds(data, fit, gopts, proj);

  SUBCASE("identified pieces") {
    double y1 = 0.0, n1 = 0.0;
    for (const auto& u : data.individuals) {
      if (u.x(1, 0) == 1.0) {
        y1 += u.y[1];
        n1 += 1.0;
      }
    }
    CHECK(ab.mean_y_treated == doctest::Approx(y1 / n1));  // exact stratum mean
    CHECK(ab.p_treated == doctest::Approx(n1 / data.size()));
  }
  SUBCASE("endpoint-wise recombination is exact") {
    CHECK(ab.ate.lower == doctest::Approx(ab.p_treated * ab.att.lower +
                                          (1 - ab.p_treated) * ab.atu.lower)
                              .epsilon(1e-12));
    CHECK(ab.ate.upper == doctest::Approx(ab.p_treated * ab.att.upper +
                                          (1 - ab.p_treated) * ab.atu.upper)
                              .epsilon(1e-12));
  }
  SUBCASE("estimates near the analytic values") {
    // ATT = L(3) - L(2), ATU = L(1.5) - L(0.5), ATE = their even mix.
    // Averaged over a few replications to tame the ~0.028 per-draw noise.
    const double att_true = logistic_cdf(3.0) - logistic_cdf(2.0);
    const double atu_true = logistic_cdf(1.5) - logistic_cdf(0.5);
    const double ate_true = 0.5 * (att_true + atu_true);
    double att_mean = 0.5 * (ab.att.lower + ab.att.upper);
    double atu_mean = 0.5 * (ab.atu.lower + ab.atu.upper);
    double ate_mean = 0.5 * (ab.ate.lower + ab.ate.upper);
    const int extra = 4;
    for (int r = 0; r < extra; ++r) {
      const PanelDataset d2 = make_did(2500, 211 + static_cast<std::uint64_t>(r));
      CmleFit f2 = fit_cmle(d2);
      f2.beta_hat << 1.0, 1.0;
      const AteBounds ab2 = ate_bounds(d2, f2, gopts, proj);
      att_mean += 0.5 * (ab2.att.lower + ab2.att.upper);
      atu_mean += 0.5 * (ab2.atu.lower + ab2.atu.upper);
      ate_mean += 0.5 * (ab2.ate.lower + ab2.ate.upper);
    }
    att_mean /= extra + 1;
    atu_mean /= extra + 1;
    ate_mean /= extra + 1;
    CHECK(std::abs(att_mean - att_true) < 0.035);
    CHECK(std::abs(atu_mean - atu_true) < 0.035);
    CHECK(std::abs(ate_mean - ate_true) < 0.035);
    CHECK(ab.att.lower <= ab.att.upper + 1e-12);
    CHECK(ab.atu.lower <= ab.atu.upper + 1e-12);
  }
}

TEST_CASE("one-sided samples degenerate to the populated effect") {
  PanelDataset data = make_did(400, 13);
  // force everyone treated
  for (auto& u : data.individuals) u.x(1, 0) = 1.0;
  const CmleFit fit = [&] {
    CmleFit f;
    f.beta_hat = Eigen::Vector2d(1.0, 1.0);
    f.tau = Eigen::Vector2d(1.0, 1.0);
    f.info = f.info_inv = Eigen::MatrixXd::Identity(2, 2);
    f.phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.size()), 2);
    f.converged = true;
    return f;
  }();
  GammaOptions gopts;
  ProjectionConfig proj;
  const AteBounds ab = ate_bounds(data, fit, gopts, proj);
  CHECK(ab.p_treated == 1.0);
  CHECK(ab.ate.lower == ab.att.lower);
  CHECK(ab.ate.upper == ab.att.upper);
}

TEST_CASE("zero slope gives zero treatment effects on symmetric data") {
  PanelDataset data;
  data.p = 1;
  data.covariate_names = {"d"};
  int id = 0;
  for (double d : {0.0, 1.0}) {
    for (auto y : {std::vector<int>{0, 1}, std::vector<int>{1, 0},
                   std::vector<int>{1, 1}, std::vector<int>{0, 0}}) {
      PanelUnit u;
      u.id = std::to_string(id++);
      u.x.resize(2, 1);
      u.x << 0.0, d;
      u.y = y;
      for (int v : y) u.s += v;
      u.period_labels = {1, 2};
      data.individuals.push_back(std::move(u));
    }
  }
  CmleFit fit;
  fit.beta_hat = Eigen::VectorXd::Zero(1);
  fit.tau = Eigen::VectorXd::Ones(1);
  fit.info = fit.info_inv = Eigen::MatrixXd::Identity(1, 1);
  fit.phi = Eigen::MatrixXd::Zero(8, 1);
  fit.converged = true;

  GammaOptions gopts;
  gopts.bandwidth_override = 100.0;  // flat weights on the tiny sample
  ProjectionConfig proj;
  proj.variance_rule = false;
  const AteBounds ab = ate_bounds(data, fit, gopts, proj);
  CHECK(ab.att.lower == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(ab.att.upper == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(ab.atu.lower == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(ab.ate.upper == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("average structural function") {
  // alpha = -X_2 beta: the structural average at x0 is the integral of
  // logistic'((x0 - v) beta) over v uniform on [-1/2, 1/2]... for levels:
  // E[logistic(x0 beta + alpha)] = int logistic((x0 - v) beta) dv.
  const DgpConfig cfg{.dgp = 1, .T = 2, .n = 4000, .beta0 = 1.0, .seed = 17};
  const PanelDataset data = generate(cfg);
  CmleFit fit = fit_cmle(data);
  fit.beta_hat(0) = 1.0;

  GammaOptions gopts;
  ProjectionConfig proj;
  auto truth_at = [&](double x0) {
    const int grid = 4000;
    double acc = 0.0;
    for (int i = 0; i < grid; ++i) {
      const double v = -0.5 + (i + 0.5) / grid;
      acc += logistic_cdf(x0 - v) / grid;
    }
    return acc;
  };

  double prev_mid = -1.0;
  for (double x0 : {-0.4, 0.0, 0.55}) {
    Eigen::VectorXd point(1);
    point << x0;
    const BoundsEstimate asf = asf_bounds(data, fit, gopts, proj, point);
    CHECK(asf.lower <= asf.upper + 1e-12);
    CHECK(asf.lower >= 0.0);
    CHECK(asf.upper <= 1.0);
    const double mid = 0.5 * (asf.lower + asf.upper);
    CHECK(std::abs(mid - truth_at(x0)) < 0.03);
    CHECK(mid > prev_mid);  // monotone in x0 for this design
    prev_mid = mid;
  }
}

TEST_CASE("asf input validation") {
  const DgpConfig cfg{.dgp = 1, .T = 2, .n = 100, .beta0 = 1.0, .seed = 19};
  const PanelDataset data = generate(cfg);
  const CmleFit fit = fit_cmle(data);
  GammaOptions gopts;
  ProjectionConfig proj;
  Eigen::VectorXd bad(1);
  bad << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(asf_bounds(data, fit, gopts, proj, bad), DomainError);
}
