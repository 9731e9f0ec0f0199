#include <benchmark/benchmark.h>

#include "felogit/bounds.hpp"
#include "felogit/chebyshev.hpp"
#include "felogit/cmle.hpp"
#include "felogit/localpoly.hpp"
#include "felogit/moments.hpp"
#include "felogit/montecarlo.hpp"
#include "felogit/rng.hpp"

using namespace felogit;

namespace {

Eigen::MatrixXd random_paths(int T, int p, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(T, p);
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < p; ++j) x(t, j) = rng.uniform(-1.0, 1.0);
  }
  return x;
}

void BM_SymmetricSums(benchmark::State& state) {
  const int T = static_cast<int>(state.range(0));
  const Eigen::MatrixXd x = random_paths(T, 2, 1);
  Eigen::VectorXd beta(2);
  beta << 0.7, -0.4;
  for (auto _ : state) {
    benchmark::DoNotOptimize(symmetric_sums(x, beta));
  }
}
BENCHMARK(BM_SymmetricSums)->Arg(4)->Arg(8)->Arg(16);

void BM_LoglikDerivatives(benchmark::State& state) {
  const int T = static_cast<int>(state.range(0));
  PanelUnit u;
  u.x = random_paths(T, 2, 2);
  u.y.assign(static_cast<std::size_t>(T), 0);
  for (int t = 0; t < T; t += 2) u.y[static_cast<std::size_t>(t)] = 1;
  for (int v : u.y) u.s += v;
  Eigen::VectorXd beta(2);
  beta << 0.3, 0.2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cond_loglik_derivs(u, beta));
  }
}
BENCHMARK(BM_LoglikDerivatives)->Arg(4)->Arg(8);

void BM_ChebyshevPstar(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(chebyshev_pstar(static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_ChebyshevPstar)->Arg(3)->Arg(8);

void BM_ExtremalMoments(benchmark::State& state) {
  const int T = static_cast<int>(state.range(0));
  Rng rng(3);
  std::vector<double> m(static_cast<std::size_t>(T) + 1, 0.0);
  // three-atom mixture
  const double atoms[] = {0.2, 0.5, 0.9};
  for (int t = 0; t <= T; ++t) {
    for (double a : atoms) m[static_cast<std::size_t>(t)] += std::pow(a, t) / 3;
  }
  const MomentVector mv{std::move(m)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(extremal_moments(mv));
  }
}
BENCHMARK(BM_ExtremalMoments)->Arg(3)->Arg(5);

void BM_ProjectMoments(benchmark::State& state) {
  const int T = static_cast<int>(state.range(0));
  std::vector<double> m(static_cast<std::size_t>(T) + 1, 1.0);
  double level = 1.0;
  for (int t = 1; t <= T; ++t) {
    level *= 0.6;
    m[static_cast<std::size_t>(t)] = level + (t % 2 ? 0.05 : -0.05);
  }
  const MomentVector mv{std::move(m)};
  const ProjectionThresholds th = ProjectionThresholds::constant_rule(T, 500);
  for (auto _ : state) {
    benchmark::DoNotOptimize(project_moments(mv, th, true));
  }
}
BENCHMARK(BM_ProjectMoments)->Arg(3)->Arg(5);

void BM_LpOracle(benchmark::State& state) {
  const MomentVector m{{1.0, 0.5, 0.3, 0.2}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(lp_oracle_extremal(m, 10000));
  }
}
BENCHMARK(BM_LpOracle);

void BM_GammaQuery(benchmark::State& state) {
  const DgpConfig cfg{.dgp = 2, .T = 2,
                      .n = static_cast<std::size_t>(state.range(0)),
                      .beta0 = 1.0, .seed = 4};
  const PanelDataset data = generate(cfg);
  const CmleFit fit = fit_cmle(data);
  const GammaEstimate est = make_gamma_estimate(data, fit, 5.0);
  const Eigen::Vector2d q(0.1, -0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(est.gamma(q));
  }
}
BENCHMARK(BM_GammaQuery)->Arg(250)->Arg(1000);

void BM_CmleFit(benchmark::State& state) {
  const DgpConfig cfg{.dgp = 1, .T = 3,
                      .n = static_cast<std::size_t>(state.range(0)),
                      .beta0 = 1.0, .seed = 5};
  const PanelDataset data = generate(cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_cmle(data));
  }
}
BENCHMARK(BM_CmleFit)->Arg(500)->Arg(2000);

void BM_BoundsEstimate(benchmark::State& state) {
  const DgpConfig cfg{.dgp = 2, .T = 2,
                      .n = static_cast<std::size_t>(state.range(0)),
                      .beta0 = 1.0, .seed = 6};
  const PanelDataset data = generate(cfg);
  const CmleFit fit = fit_cmle(data);
  GammaOptions gopts;
  ProjectionConfig proj;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        estimate_bounds(data, fit, gopts, proj, EffectTarget::ame(0)));
  }
}
BENCHMARK(BM_BoundsEstimate)->Arg(250)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
