#include "felogit/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "felogit/bounds.hpp"
#include "felogit/chebyshev.hpp"
#include "felogit/cmle.hpp"
#include "felogit/errors.hpp"
#include "felogit/parallel.hpp"
#include "felogit/rng.hpp"
#include "felogit/simple.hpp"
#include "felogit/stats.hpp"
#include "weights_internal.hpp"

namespace felogit {

namespace {

// Golub-Welsch nodes/weights from the Jacobi matrix of the weight
// function.
void golub_welsch(const Eigen::VectorXd& offdiag, double total_mass,
                  Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  const int n = static_cast<int>(offdiag.size()) + 1;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    J(i, i + 1) = offdiag(i);
    J(i + 1, i) = offdiag(i);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  nodes = es.eigenvalues();
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    weights(i) = total_mass * v0 * v0;
  }
}

// Gauss-Legendre on [-1/2, 1/2].
void gauss_legendre_half(int n, Eigen::VectorXd& nodes,
                         Eigen::VectorXd& weights) {
  Eigen::VectorXd off(n - 1);
  for (int k = 1; k < n; ++k) {
    off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  }
  golub_welsch(off, 2.0, nodes, weights);
  nodes *= 0.5;
  weights *= 0.5;
}

// Expectation nodes for N(0,1): E f(eta) = sum w_i f(x_i).
void gauss_hermite_normal(int n, Eigen::VectorXd& nodes,
                          Eigen::VectorXd& weights) {
  Eigen::VectorXd off(n - 1);
  for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(k / 2.0);
  golub_welsch(off, std::sqrt(M_PI), nodes, weights);
  nodes *= std::sqrt(2.0);
  weights /= std::sqrt(M_PI);
}

std::vector<double> interior_extrema(const std::vector<double>& pts) {
  std::vector<double> out;
  for (double u : pts) {
    if (u > 1e-9 && u < 1.0 - 1e-9) out.push_back(u);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double lambda_top_ame(const Eigen::MatrixXd& x_unit, double beta0) {
  Eigen::VectorXd beta(1);
  beta(0) = beta0;
  const int T = static_cast<int>(x_unit.rows());
  const detail::PolyWithJac poly = detail::lambda_poly(
      x_unit, beta, x_unit.row(T - 1).transpose(), true, T - 1, false);
  return poly.coef(T + 1);
}

}  // namespace

PanelDataset generate(const DgpConfig& config, std::uint64_t rep) {
  if (config.dgp < 1 || config.dgp > 5) {
    throw DomainError("generate: dgp must lie in 1..5");
  }
  if (config.T < 2) throw DomainError("generate: T must be at least 2");
  Rng rng(derive_seed(config.seed, rep));

  const int T = config.T;
  const double beta0 = config.beta0;

  ChebyshevApprox cheb;
  std::vector<double> plus_atoms, minus_atoms;
  if (config.dgp == 3) {
    cheb = chebyshev_pstar(T);
    plus_atoms = interior_extrema(cheb.argmax);
    minus_atoms = interior_extrema(cheb.argmin);
  }

  Eigen::MatrixXd copula_chol;
  if (config.dgp == 4) {
    Eigen::MatrixXd corr(T, T);
    for (int s = 0; s < T; ++s) {
      for (int t = 0; t < T; ++t) {
        corr(s, t) = std::ldexp(1.0, -std::abs(s - t));
      }
    }
    copula_chol = corr.llt().matrixL();
  }
  const double dgp5_sd = std::sqrt(8.0 / M_PI);

  PanelDataset data;
  data.p = 1;
  data.effect_index = 0;
  data.covariate_names = {"x1"};
  data.individuals.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    PanelUnit u;
    u.id = std::to_string(i + 1);
    u.x.resize(T, 1);
    for (int t = 0; t < T; ++t) u.x(t, 0) = rng.uniform(-0.5, 0.5);

    double eta = 0.0;
    if (config.dgp == 2) {
      eta = rng.normal();
    } else if (config.dgp == 3) {
      const std::vector<double>& atoms =
          (lambda_top_ame(u.x, beta0) >= 0.0) ? plus_atoms : minus_atoms;
      const double atom =
          atoms[static_cast<std::size_t>(rng.below(atoms.size()))];
      eta = logistic_quantile(atom);
    }
    const double alpha = -u.x(T - 1, 0) * beta0 + eta;

    u.y.resize(static_cast<std::size_t>(T));
    u.period_labels.resize(static_cast<std::size_t>(T));
    if (config.dgp == 4) {
      Eigen::VectorXd z(T);
      for (int t = 0; t < T; ++t) z(t) = rng.normal();
      const Eigen::VectorXd corr_z = copula_chol * z;
      for (int t = 0; t < T; ++t) {
        const double eps = logistic_quantile(normal_cdf(corr_z(t)));
        u.y[static_cast<std::size_t>(t)] =
            (u.x(t, 0) * beta0 + alpha + eps >= 0.0) ? 1 : 0;
      }
    } else {
      for (int t = 0; t < T; ++t) {
        const double eps =
            (config.dgp == 5) ? dgp5_sd * rng.normal() : rng.logistic();
        u.y[static_cast<std::size_t>(t)] =
            (u.x(t, 0) * beta0 + alpha + eps >= 0.0) ? 1 : 0;
      }
    }
    for (int t = 0; t < T; ++t) {
      u.period_labels[static_cast<std::size_t>(t)] = t + 1;
      u.s += u.y[static_cast<std::size_t>(t)];
    }
    data.individuals.push_back(std::move(u));
  }
  return data;
}

namespace {

// Population moment machinery for a single covariate path x (T x 1):
// atoms (u_j, pi_j) describe U | X = x. Returns the identified term and
// the bound endpoints of the per-path effect.
struct PathBounds {
  double lower = 0.0;
  double upper = 0.0;
};

PathBounds path_bounds(const Eigen::MatrixXd& x_unit, double beta0,
                       const std::vector<double>& atoms,
                       const std::vector<double>& probs) {
  const int T = static_cast<int>(x_unit.rows());
  Eigen::VectorXd beta(1);
  beta(0) = beta0;
  const detail::PolyWithJac lam = detail::lambda_poly(
      x_unit, beta, x_unit.row(T - 1).transpose(), true, T - 1, false);

  // c_t = sum_j pi_j u_j^t K(u_j), K(u) = prod_{t<T} 1/(1 + u(e^{dx b}-1)).
  std::vector<double> c(static_cast<std::size_t>(T) + 1, 0.0);
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    const double u = atoms[j];
    double kern = 1.0;
    for (int t = 0; t + 1 < T; ++t) {
      kern /= 1.0 + u * (std::exp((x_unit(t, 0) - x_unit(T - 1, 0)) * beta0) -
                         1.0);
    }
    double pw = probs[j] * kern;
    for (int t = 0; t <= T; ++t) {
      c[static_cast<std::size_t>(t)] += pw;
      pw *= u;
    }
  }
  double identified = 0.0;
  for (int t = 0; t <= T; ++t) {
    identified += lam.coef(t) * c[static_cast<std::size_t>(t)];
  }
  identified *= beta0;

  const double lam_top = lam.coef(T + 1);
  PathBounds out;
  if (lam_top == 0.0 || beta0 == 0.0) {
    out.lower = out.upper = identified;
    return out;
  }
  std::vector<double> m(static_cast<std::size_t>(T) + 1);
  for (int t = 0; t <= T; ++t) {
    m[static_cast<std::size_t>(t)] = c[static_cast<std::size_t>(t)] / c[0];
  }
  m[0] = 1.0;
  const ExtremalMoments ext = extremal_moments(MomentVector{std::move(m)});
  const double common = beta0 * c[0] * lam_top;
  const double lo_q = (common >= 0.0) ? ext.q_lower : ext.q_upper;
  const double hi_q = (common >= 0.0) ? ext.q_upper : ext.q_lower;
  out.lower = identified + common * lo_q;
  out.upper = identified + common * hi_q;
  return out;
}

// Tensor iteration over Gauss-Legendre nodes in T dimensions.
template <typename Body>
void tensor_iterate(const Eigen::VectorXd& nodes,
                    const Eigen::VectorXd& weights, int T, Body&& body) {
  const int n = static_cast<int>(nodes.size());
  std::vector<int> idx(static_cast<std::size_t>(T), 0);
  Eigen::MatrixXd x(T, 1);
  for (;;) {
    double w = 1.0;
    for (int t = 0; t < T; ++t) {
      x(t, 0) = nodes(idx[static_cast<std::size_t>(t)]);
      w *= weights(idx[static_cast<std::size_t>(t)]);
    }
    body(x, w);
    int pos = T - 1;
    while (pos >= 0 && ++idx[static_cast<std::size_t>(pos)] == n) {
      idx[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
}

}  // namespace

TruthRecord truth_oracle(const DgpConfig& config) {
  TruthRecord out;
  const double beta0 = config.beta0;
  const int T = config.T;

  if (config.dgp == 1 || config.dgp == 4 || config.dgp == 5) {
    // Degenerate effect: alpha + X_T beta = 0, so the derivative is
    // Lambda'(0) = 1/4 for every unit; point identified for T >= 2.
    out.delta = 0.25 * beta0;
    out.lower = out.upper = out.delta;
    out.method = "closed-form";
    return out;
  }

  if (config.dgp == 3 && T == 2) {
    // Both support points u of Lambda(eta) satisfy u(1-u) = 3/16.
    out.delta = beta0 * 3.0 / 16.0;
    out.lower = out.upper = out.delta;
    out.method = "closed-form";
    return out;
  }

  if (config.dgp == 2) {
    Eigen::VectorXd eta_nodes, eta_weights;
    gauss_hermite_normal(128, eta_nodes, eta_weights);
    std::vector<double> atoms(static_cast<std::size_t>(eta_nodes.size()));
    std::vector<double> probs(static_cast<std::size_t>(eta_nodes.size()));
    double delta = 0.0;
    for (Eigen::Index j = 0; j < eta_nodes.size(); ++j) {
      atoms[static_cast<std::size_t>(j)] = logistic_cdf(eta_nodes(j));
      probs[static_cast<std::size_t>(j)] = eta_weights(j);
      const double u = atoms[static_cast<std::size_t>(j)];
      delta += eta_weights(j) * u * (1.0 - u);
    }
    out.delta = beta0 * delta;

    Eigen::VectorXd x_nodes, x_weights;
    gauss_legendre_half(64, x_nodes, x_weights);
    double lo = 0.0;
    double up = 0.0;
    tensor_iterate(x_nodes, x_weights, T, [&](const Eigen::MatrixXd& x,
                                              double w) {
      const PathBounds pb = path_bounds(x, beta0, atoms, probs);
      lo += w * pb.lower;
      up += w * pb.upper;
    });
    out.lower = lo;
    out.upper = up;
    out.method = "quadrature";
    return out;
  }

  if (config.dgp == 3) {
    const ChebyshevApprox cheb = chebyshev_pstar(T);
    const std::vector<double> plus = interior_extrema(cheb.argmax);
    const std::vector<double> minus = interior_extrema(cheb.argmin);

    // The support of eta switches with the sign of the top polynomial
    // coefficient, which flips whenever x_T crosses one of the earlier
    // periods. Integrate x_T piecewise between those crossings so each
    // Gauss-Legendre panel sees a smooth integrand.
    Eigen::VectorXd x_nodes, x_weights;
    gauss_legendre_half(64, x_nodes, x_weights);
    Eigen::VectorXd unit_nodes(32), unit_weights(32);
    {
      Eigen::VectorXd off(31);
      for (int k = 1; k < 32; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
      golub_welsch(off, 2.0, unit_nodes, unit_weights);  // on [-1, 1]
    }

    double delta = 0.0;
    double lo = 0.0;
    double up = 0.0;
    tensor_iterate(x_nodes, x_weights, T - 1, [&](const Eigen::MatrixXd& head,
                                                  double w_head) {
      std::vector<double> cuts{-0.5, 0.5};
      for (int t = 0; t + 1 < T; ++t) cuts.push_back(head(t, 0));
      std::sort(cuts.begin(), cuts.end());
      Eigen::MatrixXd x(T, 1);
      for (int t = 0; t + 1 < T; ++t) x(t, 0) = head(t, 0);
      for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
        const double a = cuts[seg];
        const double b = cuts[seg + 1];
        if (b - a < 1e-14) continue;
        for (int i = 0; i < unit_nodes.size(); ++i) {
          x(T - 1, 0) = 0.5 * (a + b) + 0.5 * (b - a) * unit_nodes(i);
          const double w = w_head * 0.5 * (b - a) * unit_weights(i);
          const std::vector<double>& atoms =
              (lambda_top_ame(x, beta0) >= 0.0) ? plus : minus;
          const std::vector<double> probs(atoms.size(), 1.0 / atoms.size());
          double d = 0.0;
          for (std::size_t j = 0; j < atoms.size(); ++j) {
            d += probs[j] * atoms[j] * (1.0 - atoms[j]);
          }
          delta += w * beta0 * d;
          const PathBounds pb = path_bounds(x, beta0, atoms, probs);
          lo += w * pb.lower;
          up += w * pb.upper;
        }
      }
    });
    out.delta = delta;
    out.lower = lo;
    out.upper = up;
    out.method = "quadrature";
    return out;
  }

  throw DomainError("truth_oracle: dgp must lie in 1..5");
}

LpmEstimate lpm_estimate(const PanelDataset& data, int k, double level) {
  const int p = data.p;
  const std::size_t n = data.size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  for (const auto& u : data.individuals) {
    const int T = u.periods();
    Eigen::RowVectorXd xbar = u.x.colwise().mean();
    double ybar = 0.0;
    for (int yv : u.y) ybar += yv;
    ybar /= T;
    for (int t = 0; t < T; ++t) {
      const Eigen::VectorXd xd = (u.x.row(t) - xbar).transpose();
      a.noalias() += xd * xd.transpose();
      b.noalias() += xd * (u.y[static_cast<std::size_t>(t)] - ybar);
    }
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success ||
      a.diagonal().minCoeff() <= 1e-12 * std::max(1.0, a.norm())) {
    throw IdentificationError(
        "lpm_estimate: no within-unit covariate variation");
  }
  const Eigen::VectorXd slope = ldlt.solve(b);

  // Cluster-robust sandwich at the unit level.
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  for (const auto& u : data.individuals) {
    const int T = u.periods();
    Eigen::RowVectorXd xbar = u.x.colwise().mean();
    double ybar = 0.0;
    for (int yv : u.y) ybar += yv;
    ybar /= T;
    Eigen::VectorXd score = Eigen::VectorXd::Zero(p);
    for (int t = 0; t < T; ++t) {
      const Eigen::VectorXd xd = (u.x.row(t) - xbar).transpose();
      const double resid =
          (u.y[static_cast<std::size_t>(t)] - ybar) - xd.dot(slope);
      score.noalias() += xd * resid;
    }
    meat.noalias() += score * score.transpose();
  }
  const double cluster_adj =
      static_cast<double>(n) / std::max<double>(1.0, static_cast<double>(n) - 1.0);
  const Eigen::MatrixXd a_inv = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd vcov = cluster_adj * a_inv * meat * a_inv;

  LpmEstimate out;
  out.slope = slope(k);
  out.clustered_se = std::sqrt(std::max(0.0, vcov(k, k)));
  const double z = normal_quantile(0.5 + level / 2.0);
  out.ci.level = level;
  out.ci.method = "LPM";
  out.ci.lo = out.slope - z * out.clustered_se;
  out.ci.hi = out.slope + z * out.clustered_se;
  return out;
}

namespace {

struct RepOutcome {
  bool ok = false;
  // bounds method
  bool have_bounds = false;
  double lower = 0.0, upper = 0.0, ci1_lo = 0.0, ci1_hi = 0.0;
  // polynomial-approximation method
  bool have_simple = false;
  double delta_hat = 0.0, ci2_lo = 0.0, ci2_hi = 0.0, ci3_lo = 0.0,
         ci3_hi = 0.0;
  // linear probability model
  bool have_lpm = false;
  double lpm_slope = 0.0, lpm_lo = 0.0, lpm_hi = 0.0;
};

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0
                   : std::accumulate(v.begin(), v.end(), 0.0) /
                         static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

StudyResult run_study(const DgpConfig& config,
                      const std::set<std::string>& methods, double level,
                      double ci3_gamma, double ci3_delta) {
  const double alpha = 1.0 - level;
  const TruthRecord truth = truth_oracle(config);
  const bool want_bounds = methods.count("bounds") > 0;
  const bool want_simple = methods.count("chebyshev") > 0;
  const bool want_lpm = methods.count("lpm") > 0;

  std::vector<RepOutcome> reps(config.reps);
  parallel_for(config.reps, [&](std::size_t r) {
    RepOutcome& o = reps[r];
    try {
      const PanelDataset data = generate(config, r);
      const CmleFit fit = fit_cmle(data);
      const EffectTarget target = EffectTarget::ame(0);
      if (want_bounds) {
        GammaOptions gopts;
        gopts.R_n = default_undersmoothing(config.n);
        ProjectionConfig proj;
        const BoundsEstimate est =
            estimate_bounds(data, fit, gopts, proj, target);
        const ConfidenceInterval ci = ci1(est, fit, alpha, 0);
        o.lower = est.lower;
        o.upper = est.upper;
        o.ci1_lo = ci.lo;
        o.ci1_hi = ci.hi;
        o.have_bounds = true;
      }
      if (want_simple) {
        const SimpleEstimate est = estimate_simple(data, fit, target);
        const ConfidenceInterval c2 = ci2(est, alpha);
        const ConfidenceInterval c3 = ci3(est, fit, ci3_gamma, ci3_delta);
        o.delta_hat = est.delta_hat;
        o.ci2_lo = c2.lo;
        o.ci2_hi = c2.hi;
        o.ci3_lo = c3.lo;
        o.ci3_hi = c3.hi;
        o.have_simple = true;
      }
      if (want_lpm) {
        const LpmEstimate est = lpm_estimate(data, 0, level);
        o.lpm_slope = est.slope;
        o.lpm_lo = est.ci.lo;
        o.lpm_hi = est.ci.hi;
        o.have_lpm = true;
      }
      o.ok = true;
    } catch (const Error&) {
      o.ok = false;
    }
  });

  StudyResult result;
  result.config = config;
  for (const auto& o : reps) {
    if (!o.ok) ++result.failures;
  }
  if (result.failures * 20 > config.reps) {
    throw EstimationError("run_study: more than 5% of replications failed (" +
                          std::to_string(result.failures) + "/" +
                          std::to_string(config.reps) + ")");
  }

  auto add = [&](const std::string& method, const std::string& stat,
                 double value) {
    result.rows.push_back({method, stat, value});
  };
  auto coverage = [&](auto lo_of, auto hi_of, auto pred) {
    std::size_t cover = 0;
    std::size_t total = 0;
    for (const auto& o : reps) {
      if (!o.ok || !pred(o)) continue;
      ++total;
      if (lo_of(o) <= truth.delta && truth.delta <= hi_of(o)) ++cover;
    }
    return total ? static_cast<double>(cover) / static_cast<double>(total)
                 : 0.0;
  };

  if (want_bounds) {
    std::vector<double> lows, ups, lens;
    for (const auto& o : reps) {
      if (!o.ok || !o.have_bounds) continue;
      lows.push_back(o.lower);
      ups.push_back(o.upper);
      lens.push_back(o.ci1_hi - o.ci1_lo);
    }
    add("bounds", "bias_lower", mean_of(lows) - truth.lower);
    add("bounds", "sd_lower", sd_of(lows));
    add("bounds", "bias_upper", mean_of(ups) - truth.upper);
    add("bounds", "sd_upper", sd_of(ups));
    add("bounds", "coverage_ci1",
        coverage([](const RepOutcome& o) { return o.ci1_lo; },
                 [](const RepOutcome& o) { return o.ci1_hi; },
                 [](const RepOutcome& o) { return o.have_bounds; }));
    add("bounds", "length_ci1", mean_of(lens));
  }
  if (want_simple) {
    std::vector<double> deltas, len2, len3;
    for (const auto& o : reps) {
      if (!o.ok || !o.have_simple) continue;
      deltas.push_back(o.delta_hat);
      len2.push_back(o.ci2_hi - o.ci2_lo);
      len3.push_back(o.ci3_hi - o.ci3_lo);
    }
    add("chebyshev", "bias", mean_of(deltas) - truth.delta);
    add("chebyshev", "sd", sd_of(deltas));
    add("chebyshev", "coverage_ci2",
        coverage([](const RepOutcome& o) { return o.ci2_lo; },
                 [](const RepOutcome& o) { return o.ci2_hi; },
                 [](const RepOutcome& o) { return o.have_simple; }));
    add("chebyshev", "length_ci2", mean_of(len2));
    add("chebyshev", "coverage_ci3",
        coverage([](const RepOutcome& o) { return o.ci3_lo; },
                 [](const RepOutcome& o) { return o.ci3_hi; },
                 [](const RepOutcome& o) { return o.have_simple; }));
    add("chebyshev", "length_ci3", mean_of(len3));
  }
  if (want_lpm) {
    std::vector<double> slopes, lens;
    for (const auto& o : reps) {
      if (!o.ok || !o.have_lpm) continue;
      slopes.push_back(o.lpm_slope);
      lens.push_back(o.lpm_hi - o.lpm_lo);
    }
    add("lpm", "bias", mean_of(slopes) - truth.delta);
    add("lpm", "sd", sd_of(slopes));
    add("lpm", "coverage",
        coverage([](const RepOutcome& o) { return o.lpm_lo; },
                 [](const RepOutcome& o) { return o.lpm_hi; },
                 [](const RepOutcome& o) { return o.have_lpm; }));
    add("lpm", "length", mean_of(lens));
  }
  add("all", "failures", static_cast<double>(result.failures));
  return result;
}

void write_study_csv(const StudyResult& result, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw SchemaError("cannot write '" + tmp + "'");
    out << "dgp,T,n,method,stat,value\n";
    char buf[64];
    for (const auto& row : result.rows) {
      std::snprintf(buf, sizeof(buf), "%.10g", row.value);
      out << result.config.dgp << ',' << result.config.T << ','
          << result.config.n << ',' << row.method << ',' << row.stat << ','
          << buf << '\n';
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace felogit
