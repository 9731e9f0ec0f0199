#include "felogit/localpoly.hpp"

#include <cmath>

#include "felogit/errors.hpp"
#include "felogit/stats.hpp"

namespace felogit {

namespace {

constexpr double kGaussRoughness = 0.28209479177387814;  // 1/(2*sqrt(pi))

// Multi-indices b with |b| <= ell over d variables, graded order, constant
// first.
std::vector<std::vector<int>> build_monomials(int d, int ell) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(d), 0);
  out.push_back(cur);
  for (int deg = 1; deg <= ell; ++deg) {
    // enumerate compositions of deg into d parts
    std::vector<int> idx(static_cast<std::size_t>(deg), 0);
    for (;;) {
      std::fill(cur.begin(), cur.end(), 0);
      for (int k : idx) ++cur[static_cast<std::size_t>(k)];
      out.push_back(cur);
      int pos = deg - 1;
      while (pos >= 0 &&
             idx[static_cast<std::size_t>(pos)] == d - 1) --pos;
      if (pos < 0) break;
      const int next = idx[static_cast<std::size_t>(pos)] + 1;
      for (int k = pos; k < deg; ++k) idx[static_cast<std::size_t>(k)] = next;
    }
  }
  // deduplicate (the composition enumeration above is already
  // non-decreasing, hence unique)
  return out;
}

Eigen::VectorXd compute_column_scales(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  Eigen::VectorXd mean = x.colwise().mean();
  Eigen::VectorXd sd(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var =
        (x.col(j).array() - mean(j)).square().sum() / std::max<double>(1, n - 1);
    sd(j) = std::sqrt(var);
    if (!(sd(j) > 0.0)) sd(j) = 1.0;  // constant column: leave unscaled
  }
  return sd;
}

}  // namespace

Eigen::MatrixXd flatten_covariates(const PanelDataset& data) {
  if (data.individuals.empty()) {
    throw ValidationError("flatten_covariates: empty dataset");
  }
  const int T = data.individuals.front().periods();
  const int p = data.p;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()),
                    static_cast<Eigen::Index>(T * p));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const PanelUnit& u = data.individuals[i];
    if (u.periods() != T) {
      throw ValidationError(
          "flatten_covariates: dataset is unbalanced; stratify by T first");
    }
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < p; ++j) {
        x(static_cast<Eigen::Index>(i), t * p + j) = u.x(t, j);
      }
    }
  }
  return x;
}

std::vector<int> outcome_counts(const PanelDataset& data) {
  std::vector<int> s(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) s[i] = data.individuals[i].s;
  return s;
}

double local_poly_smooth(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& x0, int ell, double h,
                         const Eigen::VectorXd& scales) {
  const Eigen::Index n = x.rows();
  const int d = static_cast<int>(x.cols());
  const auto monos = build_monomials(d, ell);
  const int m = static_cast<int>(monos.size());

  double bandwidth = h;
  for (int attempt = 0; attempt <= 5; ++attempt) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd design(m);
    Eigen::Index effective = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double logw = 0.0;
      for (int c = 0; c < d; ++c) {
        const double z = (x(i, c) - x0(c)) / (bandwidth * scales(c));
        logw -= 0.5 * z * z;
      }
      const double w = std::exp(logw);
      if (w < 1e-14) continue;
      ++effective;
      for (int k = 0; k < m; ++k) {
        double v = 1.0;
        for (int c = 0; c < d; ++c) {
          const int e = monos[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
          for (int rep = 0; rep < e; ++rep) {
            v *= (x(i, c) - x0(c)) / scales(c);
          }
        }
        design(k) = v;
      }
      gram.noalias() += w * design * design.transpose();
      rhs.noalias() += w * y(i) * design;
    }
    if (effective >= m) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
      if (ldlt.info() == Eigen::Success) {
        const Eigen::VectorXd coef = ldlt.solve(rhs);
        const double resid = (gram * coef - rhs).norm();
        if (resid <= 1e-8 * (1.0 + rhs.norm())) {
          return coef(0);
        }
      }
    }
    bandwidth *= 2.0;
  }
  throw EstimationError(
      "local polynomial fit: design stayed singular after widening the "
      "bandwidth");
}

GammaEstimate::GammaEstimate(Eigen::MatrixXd x_flat, std::vector<int> s_values,
                             int T, int ell, std::vector<double> bandwidths)
    : x_(std::move(x_flat)), s_(std::move(s_values)), T_(T), ell_(ell),
      h_(std::move(bandwidths)) {
  if (static_cast<int>(h_.size()) == 1) {
    h_.assign(static_cast<std::size_t>(T_) + 1, h_.front());
  }
  if (static_cast<int>(h_.size()) != T_ + 1) {
    throw ValidationError("GammaEstimate: need one bandwidth per target");
  }
  scale_ = compute_column_scales(x_);
  z_ = x_ * scale_.cwiseInverse().asDiagonal();
  const int d = dimension();
  density_h_ =
      1.06 * std::pow(static_cast<double>(x_.rows()), -1.0 / (d + 4));
  monomials_ = build_monomials(d, ell_);
}

std::vector<double> GammaEstimate::raw(const Eigen::VectorXd& x0) const {
  std::vector<double> out(static_cast<std::size_t>(T_) + 1);
  const Eigen::Index n = x_.rows();
  for (int j = 0; j <= T_; ++j) {
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      y(i) = (s_[static_cast<std::size_t>(i)] == j) ? 1.0 : 0.0;
    }
    out[static_cast<std::size_t>(j)] = local_poly_smooth(
        x_, y, x0, ell_, h_[static_cast<std::size_t>(j)], scale_);
  }
  return out;
}

std::vector<double> GammaEstimate::gamma(const Eigen::VectorXd& x0) const {
  std::vector<double> g = raw(x0);
  double total = 0.0;
  for (auto& v : g) {
    v = std::min(1.0, std::max(0.0, v));
    total += v;
  }
  if (total <= 0.0) {
    throw EstimationError("GammaEstimate: degenerate probabilities at query");
  }
  for (auto& v : g) v /= total;
  return g;
}

double GammaEstimate::density(const Eigen::VectorXd& x0) const {
  const Eigen::Index n = z_.rows();
  const int d = dimension();
  const Eigen::VectorXd z0 = x0.cwiseQuotient(scale_);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double logk = 0.0;
    for (int c = 0; c < d; ++c) {
      const double u = (z_(i, c) - z0(c)) / density_h_;
      logk += -0.5 * u * u;
    }
    acc += std::exp(logk);
  }
  const double norm =
      std::pow(2.506628274631000502 * density_h_, d);  // (sqrt(2 pi) h)^d
  return acc / (static_cast<double>(n) * norm);
}

std::vector<double> GammaEstimate::kappa(const Eigen::VectorXd& x0) const {
  const int d = dimension();
  const double f = std::max(density(x0), 1e-12);
  const double n = static_cast<double>(x_.rows());
  std::vector<double> out(static_cast<std::size_t>(T_) + 1);
  for (int j = 0; j <= T_; ++j) {
    const double hj = h_[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(j)] =
        std::pow(kGaussRoughness, d) / (n * std::pow(hj, d) * f);
  }
  return out;
}

std::vector<double> local_poly_fit(const PanelDataset& data,
                                   const Eigen::VectorXd& x0, int ell,
                                   double h) {
  if (h <= 0.0) throw DomainError("local_poly_fit: bandwidth must be > 0");
  const int T = data.individuals.front().periods();
  GammaEstimate est(flatten_covariates(data), outcome_counts(data), T, ell,
                    {h});
  return est.gamma(x0);
}

namespace {

// Probability of S = t when the individual effect is the constant a.
double pilot_gamma(const Eigen::MatrixXd& x_unit, const Eigen::VectorXd& beta,
                   double a, int t) {
  SymmetricSumWork work(x_unit, beta, false);
  const int T = static_cast<int>(x_unit.rows());
  double log_den = 0.0;
  for (int s = 0; s < T; ++s) {
    const double idx = x_unit.row(s).dot(beta) + a;
    // log(1 + e^idx), stable
    log_den += (idx > 0.0) ? idx + std::log1p(std::exp(-idx))
                           : std::log1p(std::exp(idx));
  }
  return std::exp(work.log_c(t) + t * a - log_den);
}

}  // namespace

BandwidthResult bandwidth_rule(const PanelDataset& data, const CmleFit& fit,
                               double R_n, int ell) {
  const int T = data.individuals.front().periods();
  const int p = data.p;
  const int d = T * p;
  const std::size_t n = data.size();
  const double fallback =
      1.06 * std::pow(static_cast<double>(n), -1.0 / (d + 4));

  BandwidthResult out;
  out.h.assign(static_cast<std::size_t>(T) + 1, fallback);

  // Pilot: constant-effect MLE of the full likelihood at beta_hat.
  double a = 0.0;
  bool pilot_ok = false;
  for (int iter = 0; iter < 100; ++iter) {
    double g = 0.0;
    double hess = 0.0;
    for (const auto& u : data.individuals) {
      for (int t = 0; t < u.periods(); ++t) {
        const double idx = u.x.row(t).dot(fit.beta_hat) + a;
        const double prob = logistic_cdf(idx);
        g += u.y[static_cast<std::size_t>(t)] - prob;
        hess += prob * (1.0 - prob);
      }
    }
    if (hess <= 1e-12 || std::abs(a) > 50.0) break;
    const double step = g / hess;
    a += step;
    if (std::abs(step) < 1e-10) {
      pilot_ok = std::abs(a) <= 50.0;
      break;
    }
  }
  if (!pilot_ok) {
    out.pilot_ok = false;
    return out;
  }
  out.pilot_ok = true;
  out.alpha_pilot = a;

  const Eigen::MatrixXd x_flat = flatten_covariates(data);
  const Eigen::VectorXd scales = compute_column_scales(x_flat);

  // Pilot gamma_t as a function of the flattened (unstandardised) path.
  auto gamma_at = [&](const Eigen::VectorXd& flat, int t) {
    Eigen::MatrixXd xu(T, p);
    for (int tt = 0; tt < T; ++tt) {
      for (int j = 0; j < p; ++j) xu(tt, j) = flat(tt * p + j);
    }
    return pilot_gamma(xu, fit.beta_hat, a, t);
  };

  // Density pilot for the standardised covariates.
  GammaEstimate density_helper(x_flat, outcome_counts(data), T, ell,
                               {fallback});

  const double fd_step = 1e-2;  // in standardised units
  for (int t = 0; t <= T; ++t) {
    double sum_b2 = 0.0;
    double sum_var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::VectorXd flat = x_flat.row(static_cast<Eigen::Index>(i));
      const double g0 = gamma_at(flat, t);
      double trace = 0.0;  // sum of second derivatives in standardised coords
      for (int c = 0; c < d; ++c) {
        Eigen::VectorXd hi = flat;
        Eigen::VectorXd lo = flat;
        const double delta = fd_step * scales(c);
        hi(c) += delta;
        lo(c) -= delta;
        trace += (gamma_at(hi, t) - 2.0 * g0 + gamma_at(lo, t)) /
                 (fd_step * fd_step);
      }
      sum_b2 += trace * trace;  // mu_2(K) = 1 for the Gaussian kernel
      const double f = std::max(density_helper.density(flat), 1e-12);
      sum_var += std::pow(kGaussRoughness, d) * g0 * (1.0 - g0) / f;
    }
    const double B2 = sum_b2 / static_cast<double>(n);
    const double V = sum_var / static_cast<double>(n);
    if (B2 > 1e-14 && V > 0.0) {
      // sigma^2(h) = V/(n h^d) equals R_n * B2 * h^4 at the returned h.
      out.h[static_cast<std::size_t>(t)] =
          std::pow(V / (static_cast<double>(n) * R_n * B2), 1.0 / (d + 4));
    }
    out.h[static_cast<std::size_t>(t)] = std::min(
        10.0, std::max(1e-2, out.h[static_cast<std::size_t>(t)]));
  }
  return out;
}

GammaEstimate make_gamma_estimate(const PanelDataset& data, const CmleFit& fit,
                                  double R_n, int ell,
                                  double bandwidth_override) {
  const int T = data.individuals.front().periods();
  std::vector<double> h;
  if (bandwidth_override > 0.0) {
    h.assign(static_cast<std::size_t>(T) + 1, bandwidth_override);
  } else {
    h = bandwidth_rule(data, fit, R_n, ell).h;
  }
  return GammaEstimate(flatten_covariates(data), outcome_counts(data), T, ell,
                       std::move(h));
}

}  // namespace felogit
