#include "felogit/simple.hpp"

#include <cmath>
#include <map>

#include "felogit/errors.hpp"
#include "felogit/parallel.hpp"
#include "felogit/stats.hpp"
#include "weights_internal.hpp"

namespace felogit {

namespace {

struct PTermParts {
  double p = 0.0;
  Eigen::VectorXd dp;
  double width = 0.0;  // contribution to the bias radius
};

// AME building block: exp(s x*'beta)/C_s * sum binom (lambda_t + b_t
// lambda_{T+1}), with the bias-radius term binom(T,s)|lambda_{T+1}|
// exp(s x*'beta)/(2 4^T C_s).
PTermParts ame_like_core(const Eigen::MatrixXd& x_unit, int s,
                         const Eigen::VectorXd& beta,
                         const ChebyshevApprox& cheb,
                         const EffectTarget& target, int ref_period,
                         bool with_derivs) {
  const int T = static_cast<int>(x_unit.rows());
  const Eigen::VectorXd ref_pt = reference_point(x_unit, target, ref_period);
  const double dot = ref_pt.dot(beta);
  const bool ame = (target.kind == EffectKind::AME);
  const detail::PolyWithJac lam = detail::lambda_poly(
      x_unit, beta, ref_pt, ame, ame ? ref_period : -1, with_derivs);
  SymmetricSumWork work(x_unit, beta, with_derivs);
  const detail::CoreTerm core = detail::weighted_core(
      work, s, dot, ref_pt, lam.coef, lam.jac, cheb.b, with_derivs);
  PTermParts out;
  out.p = core.value;
  if (with_derivs) out.dp = core.dbeta;
  out.width = detail::binom(T, s) * std::abs(lam.coef(T + 1)) *
              work.exp_ratio_from_dot(s, dot) * std::ldexp(1.0, -(2 * T + 1));
  return out;
}

PTermParts p_term_parts(const Eigen::MatrixXd& x_unit, int s, int y_ref,
                        const Eigen::VectorXd& beta,
                        const ChebyshevApprox& cheb,
                        const EffectTarget& target, int ref_period,
                        bool with_derivs) {
  const int p = static_cast<int>(beta.size());
  switch (target.kind) {
    case EffectKind::AME:
      return ame_like_core(x_unit, s, beta, cheb, target, ref_period,
                           with_derivs);
    case EffectKind::ATE: {
      const bool treated = (x_unit(ref_period, target.k) == 1.0);
      const EffectTarget sub = treated ? EffectTarget::att(target.k)
                                       : EffectTarget::atu(target.k);
      PTermParts core = ame_like_core(x_unit, s, beta, cheb, sub, ref_period,
                                      with_derivs);
      PTermParts out;
      const double sign = treated ? -1.0 : 1.0;
      out.p = y_ref * (treated ? 1.0 : -1.0) + sign * core.p;
      if (with_derivs) out.dp = sign * core.dp;
      out.width = core.width;
      return out;
    }
    default:
      throw DomainError(
          "p_term: the polynomial-approximation estimator serves the AME "
          "and ATE targets");
  }
  (void)p;
}

}  // namespace

double p_term(const Eigen::MatrixXd& x_unit, int s, int y_ref,
              const Eigen::VectorXd& beta, const ChebyshevApprox& cheb,
              const EffectTarget& target, int ref_period) {
  return p_term_parts(x_unit, s, y_ref, beta, cheb, target, ref_period, false)
      .p;
}

double p_term_with_gradient(const Eigen::MatrixXd& x_unit, int s, int y_ref,
                            const Eigen::VectorXd& beta,
                            const ChebyshevApprox& cheb,
                            const EffectTarget& target, int ref_period,
                            Eigen::VectorXd& gradient) {
  const PTermParts parts =
      p_term_parts(x_unit, s, y_ref, beta, cheb, target, ref_period, true);
  gradient = parts.dp;
  return parts.p;
}

SimpleEstimate estimate_simple(const PanelDataset& data, const CmleFit& fit,
                               const EffectTarget& target) {
  if (target.kind != EffectKind::AME && target.kind != EffectKind::ATE) {
    throw DomainError("estimate_simple: target must be the AME or the ATE");
  }
  if (target.kind == EffectKind::ATE) {
    validate_binary_treatment(data, target.k);
  }
  const int ref = reference_period(data);
  const std::size_t n = data.size();
  const int p = data.p;

  std::map<int, ChebyshevApprox> cheb_by_T;
  for (const auto& u : data.individuals) {
    cheb_by_T.emplace(u.periods(), ChebyshevApprox{});
  }
  for (auto& [T, cheb] : cheb_by_T) cheb = chebyshev_pstar(T);

  Eigen::VectorXd p_vals(static_cast<Eigen::Index>(n));
  Eigen::MatrixXd dp_vals(static_cast<Eigen::Index>(n), p);
  Eigen::VectorXd widths(static_cast<Eigen::Index>(n));
  parallel_for(n, [&](std::size_t i) {
    const PanelUnit& u = data.individuals[i];
    const PTermParts parts = p_term_parts(
        u.x, u.s, u.y[static_cast<std::size_t>(ref)], fit.beta_hat,
        cheb_by_T.at(u.periods()), target, ref, true);
    p_vals(static_cast<Eigen::Index>(i)) = parts.p;
    dp_vals.row(static_cast<Eigen::Index>(i)) = parts.dp.transpose();
    widths(static_cast<Eigen::Index>(i)) = parts.width;
  });

  SimpleEstimate est;
  est.kind = target.kind;
  est.n = n;
  est.k = target.k;
  const double mean_p = p_vals.mean();
  const Eigen::VectorXd mean_dp = dp_vals.colwise().mean().transpose();
  const double beta_k = fit.beta_hat(target.k);

  if (target.kind == EffectKind::AME) {
    est.delta_hat = beta_k * mean_p;
    est.rbar_hat = widths.mean();
    est.bbar_hat = std::abs(beta_k) * est.rbar_hat;
    est.psi = mean_p * fit.phi.col(target.k) +
              beta_k * ((p_vals.array() - mean_p).matrix() +
                        fit.phi * mean_dp);
  } else {
    est.delta_hat = mean_p;
    est.bbar_hat = widths.mean();
    est.rbar_hat = est.bbar_hat;
    est.psi = (p_vals.array() - mean_p).matrix() + fit.phi * mean_dp;
  }
  est.sigma_hat =
      std::sqrt(est.psi.squaredNorm() / static_cast<double>(n));
  return est;
}

double folded_normal_quantile(double b, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("folded_normal_quantile: alpha must lie in (0,1)");
  }
  const double ab = std::abs(b);
  auto f = [&](double c) {
    return normal_cdf(c - ab) - normal_cdf(-c - ab) - (1.0 - alpha);
  };
  const double lo = std::max(0.0, ab - 1.0);
  return bisect_increasing(f, lo, ab + 5.0, 1e-12);
}

ConfidenceInterval ci2(const SimpleEstimate& est, double alpha) {
  if (!(est.sigma_hat > 0.0)) {
    throw EstimationError("ci2: degenerate variance estimate");
  }
  const double rn = std::sqrt(static_cast<double>(est.n));
  const double q = folded_normal_quantile(rn * est.bbar_hat / est.sigma_hat,
                                          alpha);
  ConfidenceInterval ci;
  ci.level = 1.0 - alpha;
  ci.method = "CI2";
  const double half = q * est.sigma_hat / rn;
  ci.lo = est.delta_hat - half;
  ci.hi = est.delta_hat + half;
  return ci;
}

ConfidenceInterval ci3(const SimpleEstimate& est, const CmleFit& fit,
                       double gamma, double delta) {
  if (!(gamma > 0.0) || !(delta > 0.0)) {
    throw DomainError("ci3: gamma and delta must be positive");
  }
  if (est.kind != EffectKind::AME) {
    throw DomainError(
        "ci3: the uniformity adjustment charges the slope estimate and is "
        "defined for the AME target");
  }
  if (!(est.sigma_hat > 0.0)) {
    throw EstimationError("ci3: degenerate variance estimate");
  }
  const double rn = std::sqrt(static_cast<double>(est.n));
  const double bbar_gamma =
      (std::abs(fit.beta_hat(est.k)) +
       normal_quantile(1.0 - gamma) * fit.tau(est.k) / rn) *
      est.rbar_hat;
  const double q = folded_normal_quantile(rn * bbar_gamma / est.sigma_hat,
                                          delta);
  ConfidenceInterval ci;
  ci.level = 1.0 - gamma - delta;
  ci.method = "CI3";
  const double half = q * est.sigma_hat / rn;
  ci.lo = est.delta_hat - half;
  ci.hi = est.delta_hat + half;
  return ci;
}

}  // namespace felogit
