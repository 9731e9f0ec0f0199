#include "weights_internal.hpp"

#include <cmath>

#include "felogit/bounds.hpp"
#include "felogit/errors.hpp"

namespace felogit::detail {

double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double v = 1.0;
  for (int i = 1; i <= k; ++i) {
    v *= static_cast<double>(n - k + i);
    v /= static_cast<double>(i);
  }
  return v;
}

PolyWithJac lambda_poly(const Eigen::MatrixXd& x_unit,
                        const Eigen::VectorXd& beta,
                        const Eigen::VectorXd& ref_pt, bool ame_base,
                        int skip_period, bool with_jac) {
  const int T = static_cast<int>(x_unit.rows());
  const int p = static_cast<int>(beta.size());

  PolyWithJac out;
  out.coef = Eigen::VectorXd::Zero(T + 2);
  if (with_jac) out.jac = Eigen::MatrixXd::Zero(T + 2, p);
  int degree;
  if (ame_base) {
    out.coef(1) = 1.0;   // u(1-u)
    out.coef(2) = -1.0;
    degree = 2;
  } else {
    out.coef(1) = 1.0;   // u
    degree = 1;
  }

  for (int t = 0; t < T; ++t) {
    if (t == skip_period) continue;
    const Eigen::VectorXd diff = x_unit.row(t).transpose() - ref_pt;
    const double w = std::exp(diff.dot(beta));
    const double a = w - 1.0;  // factor is 1 + a u
    // multiply (coef, jac) by (1 + a u), highest degree first
    for (int d = degree; d >= 0; --d) {
      if (with_jac) {
        out.jac.row(d + 1) += a * out.jac.row(d) +
                              out.coef(d) * w * diff.transpose();
      }
      out.coef(d + 1) += a * out.coef(d);
    }
    ++degree;
  }
  return out;
}

CoreTerm weighted_core(const SymmetricSumWork& work, int s, double dot_ref,
                       const Eigen::VectorXd& ref_pt,
                       const Eigen::VectorXd& lambda,
                       const Eigen::MatrixXd& dlambda,
                       const std::vector<double>& cheb_b, bool with_derivs) {
  const int T = work.periods();
  CoreTerm out;
  const double ratio = work.exp_ratio_from_dot(s, dot_ref);
  double acc = 0.0;
  Eigen::VectorXd dacc;
  if (with_derivs) dacc = Eigen::VectorXd::Zero(dlambda.cols());
  for (int t = 0; t <= s; ++t) {
    const double w = binom(T - t, s - t);
    if (w == 0.0) continue;
    double lam = lambda(t);
    if (!cheb_b.empty()) {
      lam += cheb_b[static_cast<std::size_t>(t)] * lambda(T + 1);
    }
    acc += w * lam;
    if (with_derivs) {
      dacc += w * dlambda.row(t).transpose();
      if (!cheb_b.empty()) {
        dacc += w * cheb_b[static_cast<std::size_t>(t)] *
                dlambda.row(T + 1).transpose();
      }
    }
  }
  out.value = ratio * acc;
  if (with_derivs) {
    // d ratio / d beta = ratio * (s x* - dlog C_s)
    const Eigen::VectorXd dratio =
        ratio * (s * ref_pt - work.dlog_c(s));
    out.dbeta = dratio * acc + ratio * dacc;
  }
  return out;
}

UnitWeights compute_unit_weights(const Eigen::MatrixXd& x_unit, int s,
                                 const std::vector<double>& gamma,
                                 const Eigen::VectorXd& beta,
                                 const EffectTarget& target, int ref_period,
                                 bool with_derivs) {
  const int T = static_cast<int>(x_unit.rows());
  const int p = static_cast<int>(beta.size());
  if (static_cast<int>(gamma.size()) != T + 1) {
    throw DomainError("compute_unit_weights: gamma must have T+1 entries");
  }

  UnitWeights w;
  w.T = T;
  const Eigen::VectorXd ref_pt = reference_point(x_unit, target, ref_period);
  w.dot_ref = ref_pt.dot(beta);

  const bool ame = (target.kind == EffectKind::AME);
  const PolyWithJac lam = lambda_poly(x_unit, beta, ref_pt, ame,
                                      ame ? ref_period : -1, with_derivs);
  w.lambda = lam.coef;
  if (with_derivs) w.dlambda = lam.jac;
  else w.dlambda = Eigen::MatrixXd::Zero(T + 2, p);

  SymmetricSumWork work(x_unit, beta, with_derivs);

  // c_t = sum_{j>=t} binom(T-t, j-t) gamma_j exp(j x*'beta) / C_j
  w.c.assign(static_cast<std::size_t>(T) + 1, 0.0);
  w.dc_gamma = Eigen::MatrixXd::Zero(T + 1, T + 1);
  if (with_derivs) w.dc_beta = Eigen::MatrixXd::Zero(T + 1, p);
  std::vector<double> ratios(static_cast<std::size_t>(T) + 1);
  std::vector<Eigen::VectorXd> dratios;
  if (with_derivs) dratios.resize(static_cast<std::size_t>(T) + 1);
  for (int j = 0; j <= T; ++j) {
    ratios[static_cast<std::size_t>(j)] =
        work.exp_ratio_from_dot(j, w.dot_ref);
    if (with_derivs) {
      dratios[static_cast<std::size_t>(j)] =
          ratios[static_cast<std::size_t>(j)] *
          (j * ref_pt - work.dlog_c(j));
    }
  }
  for (int t = 0; t <= T; ++t) {
    for (int j = t; j <= T; ++j) {
      const double bc = binom(T - t, j - t);
      if (bc == 0.0) continue;
      const double g = gamma[static_cast<std::size_t>(j)];
      w.c[static_cast<std::size_t>(t)] +=
          bc * g * ratios[static_cast<std::size_t>(j)];
      w.dc_gamma(t, j) = bc * ratios[static_cast<std::size_t>(j)];
      if (with_derivs) {
        w.dc_beta.row(t) +=
            bc * g * dratios[static_cast<std::size_t>(j)].transpose();
      }
    }
  }

  const double c0 = w.c[0];
  if (!(c0 > 0.0)) {
    throw EstimationError("compute_unit_weights: c_0 is not positive");
  }
  w.m_tilde = Eigen::VectorXd::Zero(T + 1);
  w.dm_gamma = Eigen::MatrixXd::Zero(T + 1, T + 1);
  if (with_derivs) w.dm_beta = Eigen::MatrixXd::Zero(T + 1, p);
  w.m_tilde(0) = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double mt = w.c[static_cast<std::size_t>(t)] / c0;
    w.m_tilde(t) = mt;
    w.dm_gamma.row(t) = (w.dc_gamma.row(t) - mt * w.dc_gamma.row(0)) / c0;
    if (with_derivs) {
      w.dm_beta.row(t) = (w.dc_beta.row(t) - mt * w.dc_beta.row(0)) / c0;
    }
  }

  // r term: identified part of the per-observation expansion. For the
  // AME it carries the slope factor; the other targets do not.
  const CoreTerm core = weighted_core(work, s, w.dot_ref, ref_pt, w.lambda,
                                      w.dlambda, {}, with_derivs);
  if (ame) {
    w.scale = beta(target.k);
    w.dscale = Eigen::VectorXd::Zero(p);
    w.dscale(target.k) = 1.0;
    w.r = w.scale * core.value;
    if (with_derivs) w.dr_beta = w.dscale * core.value + w.scale * core.dbeta;
  } else {
    w.scale = 1.0;
    w.dscale = Eigen::VectorXd::Zero(p);
    w.r = core.value;
    if (with_derivs) w.dr_beta = core.dbeta;
  }
  if (!with_derivs) {
    w.dr_beta = Eigen::VectorXd::Zero(p);
    w.dm_beta = Eigen::MatrixXd::Zero(T + 1, p);
    w.dc_beta = Eigen::MatrixXd::Zero(T + 1, p);
  }
  return w;
}

}  // namespace felogit::detail
