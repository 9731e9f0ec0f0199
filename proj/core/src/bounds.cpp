#include "felogit/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "felogit/errors.hpp"
#include "felogit/parallel.hpp"
#include "felogit/stats.hpp"
#include "weights_internal.hpp"

namespace felogit {

Eigen::VectorXd reference_point(const Eigen::MatrixXd& x_unit,
                                const EffectTarget& target, int ref_period) {
  switch (target.kind) {
    case EffectKind::ASF:
      if (target.x0.size() != x_unit.cols()) {
        throw DomainError("reference_point: x0 has the wrong dimension");
      }
      return target.x0;
    case EffectKind::ATT: {
      Eigen::VectorXd ref = x_unit.row(ref_period).transpose();
      ref(target.k) = 0.0;  // counterfactual untreated state
      return ref;
    }
    case EffectKind::ATU: {
      Eigen::VectorXd ref = x_unit.row(ref_period).transpose();
      ref(target.k) = 1.0;
      return ref;
    }
    case EffectKind::AME:
      return x_unit.row(ref_period).transpose();
    case EffectKind::ATE:
      throw DomainError(
          "reference_point: the ATE is a combination of ATT and ATU");
  }
  throw DomainError("reference_point: unknown target");
}

LambdaPoly lambda_coeffs(const Eigen::MatrixXd& x_unit,
                         const Eigen::VectorXd& beta,
                         const EffectTarget& target, int ref_period,
                         bool with_jacobian) {
  const Eigen::VectorXd ref = reference_point(x_unit, target, ref_period);
  const bool ame = (target.kind == EffectKind::AME);
  const detail::PolyWithJac poly = detail::lambda_poly(
      x_unit, beta, ref, ame, ame ? ref_period : -1, with_jacobian);
  return {poly.coef, poly.jac};
}

std::vector<double> c_from_gamma(const std::vector<double>& gamma_x,
                                 const Eigen::MatrixXd& x_unit,
                                 const Eigen::VectorXd& beta,
                                 const EffectTarget& target, int ref_period) {
  const detail::UnitWeights w = detail::compute_unit_weights(
      x_unit, 0, gamma_x, beta, target, ref_period, false);
  return w.c;
}

namespace {

// Per-observation delta-method thresholds for the order selection:
// sd of each determinant under the local-polynomial noise, times the
// iterated-logarithm factor.
ProjectionThresholds variance_thresholds(const Eigen::VectorXd& m_tilde,
                                         const Eigen::MatrixXd& dm_gamma,
                                         const std::vector<double>& gamma,
                                         const std::vector<double>& kappa,
                                         std::size_t n) {
  const int T = static_cast<int>(m_tilde.size()) - 1;
  ProjectionThresholds th;
  th.lower.assign(static_cast<std::size_t>(T), 0.0);
  th.upper.assign(static_cast<std::size_t>(T), 0.0);
  th.sign_cutoff.assign(static_cast<std::size_t>(T), 0.0);

  const int g = static_cast<int>(gamma.size());
  Eigen::MatrixXd v_gamma(g, g);
  for (int a = 0; a < g; ++a) {
    for (int b = 0; b < g; ++b) {
      const double cov = (a == b ? gamma[static_cast<std::size_t>(a)] : 0.0) -
                         gamma[static_cast<std::size_t>(a)] *
                             gamma[static_cast<std::size_t>(b)];
      v_gamma(a, b) = std::sqrt(kappa[static_cast<std::size_t>(a)] *
                                kappa[static_cast<std::size_t>(b)]) *
                      cov;
    }
  }
  const Eigen::MatrixXd v_m = dm_gamma * v_gamma * dm_gamma.transpose();

  const double loglog =
      std::sqrt(2.0 * std::log(std::log(std::max<double>(n, 3.0))));
  const std::span<const double> mv(m_tilde.data(),
                                   static_cast<std::size_t>(T) + 1);
  for (int t = 1; t <= T; ++t) {
    for (const BoundarySide side :
         {BoundarySide::Lower, BoundarySide::Upper}) {
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(T + 1);
      grad.head(t + 1) = hankel_det_gradient(mv.subspan(0, t + 1), t, side);
      const double var = std::max(0.0, grad.dot(v_m * grad));
      const double thr = std::max(1e-10, std::sqrt(var) * loglog);
      if (side == BoundarySide::Lower) {
        th.lower[static_cast<std::size_t>(t - 1)] = thr;
      } else {
        th.upper[static_cast<std::size_t>(t - 1)] = thr;
      }
    }
    th.sign_cutoff[static_cast<std::size_t>(t - 1)] =
        std::sqrt(th.lower[static_cast<std::size_t>(t - 1)] *
                  th.upper[static_cast<std::size_t>(t - 1)]);
  }
  return th;
}

struct ObsResult {
  double v_lo = 0.0;
  double v_up = 0.0;
  double gcorr_lo = 0.0;
  double gcorr_up = 0.0;
  Eigen::VectorXd dbeta_lo;
  Eigen::VectorXd dbeta_up;
  double width = 0.0;
  int I_hat = 0;
  ObsDiagnostics diag;
  bool failed = false;
  std::string failure;
  int deriv_mismatches = 0;
};

struct EndpointPieces {
  double q_lo = 0.0;
  double q_up = 0.0;
  Eigen::RowVectorXd dqlo_dm;
  Eigen::RowVectorXd dqup_dm;
  int I_hat = 0;
};

EndpointPieces endpoint_pieces(const detail::UnitWeights& uw,
                               const ProjectionThresholds& th,
                               bool with_derivs) {
  EndpointPieces out;
  const int T = uw.T;
  MomentVector mt{std::vector<double>(uw.m_tilde.data(),
                                      uw.m_tilde.data() + T + 1)};
  const ProjectionResult proj = project_moments(mt, th, with_derivs);
  out.I_hat = proj.I_hat;
  Eigen::VectorXd dql, dqu;
  const ExtremalMoments ext = extremal_moments_with_jacobian(
      proj.m_hat, with_derivs ? &dql : nullptr, with_derivs ? &dqu : nullptr);
  out.q_lo = ext.q_lower;
  out.q_up = ext.q_upper;
  if (with_derivs) {
    out.dqlo_dm = dql.transpose() * proj.jacobian;
    out.dqup_dm = dqu.transpose() * proj.jacobian;
  }
  return out;
}

ObsResult compute_obs(const PanelDataset& data, std::size_t unit_idx,
                      const CmleFit& fit, const GammaSource& gamma,
                      const ProjectionConfig& proj_cfg,
                      const EffectTarget& target, int ref_period,
                      bool want_diagnostics) {
  ObsResult res;
  const PanelUnit& u = data.individuals[unit_idx];
  const int T = u.periods();
  const int p = data.p;

  Eigen::VectorXd flat(static_cast<Eigen::Index>(T * p));
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < p; ++j) flat(t * p + j) = u.x(t, j);
  }
  const std::vector<double> g = gamma.gamma(flat);

  const detail::UnitWeights uw = detail::compute_unit_weights(
      u.x, u.s, g, fit.beta_hat, target, ref_period, true);

  ProjectionThresholds th =
      (proj_cfg.variance_rule && gamma.kappa)
          ? variance_thresholds(uw.m_tilde, uw.dm_gamma, g,
                                gamma.kappa(flat), data.size())
          : ProjectionThresholds::constant_rule(T, data.size());

  const double lam_top = uw.lambda(T + 1);
  const double sel = uw.scale * lam_top;  // sign rule
  res.dbeta_lo = uw.dr_beta;
  res.dbeta_up = uw.dr_beta;
  res.v_lo = uw.r;
  res.v_up = uw.r;
  res.width = std::abs(uw.scale) * uw.c[0] * std::abs(lam_top) *
              std::ldexp(1.0, -2 * T);

  if (lam_top != 0.0 && uw.scale != 0.0) {
    const EndpointPieces ep = endpoint_pieces(uw, th, true);
    res.I_hat = ep.I_hat;
    const bool take_lower_first = (sel >= 0.0);
    const double q_for_lo = take_lower_first ? ep.q_lo : ep.q_up;
    const double q_for_up = take_lower_first ? ep.q_up : ep.q_lo;
    const Eigen::RowVectorXd& dq_lo_dm =
        take_lower_first ? ep.dqlo_dm : ep.dqup_dm;
    const Eigen::RowVectorXd& dq_up_dm =
        take_lower_first ? ep.dqup_dm : ep.dqlo_dm;

    const double c0 = uw.c[0];
    const double common = uw.scale * c0 * lam_top;
    res.v_lo += common * q_for_lo;
    res.v_up += common * q_for_up;

    // d(common)/dbeta
    const Eigen::VectorXd dcommon =
        uw.dscale * (c0 * lam_top) +
        uw.scale * (uw.dc_beta.row(0).transpose() * lam_top +
                    c0 * uw.dlambda.row(T + 1).transpose());
    const Eigen::VectorXd dq_lo_beta =
        (dq_lo_dm * uw.dm_beta).transpose();
    const Eigen::VectorXd dq_up_beta =
        (dq_up_dm * uw.dm_beta).transpose();
    res.dbeta_lo += dcommon * q_for_lo + common * dq_lo_beta;
    res.dbeta_up += dcommon * q_for_up + common * dq_up_beta;

    // gamma-direction: (d common/d gamma) q + common dq/dgamma, contracted
    // with Z - gamma_hat.
    Eigen::VectorXd z_minus_g(T + 1);
    for (int j = 0; j <= T; ++j) {
      z_minus_g(j) = ((u.s == j) ? 1.0 : 0.0) - g[static_cast<std::size_t>(j)];
    }
    const Eigen::RowVectorXd dcommon_g =
        uw.scale * lam_top * uw.dc_gamma.row(0);
    const Eigen::RowVectorXd dv_lo_g =
        dcommon_g * q_for_lo + common * (dq_lo_dm * uw.dm_gamma);
    const Eigen::RowVectorXd dv_up_g =
        dcommon_g * q_for_up + common * (dq_up_dm * uw.dm_gamma);
    res.gcorr_lo = dv_lo_g * z_minus_g;
    res.gcorr_up = dv_up_g * z_minus_g;

    if (want_diagnostics) {
      res.diag.q_lower = ep.q_lo;
      res.diag.q_upper = ep.q_up;
    }

    // Optional finite-difference audit of the analytic derivatives.
    if (proj_cfg.derivative_check_tol > 0.0) {
      const double tol = proj_cfg.derivative_check_tol;
      const double step = 1e-6;
      auto value_at = [&](const Eigen::VectorXd& beta_pt,
                          const std::vector<double>& gamma_pt, bool lower) {
        const detail::UnitWeights w2 = detail::compute_unit_weights(
            u.x, u.s, gamma_pt, beta_pt, target, ref_period, false);
        const EndpointPieces ep2 = endpoint_pieces(w2, th, false);
        const double sel2 = w2.scale * w2.lambda(T + 1);
        const double q2 = (lower == (sel2 >= 0.0)) ? ep2.q_lo : ep2.q_up;
        return w2.r + w2.scale * w2.c[0] * w2.lambda(T + 1) * q2;
      };
      for (int j = 0; j < p; ++j) {
        Eigen::VectorXd bp = fit.beta_hat;
        bp(j) += step;
        Eigen::VectorXd bm = fit.beta_hat;
        bm(j) -= step;
        const double fd_lo =
            (value_at(bp, g, true) - value_at(bm, g, true)) / (2 * step);
        const double fd_up =
            (value_at(bp, g, false) - value_at(bm, g, false)) / (2 * step);
        if (std::abs(fd_lo - res.dbeta_lo(j)) >
                tol * (1.0 + std::abs(fd_lo)) ||
            std::abs(fd_up - res.dbeta_up(j)) >
                tol * (1.0 + std::abs(fd_up))) {
          ++res.deriv_mismatches;
        }
      }
      for (int j = 0; j <= T; ++j) {
        std::vector<double> gp = g;
        std::vector<double> gm = g;
        gp[static_cast<std::size_t>(j)] += step;
        gm[static_cast<std::size_t>(j)] -= step;
        const double fd_lo =
            (value_at(fit.beta_hat, gp, true) -
             value_at(fit.beta_hat, gm, true)) /
            (2 * step);
        const double an_lo = dv_lo_g(j);
        if (std::abs(fd_lo - an_lo) > tol * (1.0 + std::abs(fd_lo))) {
          ++res.deriv_mismatches;
        }
      }
    }
  } else {
    // Degenerate polynomial or zero slope: the partially identified term
    // vanishes identically, so its derivatives do too.
    res.I_hat = endpoint_pieces(uw, th, false).I_hat;
    res.gcorr_lo = res.gcorr_up = 0.0;
  }

  if (want_diagnostics) {
    res.diag.id = u.id;
    res.diag.s = u.s;
    res.diag.I_hat = res.I_hat;
    res.diag.c0 = uw.c[0];
    res.diag.lambda_top = lam_top;
    res.diag.v_lower = res.v_lo;
    res.diag.v_upper = res.v_up;
  }
  return res;
}

}  // namespace

GammaSource as_source(const GammaEstimate& estimate) {
  GammaSource src;
  src.gamma = [&estimate](const Eigen::VectorXd& x) {
    return estimate.gamma(x);
  };
  src.kappa = [&estimate](const Eigen::VectorXd& x) {
    return estimate.kappa(x);
  };
  return src;
}

WeightStreams compute_weight_streams(const PanelDataset& data,
                                     const std::vector<std::size_t>& indices,
                                     const CmleFit& fit,
                                     const GammaSource& gamma,
                                     const ProjectionConfig& proj,
                                     const EffectTarget& target,
                                     int ref_period, bool want_diagnostics) {
  const std::size_t m = indices.size();
  const int p = data.p;
  WeightStreams st;
  st.unit_index = indices;
  st.v_lo.resize(static_cast<Eigen::Index>(m));
  st.v_up.resize(static_cast<Eigen::Index>(m));
  st.gcorr_lo.resize(static_cast<Eigen::Index>(m));
  st.gcorr_up.resize(static_cast<Eigen::Index>(m));
  st.dbeta_lo.resize(static_cast<Eigen::Index>(m), p);
  st.dbeta_up.resize(static_cast<Eigen::Index>(m), p);
  st.width_term.resize(static_cast<Eigen::Index>(m));
  st.I_hat.resize(m);
  if (want_diagnostics) st.diagnostics.resize(m);

  std::vector<ObsResult> results(m);
  parallel_for(m, [&](std::size_t pos) {
    try {
      results[pos] = compute_obs(data, indices[pos], fit, gamma, proj, target,
                                 ref_period, want_diagnostics);
    } catch (const Error& e) {
      results[pos].failed = true;
      results[pos].failure = e.what();
    }
  });

  std::ostringstream failures;
  std::size_t n_failed = 0;
  int mismatches = 0;
  for (std::size_t pos = 0; pos < m; ++pos) {
    const ObsResult& r = results[pos];
    if (r.failed) {
      if (n_failed < 10) {
        failures << (n_failed ? ", " : "")
                 << data.individuals[indices[pos]].id << " (" << r.failure
                 << ")";
      }
      ++n_failed;
      continue;
    }
    mismatches += r.deriv_mismatches;
    st.v_lo(static_cast<Eigen::Index>(pos)) = r.v_lo;
    st.v_up(static_cast<Eigen::Index>(pos)) = r.v_up;
    st.gcorr_lo(static_cast<Eigen::Index>(pos)) = r.gcorr_lo;
    st.gcorr_up(static_cast<Eigen::Index>(pos)) = r.gcorr_up;
    st.dbeta_lo.row(static_cast<Eigen::Index>(pos)) = r.dbeta_lo.transpose();
    st.dbeta_up.row(static_cast<Eigen::Index>(pos)) = r.dbeta_up.transpose();
    st.width_term(static_cast<Eigen::Index>(pos)) = r.width;
    st.I_hat[pos] = r.I_hat;
    if (want_diagnostics) st.diagnostics[pos] = r.diag;
  }
  if (n_failed > 0) {
    throw EstimationError(
        "estimate_bounds: weight computation failed for " +
        std::to_string(n_failed) + " observation(s): " + failures.str());
  }
  if (mismatches > 0) {
    throw NumericError(
        "estimate_bounds: analytic and finite-difference derivatives "
        "disagree at " +
        std::to_string(mismatches) + " coordinate(s)");
  }
  return st;
}

namespace detail {

AssembledSide assemble_side(const PanelDataset& data, const CmleFit& fit,
                            const std::vector<std::size_t>& cond_indices,
                            const Eigen::VectorXd& values,
                            const Eigen::VectorXd& gcorr,
                            const Eigen::MatrixXd& dbeta) {
  const std::size_t n = data.size();
  const std::size_t m = cond_indices.size();
  if (m == 0) throw EstimationError("assemble_side: empty stratum");
  const double share = static_cast<double>(m) / static_cast<double>(n);

  AssembledSide out;
  out.estimate = values.mean();
  const Eigen::VectorXd mean_dbeta = dbeta.colwise().mean().transpose();

  out.psi = fit.phi * mean_dbeta;  // beta part for every unit
  for (std::size_t pos = 0; pos < m; ++pos) {
    const std::size_t i = cond_indices[pos];
    out.psi(static_cast<Eigen::Index>(i)) +=
        (values(static_cast<Eigen::Index>(pos)) - out.estimate +
         gcorr(static_cast<Eigen::Index>(pos))) /
        share;
  }
  return out;
}

WeightStreams streams_for_target(const PanelDataset& data, const CmleFit& fit,
                                 const GammaOptions& gopts,
                                 const ProjectionConfig& proj,
                                 const EffectTarget& target, int ref_period,
                                 const std::vector<std::size_t>& cond,
                                 bool want_diagnostics) {
  WeightStreams all;
  const int p = data.p;
  all.dbeta_lo.resize(0, p);
  all.dbeta_up.resize(0, p);

  // Group the conditioning set by panel length.
  std::vector<std::pair<int, std::vector<std::size_t>>> groups;
  for (std::size_t i : cond) {
    const int T = data.individuals[i].periods();
    auto it = std::find_if(groups.begin(), groups.end(),
                           [T](const auto& g) { return g.first == T; });
    if (it == groups.end()) {
      groups.push_back({T, {i}});
    } else {
      it->second.push_back(i);
    }
  }
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  for (const auto& [T, idxs] : groups) {
    const PanelDataset sub = subset(data, idxs);
    const double rn =
        gopts.R_n > 0.0
            ? gopts.R_n
            : default_undersmoothing(sub.size());
    const GammaEstimate gam = make_gamma_estimate(
        sub, fit, rn, gopts.ell, gopts.bandwidth_override);
    // Stream computation works on the subset dataset (indices 0..m-1),
    // then rows are mapped back to the full-sample positions.
    std::vector<std::size_t> local(idxs.size());
    std::iota(local.begin(), local.end(), 0);
    WeightStreams st =
        compute_weight_streams(sub, local, fit, as_source(gam), proj, target,
                               ref_period, want_diagnostics);
    const Eigen::Index base = all.v_lo.size();
    const Eigen::Index add = st.v_lo.size();
    auto append = [&](Eigen::VectorXd& dst, const Eigen::VectorXd& src) {
      dst.conservativeResize(base + add);
      dst.tail(add) = src;
    };
    append(all.v_lo, st.v_lo);
    append(all.v_up, st.v_up);
    append(all.gcorr_lo, st.gcorr_lo);
    append(all.gcorr_up, st.gcorr_up);
    append(all.width_term, st.width_term);
    all.dbeta_lo.conservativeResize(base + add, p);
    all.dbeta_lo.bottomRows(add) = st.dbeta_lo;
    all.dbeta_up.conservativeResize(base + add, p);
    all.dbeta_up.bottomRows(add) = st.dbeta_up;
    for (std::size_t pos = 0; pos < idxs.size(); ++pos) {
      all.unit_index.push_back(idxs[pos]);
      all.I_hat.push_back(st.I_hat[pos]);
      if (want_diagnostics) all.diagnostics.push_back(st.diagnostics[pos]);
    }
  }
  return all;
}

BoundsEstimate finalize_unconditional(const PanelDataset& data,
                                      const CmleFit& fit,
                                      const WeightStreams& st,
                                      const EffectTarget& target) {
  BoundsEstimate est;
  est.n = data.size();
  const AssembledSide lo = assemble_side(data, fit, st.unit_index, st.v_lo,
                                         st.gcorr_lo, st.dbeta_lo);
  const AssembledSide up = assemble_side(data, fit, st.unit_index, st.v_up,
                                         st.gcorr_up, st.dbeta_up);
  est.lower = lo.estimate;
  est.upper = up.estimate;
  if (target.kind == EffectKind::ASF) {
    est.lower = std::min(1.0, std::max(0.0, est.lower));
    est.upper = std::min(1.0, std::max(0.0, est.upper));
  }
  est.psi.resize(static_cast<Eigen::Index>(est.n), 2);
  est.psi.col(0) = lo.psi;
  est.psi.col(1) = up.psi;
  est.sigma = (est.psi.transpose() * est.psi) / static_cast<double>(est.n);
  est.width_bound = st.width_term.mean();
  est.I_hat_counts.assign(static_cast<std::size_t>(data.max_periods()) + 1, 0);
  for (int ih : st.I_hat) {
    ++est.I_hat_counts[static_cast<std::size_t>(
        std::min<int>(ih, data.max_periods()))];
  }
  est.diagnostics = st.diagnostics;
  return est;
}

}  // namespace detail

BoundsEstimate estimate_bounds(const PanelDataset& data, const CmleFit& fit,
                               const GammaSource& gamma,
                               const ProjectionConfig& proj,
                               const EffectTarget& target,
                               bool want_diagnostics) {
  if (target.kind != EffectKind::AME && target.kind != EffectKind::ASF) {
    throw DomainError(
        "estimate_bounds: the prefitted-gamma overload serves the AME and "
        "ASF targets; use the self-fitting overload for treatment effects");
  }
  if (!data.balanced()) {
    throw ValidationError(
        "estimate_bounds: unbalanced data requires the self-fitting "
        "overload");
  }
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  const int ref = reference_period(data);
  const WeightStreams st = compute_weight_streams(
      data, all, fit, gamma, proj, target, ref, want_diagnostics);
  return detail::finalize_unconditional(data, fit, st, target);
}

BoundsEstimate estimate_bounds(const PanelDataset& data, const CmleFit& fit,
                               const GammaEstimate& gamma,
                               const ProjectionConfig& proj,
                               const EffectTarget& target,
                               bool want_diagnostics) {
  return estimate_bounds(data, fit, as_source(gamma), proj, target,
                         want_diagnostics);
}

double imbens_manski_critical(double width_over_sigma, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("imbens_manski_critical: alpha must lie in (0,1)");
  }
  const double w = std::max(0.0, width_over_sigma);
  auto f = [&](double c) {
    return normal_cdf(c + w) - normal_cdf(-c) - (1.0 - alpha);
  };
  return bisect_increasing(f, 0.0, 6.0, 1e-12);
}

ConfidenceInterval ci1(const BoundsEstimate& est, const CmleFit& fit,
                       double alpha, int k) {
  const double s1 = est.sigma(0, 0);
  const double s2 = est.sigma(1, 1);
  if (!(s1 > 0.0) || !(s2 > 0.0)) {
    throw EstimationError(
        "ci1: degenerate influence variance; a larger sample is needed");
  }
  const double n = static_cast<double>(est.n);
  const double width =
      std::sqrt(n) * (est.upper - est.lower) / std::sqrt(std::max(s1, s2));
  const double c = imbens_manski_critical(width, alpha);

  ConfidenceInterval ci;
  ci.level = 1.0 - alpha;
  ci.method = "CI1";
  ci.lo = est.lower - c * std::sqrt(s1 / n);
  ci.hi = est.upper + c * std::sqrt(s2 / n);

  // If the slope coefficient is not significantly different from zero the
  // interval is hulled with {0}.
  const double tau_k = fit.tau(k);
  const double tstat =
      tau_k > 0.0 ? std::abs(fit.beta_hat(k)) * std::sqrt(n) / tau_k
                  : std::numeric_limits<double>::infinity();
  if (tstat <= normal_quantile(1.0 - alpha / 2.0)) {
    ci.lo = std::min(ci.lo, 0.0);
    ci.hi = std::max(ci.hi, 0.0);
  }
  return ci;
}

}  // namespace felogit
