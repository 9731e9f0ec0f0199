#include "felogit/targets.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "felogit/bounds.hpp"
#include "felogit/errors.hpp"
#include "weights_internal.hpp"

namespace felogit {

std::string to_string(EffectKind kind) {
  switch (kind) {
    case EffectKind::AME: return "ame";
    case EffectKind::ATT: return "att";
    case EffectKind::ATU: return "atu";
    case EffectKind::ATE: return "ate";
    case EffectKind::ASF: return "asf";
  }
  return "?";
}

int reference_period(const PanelDataset& data) {
  if (data.individuals.empty()) {
    throw ValidationError("reference_period: empty dataset");
  }
  int min_T = data.individuals.front().periods();
  for (const auto& u : data.individuals) min_T = std::min(min_T, u.periods());
  return min_T - 1;  // 0-based position, a period every unit has
}

void validate_binary_treatment(const PanelDataset& data, int k) {
  const int ref = reference_period(data);
  for (const auto& u : data.individuals) {
    const double v = u.x(ref, k);
    if (v != 0.0 && v != 1.0) {
      throw ValidationError(
          "treatment covariate must be 0 or 1 at the reference period; unit "
          "'" + u.id + "' has " + std::to_string(v));
    }
  }
}

std::vector<TStratum> stratify_by_T(const PanelDataset& data,
                                    std::size_t min_units) {
  std::map<int, TStratum> by_T;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int T = data.individuals[i].periods();
    auto& st = by_T[T];
    st.T = T;
    st.unit_indices.push_back(i);
  }
  std::vector<TStratum> out;
  for (auto& [T, st] : by_T) {
    if (st.unit_indices.size() < min_units) {
      throw EstimationError("stratum with T = " + std::to_string(T) +
                            " has only " +
                            std::to_string(st.unit_indices.size()) +
                            " unit(s)");
    }
    st.weight = static_cast<double>(st.unit_indices.size()) /
                static_cast<double>(data.size());
    out.push_back(std::move(st));
  }
  return out;
}

PanelDataset subset(const PanelDataset& data,
                    const std::vector<std::size_t>& unit_indices) {
  PanelDataset out;
  out.p = data.p;
  out.effect_index = data.effect_index;
  out.covariate_names = data.covariate_names;
  out.individuals.reserve(unit_indices.size());
  for (std::size_t i : unit_indices) {
    out.individuals.push_back(data.individuals[i]);
    if (data.individuals[i].covariates_constant()) ++out.stayer_count;
  }
  return out;
}

namespace {

// One conditional treatment-effect estimate: the identified outcome mean
// at the reference period minus/plus the partially identified term.
BoundsEstimate conditional_effect(const PanelDataset& data, const CmleFit& fit,
                                  const GammaOptions& gopts,
                                  const ProjectionConfig& proj,
                                  const EffectTarget& target, int ref,
                                  const std::vector<std::size_t>& cond,
                                  bool want_diagnostics) {
  if (cond.empty()) {
    throw EstimationError("conditional_effect: empty " +
                          to_string(target.kind) + " stratum");
  }
  const WeightStreams st = detail::streams_for_target(
      data, fit, gopts, proj, target, ref, cond, want_diagnostics);

  const std::size_t m = st.unit_index.size();
  Eigen::VectorXd y_ref(static_cast<Eigen::Index>(m));
  for (std::size_t pos = 0; pos < m; ++pos) {
    y_ref(static_cast<Eigen::Index>(pos)) = static_cast<double>(
        data.individuals[st.unit_index[pos]].y[static_cast<std::size_t>(ref)]);
  }

  Eigen::VectorXd a_lo, a_up, g_lo, g_up;
  Eigen::MatrixXd d_lo, d_up;
  if (target.kind == EffectKind::ATT) {
    // E(Y_ref | treated) - [bounds of the counterfactual mean]
    a_lo = y_ref - st.v_up;
    a_up = y_ref - st.v_lo;
    g_lo = -st.gcorr_up;
    g_up = -st.gcorr_lo;
    d_lo = -st.dbeta_up;
    d_up = -st.dbeta_lo;
  } else {  // ATU: [bounds of the counterfactual mean] - E(Y_ref | untreated)
    a_lo = st.v_lo - y_ref;
    a_up = st.v_up - y_ref;
    g_lo = st.gcorr_lo;
    g_up = st.gcorr_up;
    d_lo = st.dbeta_lo;
    d_up = st.dbeta_up;
  }

  BoundsEstimate est;
  est.n = data.size();
  const detail::AssembledSide lo =
      detail::assemble_side(data, fit, st.unit_index, a_lo, g_lo, d_lo);
  const detail::AssembledSide up =
      detail::assemble_side(data, fit, st.unit_index, a_up, g_up, d_up);
  est.lower = lo.estimate;
  est.upper = up.estimate;
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

}  // namespace

BoundsEstimate estimate_bounds(const PanelDataset& data, const CmleFit& fit,
                               const GammaOptions& gopts,
                               const ProjectionConfig& proj,
                               const EffectTarget& target,
                               bool want_diagnostics) {
  const int ref = reference_period(data);
  if (target.kind == EffectKind::AME || target.kind == EffectKind::ASF) {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), 0);
    const WeightStreams st = detail::streams_for_target(
        data, fit, gopts, proj, target, ref, all, want_diagnostics);
    return detail::finalize_unconditional(data, fit, st, target);
  }
  if (target.kind == EffectKind::ATE) {
    return ate_bounds(data, fit, gopts, proj).ate;
  }
  validate_binary_treatment(data, target.k);
  std::vector<std::size_t> cond;
  const double want = (target.kind == EffectKind::ATT) ? 1.0 : 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.individuals[i].x(ref, target.k) == want) cond.push_back(i);
  }
  return conditional_effect(data, fit, gopts, proj, target, ref, cond,
                            want_diagnostics);
}

AteBounds ate_bounds(const PanelDataset& data, const CmleFit& fit,
                     const GammaOptions& gopts, const ProjectionConfig& proj) {
  const int ref = reference_period(data);
  const int k = data.effect_index;
  validate_binary_treatment(data, k);

  std::vector<std::size_t> treated;
  std::vector<std::size_t> untreated;
  double sum_y1 = 0.0;
  double sum_y0 = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const PanelUnit& u = data.individuals[i];
    if (u.x(ref, k) == 1.0) {
      treated.push_back(i);
      sum_y1 += u.y[static_cast<std::size_t>(ref)];
    } else {
      untreated.push_back(i);
      sum_y0 += u.y[static_cast<std::size_t>(ref)];
    }
  }
  if (treated.empty() && untreated.empty()) {
    throw EstimationError("ate_bounds: empty dataset");
  }

  AteBounds out;
  out.p_treated =
      static_cast<double>(treated.size()) / static_cast<double>(data.size());
  out.mean_y_treated =
      treated.empty() ? 0.0 : sum_y1 / static_cast<double>(treated.size());
  out.mean_y_untreated =
      untreated.empty() ? 0.0
                        : sum_y0 / static_cast<double>(untreated.size());

  // A one-sided sample: the overall effect degenerates to the populated
  // conditional effect; asking for the other one alone is still an error.
  if (untreated.empty()) {
    out.att = conditional_effect(data, fit, gopts, proj, EffectTarget::att(k),
                                 ref, treated, false);
    out.ate = out.att;
    return out;
  }
  if (treated.empty()) {
    out.atu = conditional_effect(data, fit, gopts, proj, EffectTarget::atu(k),
                                 ref, untreated, false);
    out.ate = out.atu;
    return out;
  }

  out.att = conditional_effect(data, fit, gopts, proj, EffectTarget::att(k),
                               ref, treated, false);
  out.atu = conditional_effect(data, fit, gopts, proj, EffectTarget::atu(k),
                               ref, untreated, false);

  const double p1 = out.p_treated;
  const double p0 = 1.0 - p1;
  BoundsEstimate& ate = out.ate;
  ate.n = data.size();
  ate.lower = p1 * out.att.lower + p0 * out.atu.lower;
  ate.upper = p1 * out.att.upper + p0 * out.atu.upper;
  ate.psi.resize(static_cast<Eigen::Index>(ate.n), 2);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double d =
        (data.individuals[i].x(ref, k) == 1.0) ? 1.0 : 0.0;
    for (int side = 0; side < 2; ++side) {
      const double att_v = side == 0 ? out.att.lower : out.att.upper;
      const double atu_v = side == 0 ? out.atu.lower : out.atu.upper;
      ate.psi(static_cast<Eigen::Index>(i), side) =
          p1 * out.att.psi(static_cast<Eigen::Index>(i), side) +
          p0 * out.atu.psi(static_cast<Eigen::Index>(i), side) +
          (att_v - atu_v) * (d - p1);
    }
  }
  ate.sigma = (ate.psi.transpose() * ate.psi) / static_cast<double>(ate.n);
  ate.width_bound = p1 * out.att.width_bound + p0 * out.atu.width_bound;
  ate.I_hat_counts.assign(
      std::max(out.att.I_hat_counts.size(), out.atu.I_hat_counts.size()), 0);
  for (std::size_t j = 0; j < out.att.I_hat_counts.size(); ++j) {
    ate.I_hat_counts[j] += out.att.I_hat_counts[j];
  }
  for (std::size_t j = 0; j < out.atu.I_hat_counts.size(); ++j) {
    ate.I_hat_counts[j] += out.atu.I_hat_counts[j];
  }
  return out;
}

BoundsEstimate asf_bounds(const PanelDataset& data, const CmleFit& fit,
                          const GammaOptions& gopts,
                          const ProjectionConfig& proj,
                          const Eigen::VectorXd& x0) {
  for (int j = 0; j < x0.size(); ++j) {
    if (!std::isfinite(x0(j))) {
      throw DomainError("asf_bounds: x0 must be finite");
    }
  }
  return estimate_bounds(data, fit, gopts, proj, EffectTarget::asf(x0));
}

}  // namespace felogit
