#ifndef FELOGIT_BOUNDS_HPP
#define FELOGIT_BOUNDS_HPP

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "felogit/cmle.hpp"
#include "felogit/localpoly.hpp"
#include "felogit/moments.hpp"
#include "felogit/panel.hpp"
#include "felogit/targets.hpp"

namespace felogit {

// Coefficients of the target polynomial sum_t lambda_t u^t together with
// their beta-Jacobian. For the AME the polynomial is
//   u(1-u) prod_{t != ref} (1 + u(exp((x_t - x_ref)'beta) - 1)),
// for the other targets u prod_t (1 + u(exp((x_t - x*)'beta) - 1)) with
// the target's reference point x*.
struct LambdaPoly {
  Eigen::VectorXd coef;  // degree T+1, size T+2
  Eigen::MatrixXd jac;   // (T+2) x p, filled when requested
};

// Reference covariate point of a target for one unit.
Eigen::VectorXd reference_point(const Eigen::MatrixXd& x_unit,
                                const EffectTarget& target, int ref_period);

LambdaPoly lambda_coeffs(const Eigen::MatrixXd& x_unit,
                         const Eigen::VectorXd& beta,
                         const EffectTarget& target, int ref_period,
                         bool with_jacobian = false);

// Weights c_t(x) = sum_{j>=t} binom(T-t, j-t) gamma_j exp(j x*'beta)/C_j.
std::vector<double> c_from_gamma(const std::vector<double>& gamma_x,
                                 const Eigen::MatrixXd& x_unit,
                                 const Eigen::VectorXd& beta,
                                 const EffectTarget& target, int ref_period);

// Probability source for the outcome-count distribution given the
// covariate path: normally a fitted GammaEstimate, but any callable pair
// works (the truth oracles inject closed forms in tests). kappa may be
// empty, in which case the constant threshold rule is used regardless of
// the projection configuration.
struct GammaSource {
  std::function<std::vector<double>(const Eigen::VectorXd&)> gamma;
  std::function<std::vector<double>(const Eigen::VectorXd&)> kappa;
};

GammaSource as_source(const GammaEstimate& estimate);

// How the noisy moment ratios are pushed into the moment space.
struct ProjectionConfig {
  // Per-observation delta-method thresholds when true; otherwise the
  // constant rule c_n = n^(-1/3).
  bool variance_rule = true;
  // Relative mismatch between analytic and finite-difference derivatives
  // of the bound terms that triggers a diagnostic (0 disables the check).
  double derivative_check_tol = 0.0;
};

struct ObsDiagnostics {
  std::string id;
  int s = 0;
  int I_hat = 0;
  double c0 = 0.0;
  double lambda_top = 0.0;
  double q_lower = 0.0;
  double q_upper = 0.0;
  double v_lower = 0.0;
  double v_upper = 0.0;
};

struct BoundsEstimate {
  double lower = 0.0;
  double upper = 0.0;
  Eigen::MatrixXd psi;     // n x 2 influence pairs over the full sample
  Eigen::Matrix2d sigma;   // (1/n) sum psi_i psi_i'
  std::size_t n = 0;
  // Finite-sample analog of the identified-set length bound:
  // mean over observations of |scale| c0 |lambda_{T+1}| / 4^(T_i).
  double width_bound = 0.0;
  std::vector<int> I_hat_counts;  // histogram of the selected orders
  std::vector<ObsDiagnostics> diagnostics;  // filled on request
};

// Per-observation streams for one balanced stratum; building block shared
// by the unconditional and conditional targets.
struct WeightStreams {
  std::vector<std::size_t> unit_index;
  Eigen::VectorXd v_lo, v_up;          // plug-in terms of both endpoints
  Eigen::VectorXd gcorr_lo, gcorr_up;  // D_gamma h'(Z - gamma_hat)
  Eigen::MatrixXd dbeta_lo, dbeta_up;  // per-observation beta-derivatives
  Eigen::VectorXd width_term;
  std::vector<int> I_hat;
  std::vector<ObsDiagnostics> diagnostics;
};

WeightStreams compute_weight_streams(const PanelDataset& data,
                                     const std::vector<std::size_t>& indices,
                                     const CmleFit& fit,
                                     const GammaSource& gamma,
                                     const ProjectionConfig& proj,
                                     const EffectTarget& target,
                                     int ref_period,
                                     bool want_diagnostics = false);

// Nonparametric-step configuration used when the estimator fits gamma
// itself (per panel-length stratum, and per treatment stratum for the
// conditional targets).
struct GammaOptions {
  int ell = 1;
  double bandwidth_override = 0.0;  // common bandwidth when > 0
  double R_n = 0.0;                 // 0: use 5 (n/500)^2
};

// Sharp-bound estimator with influence-function inference. The overload
// taking a GammaEstimate serves balanced data and the unconditional
// targets (AME, ASF); the self-fitting overload also handles ATT/ATU/ATE
// and unbalanced panels.
BoundsEstimate estimate_bounds(const PanelDataset& data, const CmleFit& fit,
                               const GammaEstimate& gamma,
                               const ProjectionConfig& proj,
                               const EffectTarget& target,
                               bool want_diagnostics = false);

BoundsEstimate estimate_bounds(const PanelDataset& data, const CmleFit& fit,
                               const GammaSource& gamma,
                               const ProjectionConfig& proj,
                               const EffectTarget& target,
                               bool want_diagnostics = false);

BoundsEstimate estimate_bounds(const PanelDataset& data, const CmleFit& fit,
                               const GammaOptions& gopts,
                               const ProjectionConfig& proj,
                               const EffectTarget& target,
                               bool want_diagnostics = false);

// Two-sided interval for a partially identified parameter: the critical
// value interpolates between the one- and two-sided normal quantiles as
// the estimated width grows.
double imbens_manski_critical(double width_over_sigma, double alpha);

ConfidenceInterval ci1(const BoundsEstimate& est, const CmleFit& fit,
                       double alpha, int k);

// Treatment-effect bounds for a binary covariate switched 0 -> 1 at the
// reference period. The overall effect recombines the two conditional
// effects with the empirical treatment share, endpoint by endpoint.
struct AteBounds {
  BoundsEstimate att;
  BoundsEstimate atu;
  BoundsEstimate ate;
  double p_treated = 0.0;
  double mean_y_treated = 0.0;
  double mean_y_untreated = 0.0;
};

AteBounds ate_bounds(const PanelDataset& data, const CmleFit& fit,
                     const GammaOptions& gopts, const ProjectionConfig& proj);

BoundsEstimate asf_bounds(const PanelDataset& data, const CmleFit& fit,
                          const GammaOptions& gopts,
                          const ProjectionConfig& proj,
                          const Eigen::VectorXd& x0);

}  // namespace felogit

#endif  // FELOGIT_BOUNDS_HPP
