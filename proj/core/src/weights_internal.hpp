#ifndef FELOGIT_WEIGHTS_INTERNAL_HPP
#define FELOGIT_WEIGHTS_INTERNAL_HPP

// Per-unit algebra shared by the bounds estimator, the polynomial
// approximation estimator and the treatment-effect targets: the target
// polynomial lambda, the c weights, moment ratios and the identified
// term, with analytic beta/gamma derivatives.

#include <Eigen/Dense>
#include <vector>

#include "felogit/bounds.hpp"
#include "felogit/cmle.hpp"
#include "felogit/targets.hpp"

namespace felogit::detail {

double binom(int n, int k);

// Polynomial coefficients (and beta-Jacobian) of the product
//   base(u) * prod_{t in factors} (1 + u (exp((x_t - x_ref_pt)'beta) - 1)).
struct PolyWithJac {
  Eigen::VectorXd coef;
  Eigen::MatrixXd jac;  // rows match coef, cols match beta
};

PolyWithJac lambda_poly(const Eigen::MatrixXd& x_unit,
                        const Eigen::VectorXd& beta,
                        const Eigen::VectorXd& ref_pt, bool ame_base,
                        int skip_period, bool with_jac);

// Everything the plug-in formulas need at one observation.
struct UnitWeights {
  int T = 0;
  double dot_ref = 0.0;            // x*'beta
  Eigen::VectorXd lambda;          // size T+2
  Eigen::MatrixXd dlambda;         // (T+2) x p
  std::vector<double> c;           // c_0..c_T
  Eigen::MatrixXd dc_beta;         // (T+1) x p
  Eigen::MatrixXd dc_gamma;        // (T+1) x (T+1)
  Eigen::VectorXd m_tilde;         // ratios c_t/c_0
  Eigen::MatrixXd dm_beta;         // (T+1) x p
  Eigen::MatrixXd dm_gamma;        // (T+1) x (T+1)
  double r = 0.0;                  // identified per-observation term
  Eigen::VectorXd dr_beta;
  double scale = 0.0;              // beta_k for the AME, 1 otherwise
  Eigen::VectorXd dscale;
};

UnitWeights compute_unit_weights(const Eigen::MatrixXd& x_unit, int s,
                                 const std::vector<double>& gamma,
                                 const Eigen::VectorXd& beta,
                                 const EffectTarget& target, int ref_period,
                                 bool with_derivs);

// Value (and beta-gradient) of
//   exp(s x*'beta)/C_s * sum_{t<=s} binom(T-t, s-t) (lambda_t + b_t lambda_{T+1})
// where b may be empty (then only the lambda_t part is summed).
struct CoreTerm {
  double value = 0.0;
  Eigen::VectorXd dbeta;
};

CoreTerm weighted_core(const SymmetricSumWork& work, int s, double dot_ref,
                       const Eigen::VectorXd& ref_pt,
                       const Eigen::VectorXd& lambda,
                       const Eigen::MatrixXd& dlambda,
                       const std::vector<double>& cheb_b, bool with_derivs);

// Influence assembly for a (possibly conditional) mean of per-unit terms:
//   psi_i = (D_i / share)(a_i - mean + gcorr_i) + mean(dbeta)'phi_i.
struct AssembledSide {
  double estimate = 0.0;
  Eigen::VectorXd psi;
};

AssembledSide assemble_side(const PanelDataset& data, const CmleFit& fit,
                            const std::vector<std::size_t>& cond_indices,
                            const Eigen::VectorXd& values,
                            const Eigen::VectorXd& gcorr,
                            const Eigen::MatrixXd& dbeta);

// Streams for a target over a conditioning set, stratified by panel
// length, each stratum with its own nonparametric fit.
WeightStreams streams_for_target(const PanelDataset& data, const CmleFit& fit,
                                 const GammaOptions& gopts,
                                 const ProjectionConfig& proj,
                                 const EffectTarget& target, int ref_period,
                                 const std::vector<std::size_t>& cond,
                                 bool want_diagnostics);

BoundsEstimate finalize_unconditional(const PanelDataset& data,
                                      const CmleFit& fit,
                                      const WeightStreams& st,
                                      const EffectTarget& target);

}  // namespace felogit::detail

#endif  // FELOGIT_WEIGHTS_INTERNAL_HPP
