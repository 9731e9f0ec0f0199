#ifndef FELOGIT_SIMPLE_HPP
#define FELOGIT_SIMPLE_HPP

#include <Eigen/Dense>

#include "felogit/chebyshev.hpp"
#include "felogit/cmle.hpp"
#include "felogit/panel.hpp"
#include "felogit/targets.hpp"

namespace felogit {

// Plug-in estimator that replaces the unidentified moment with its best
// polynomial approximation, plus the data needed for bias-aware
// inference.
struct SimpleEstimate {
  double delta_hat = 0.0;
  double sigma_hat = 0.0;
  double rbar_hat = 0.0;   // estimated bias radius before the slope factor
  double bbar_hat = 0.0;   // |beta_k| * rbar_hat (AME), plug-in for ATE
  Eigen::VectorXd psi;
  std::size_t n = 0;
  EffectKind kind = EffectKind::AME;
  int k = 0;  // effect covariate index
};

// Per-observation term p(x, s, beta): the AME value satisfies
// delta_hat = beta_k * mean(p); the ATE variant absorbs the slope and the
// identified outcome term, so delta_hat = mean(p).
double p_term(const Eigen::MatrixXd& x_unit, int s, int y_ref,
              const Eigen::VectorXd& beta, const ChebyshevApprox& cheb,
              const EffectTarget& target, int ref_period);

// Same value plus its analytic beta-gradient (the piece the influence
// function consumes).
double p_term_with_gradient(const Eigen::MatrixXd& x_unit, int s, int y_ref,
                            const Eigen::VectorXd& beta,
                            const ChebyshevApprox& cheb,
                            const EffectTarget& target, int ref_period,
                            Eigen::VectorXd& gradient);

SimpleEstimate estimate_simple(const PanelDataset& data, const CmleFit& fit,
                               const EffectTarget& target);

// 1-alpha quantile of |N(b,1)|, by bisection; symmetric and increasing
// in |b|.
double folded_normal_quantile(double b, double alpha);

ConfidenceInterval ci2(const SimpleEstimate& est, double alpha);

// Widened interval that also charges the slope estimate's sampling error
// to the bias radius; gamma + delta must equal the target level's alpha.
ConfidenceInterval ci3(const SimpleEstimate& est, const CmleFit& fit,
                       double gamma, double delta);

}  // namespace felogit

#endif  // FELOGIT_SIMPLE_HPP
