#ifndef FELOGIT_LOCALPOLY_HPP
#define FELOGIT_LOCALPOLY_HPP

#include <Eigen/Dense>
#include <vector>

#include "felogit/cmle.hpp"
#include "felogit/panel.hpp"

namespace felogit {

// Local polynomial regression of the outcome-count indicators 1{S_i = j}
// on the flattened covariate path, fitted on demand at query points.
// Kernel weights use one bandwidth common to all covariate columns after
// standardising each column, with a separate bandwidth per target j.
class GammaEstimate {
public:
  GammaEstimate(Eigen::MatrixXd x_flat, std::vector<int> s_values, int T,
                int ell, std::vector<double> bandwidths);

  int targets() const { return T_ + 1; }
  int dimension() const { return static_cast<int>(x_.cols()); }
  int order() const { return ell_; }
  const std::vector<double>& bandwidths() const { return h_; }
  const Eigen::VectorXd& column_scales() const { return scale_; }

  // Clamped-and-renormalised probabilities (gamma_0(x0),...,gamma_T(x0)).
  std::vector<double> gamma(const Eigen::VectorXd& x0) const;

  // Raw local polynomial intercepts before clamping.
  std::vector<double> raw(const Eigen::VectorXd& x0) const;

  // Kernel density of the standardised covariates at x0 (rule-of-thumb
  // bandwidth) and the per-target variance scale
  //   kappa_j(x0) = roughness^d / (n h_j^d fhat(x0)),
  // used for the data-driven determinant thresholds.
  double density(const Eigen::VectorXd& x0) const;
  std::vector<double> kappa(const Eigen::VectorXd& x0) const;

private:
  Eigen::MatrixXd x_;      // n x d flattened covariates
  std::vector<int> s_;
  int T_;
  int ell_;
  std::vector<double> h_;  // per target, standardised units
  Eigen::VectorXd scale_;
  Eigen::MatrixXd z_;      // standardised covariates
  double density_h_;
  std::vector<std::vector<int>> monomials_;  // exponent multi-indices
};

// Weighted polynomial fit of an arbitrary response at one point; exposed
// for the polynomial-reproduction property and reused internally.
// Returns the fitted value at x0. scales gives per-column standardisation.
double local_poly_smooth(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& x0, int ell, double h,
                         const Eigen::VectorXd& scales);

// Probabilities (gamma_0(x0),...,gamma_T(x0)) for a balanced dataset with
// one common bandwidth; thin wrapper over GammaEstimate.
std::vector<double> local_poly_fit(const PanelDataset& data,
                                   const Eigen::VectorXd& x0, int ell,
                                   double h);

struct BandwidthResult {
  std::vector<double> h;   // per target, standardised units
  bool pilot_ok = false;   // false when the rule-of-thumb fallback was used
  double alpha_pilot = 0.0;
};

// Undersmoothing factor R_n = 5 (n/500)^2 used by the bandwidth rule.
inline double default_undersmoothing(std::size_t n) {
  const double r = static_cast<double>(n) / 500.0;
  return 5.0 * r * r;
}

// Plug-in bandwidths balancing integrated variance against R_n times the
// integrated squared bias, both evaluated under a constant-effect pilot
// fitted by full-likelihood MLE at beta_hat.
BandwidthResult bandwidth_rule(const PanelDataset& data, const CmleFit& fit,
                               double R_n, int ell = 1);

// Convenience: flattened covariate matrix and outcome counts of a
// balanced dataset (throws if panel lengths differ).
Eigen::MatrixXd flatten_covariates(const PanelDataset& data);
std::vector<int> outcome_counts(const PanelDataset& data);

// Builds the estimator for a balanced dataset: rule bandwidths unless an
// override is given.
GammaEstimate make_gamma_estimate(const PanelDataset& data,
                                  const CmleFit& fit, double R_n,
                                  int ell = 1, double bandwidth_override = 0.0);

}  // namespace felogit

#endif  // FELOGIT_LOCALPOLY_HPP
