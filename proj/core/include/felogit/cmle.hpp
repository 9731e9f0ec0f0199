#ifndef FELOGIT_CMLE_HPP
#define FELOGIT_CMLE_HPP

#include <Eigen/Dense>
#include <vector>

#include "felogit/panel.hpp"

namespace felogit {

// Sums over all size-k subsets of periods of exp(sum of chosen x_t'beta),
// k = 0..T. C[0] = 1. Computed through the elementary-symmetric-function
// recursion on exp(x_t'beta - max_t x_t'beta), so intermediate terms never
// overflow.
std::vector<double> symmetric_sums(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& beta);

// Work object shared by the likelihood, the weight formulas and their
// derivatives: exp(s * a'beta) / C_s ratios and derivatives of log C_s,
// all evaluated with a common rescaling.
class SymmetricSumWork {
public:
  SymmetricSumWork(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta,
                   bool with_derivatives);

  int periods() const { return T_; }
  // C_k(x, beta) itself (may overflow to inf for extreme inputs).
  double c(int k) const;
  // log C_k(x, beta), always finite for finite inputs.
  double log_c(int k) const;
  // exp(z'beta * k) / C_k computed without overflow.
  double exp_ratio(int k, const Eigen::VectorXd& z_beta_linear) const;
  double exp_ratio_from_dot(int k, double dot) const;
  // Gradient and Hessian of log C_k with respect to beta.
  Eigen::VectorXd dlog_c(int k) const;
  Eigen::MatrixXd d2log_c(int k) const;

private:
  int T_;
  double shift_;                     // max_t x_t'beta
  std::vector<double> e_;            // scaled elementary symmetric sums
  std::vector<Eigen::VectorXd> de_;  // their beta-gradients
  std::vector<Eigen::MatrixXd> d2e_;
  bool with_derivs_;
  Eigen::VectorXd beta_;
};

struct CmleOptions {
  double tol = 1e-8;
  int max_iter = 100;
  double divergence_norm = 1e3;
};

// Conditional-likelihood fit: slope estimate, information matrix, and
// per-unit influence vectors.
struct CmleFit {
  Eigen::VectorXd beta_hat;
  Eigen::MatrixXd info;      // -(1/n) sum_i Hessian_i at beta_hat
  Eigen::MatrixXd info_inv;
  Eigen::MatrixXd phi;       // n x p influence vectors
  Eigen::VectorXd tau;       // sqrt(diag(info_inv))
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  double loglik = 0.0;
};

// Conditional log-likelihood of one unit. Zero (and flat) when s is 0 or
// T_i.
double cond_loglik(const PanelUnit& unit, const Eigen::VectorXd& beta);

struct LoglikDerivatives {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

LoglikDerivatives cond_loglik_derivs(const PanelUnit& unit,
                                     const Eigen::VectorXd& beta);

// Newton maximisation with step halving from beta = 0. Throws
// IdentificationError if the within-variation matrix is singular,
// NonConvergenceError when flat or out of iterations, and reports
// divergence when the iterate norm explodes.
CmleFit fit_cmle(const PanelDataset& data, const CmleOptions& opts = {});

}  // namespace felogit

#endif  // FELOGIT_CMLE_HPP
