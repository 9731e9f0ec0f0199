#ifndef FELOGIT_CHEBYSHEV_HPP
#define FELOGIT_CHEBYSHEV_HPP

#include <vector>

namespace felogit {

// Best uniform approximation of u -> u^(T+1) on [0,1] by a polynomial of
// degree T. The residual is the monic Chebyshev polynomial rescaled to
// [0,1], so the sup error is exactly 1/(2*4^T).
struct ChebyshevApprox {
  int order = 0;               // T
  std::vector<double> b;       // coefficients b[0..T] of the approximant
  double sup_err = 0.0;        // 1/(2*4^T)
  std::vector<double> argmax;  // u in [0,1] where residual attains +sup_err
  std::vector<double> argmin;  // u in [0,1] where residual attains -sup_err

  // Approximant value sum_t b[t] u^t.
  double eval(double u) const;
  // Residual u^(T+1) - eval(u).
  double residual(double u) const;
};

// Builds the approximation for a given T >= 1.
ChebyshevApprox chebyshev_pstar(int T);

}  // namespace felogit

#endif  // FELOGIT_CHEBYSHEV_HPP
