#include "felogit/chebyshev.hpp"

#include <cmath>

#include "felogit/errors.hpp"

namespace felogit {

double ChebyshevApprox::eval(double u) const {
  double acc = 0.0;
  for (std::size_t t = b.size(); t-- > 0;) acc = acc * u + b[t];
  return acc;
}

double ChebyshevApprox::residual(double u) const {
  return std::pow(u, order + 1) - eval(u);
}

ChebyshevApprox chebyshev_pstar(int T) {
  if (T < 1) throw DomainError("chebyshev_pstar: order must be >= 1");
  const int n = T + 1;

  // Coefficients of the degree-n Chebyshev polynomial of the first kind
  // via the three-term recurrence, then divided by the leading 2^(n-1)
  // to make it monic.
  std::vector<double> prev{1.0};        // degree 0
  std::vector<double> cur{0.0, 1.0};    // degree 1
  for (int k = 2; k <= n; ++k) {
    std::vector<double> next(static_cast<std::size_t>(k) + 1, 0.0);
    for (std::size_t j = 0; j < cur.size(); ++j) next[j + 1] += 2.0 * cur[j];
    for (std::size_t j = 0; j < prev.size(); ++j) next[j] -= prev[j];
    prev = std::move(cur);
    cur = std::move(next);
  }
  const double monic_scale = std::ldexp(1.0, -(n - 1));
  for (auto& c : cur) c *= monic_scale;

  // Map x = 2u - 1 and rescale by 2^-(n): the residual polynomial on
  // [0,1]. Expand (2u-1)^j with binomial coefficients.
  std::vector<double> resid(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> pow_shift{1.0};  // coefficients of (2u-1)^j
  for (int j = 0; j <= n; ++j) {
    for (std::size_t i = 0; i < pow_shift.size(); ++i) {
      resid[i] += cur[static_cast<std::size_t>(j)] * pow_shift[i];
    }
    // multiply by (2u - 1)
    std::vector<double> nxt(pow_shift.size() + 1, 0.0);
    for (std::size_t i = 0; i < pow_shift.size(); ++i) {
      nxt[i + 1] += 2.0 * pow_shift[i];
      nxt[i] -= pow_shift[i];
    }
    pow_shift = std::move(nxt);
  }
  const double range_scale = std::ldexp(1.0, -n);
  for (auto& c : resid) c *= range_scale;

  ChebyshevApprox out;
  out.order = T;
  out.sup_err = std::ldexp(1.0, -(2 * T + 1));  // 1/(2*4^T)
  out.b.assign(resid.begin(), resid.end() - 1);
  for (auto& c : out.b) c = -c;
  // residual = u^(n) - approximant; the u^n coefficient of resid is 1 by
  // construction, so b holds the lower-order part with flipped sign.

  // Equioscillation points u_k = (1 + cos(k*pi/n))/2, k = 0..n, where the
  // residual alternates between +sup_err (k even) and -sup_err (k odd).
  for (int k = 0; k <= n; ++k) {
    const double u = 0.5 * (1.0 + std::cos(k * M_PI / n));
    if (k % 2 == 0) {
      out.argmax.push_back(u);
    } else {
      out.argmin.push_back(u);
    }
  }
  return out;
}

}  // namespace felogit
