#ifndef FELOGIT_STATS_HPP
#define FELOGIT_STATS_HPP

#include <cmath>
#include <functional>

namespace felogit {

// Logistic cdf, numerically stable on both tails.
inline double logistic_cdf(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Derivative of the logistic cdf.
inline double logistic_pdf(double x) {
  const double p = logistic_cdf(x);
  return p * (1.0 - p);
}

// Inverse logistic cdf.
inline double logistic_quantile(double p) {
  return std::log(p / (1.0 - p));
}

// Standard normal cdf.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / 1.4142135623730951);
}

inline double normal_pdf(double x) {
  return 0.3989422804014327 * std::exp(-0.5 * x * x);
}

// Standard normal quantile. Acklam's rational approximation polished with
// two Newton steps; accurate to ~1e-14 over (0,1).
double normal_quantile(double p);

// Finds the root of a strictly increasing continuous function on [lo, hi]
// by bisection. The bracket is expanded geometrically if f(lo) and f(hi)
// have the same sign.
double bisect_increasing(const std::function<double(double)>& f, double lo,
                         double hi, double tol = 1e-12, int max_iter = 200);

}  // namespace felogit

#endif  // FELOGIT_STATS_HPP
