#include "felogit/cmle.hpp"

#include <cmath>

#include "felogit/errors.hpp"
#include "felogit/parallel.hpp"

namespace felogit {

std::vector<double> symmetric_sums(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& beta) {
  SymmetricSumWork work(x, beta, false);
  const int T = work.periods();
  std::vector<double> c(static_cast<std::size_t>(T) + 1);
  for (int k = 0; k <= T; ++k) c[static_cast<std::size_t>(k)] = work.c(k);
  for (double v : c) {
    if (std::isnan(v)) throw NumericError("symmetric_sums: NaN encountered");
  }
  return c;
}

SymmetricSumWork::SymmetricSumWork(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& beta,
                                   bool with_derivatives)
    : T_(static_cast<int>(x.rows())), with_derivs_(with_derivatives),
      beta_(beta) {
  const int p = static_cast<int>(beta.size());
  Eigen::VectorXd lin = x * beta;
  shift_ = lin.size() > 0 ? lin.maxCoeff() : 0.0;
  if (!std::isfinite(shift_)) {
    throw NumericError("symmetric sums: non-finite linear index");
  }

  e_.assign(static_cast<std::size_t>(T_) + 1, 0.0);
  e_[0] = 1.0;
  if (with_derivs_) {
    de_.assign(static_cast<std::size_t>(T_) + 1, Eigen::VectorXd::Zero(p));
    d2e_.assign(static_cast<std::size_t>(T_) + 1, Eigen::MatrixXd::Zero(p, p));
  }
  for (int t = 0; t < T_; ++t) {
    const double w = std::exp(lin(t) - shift_);
    const Eigen::VectorXd xt = x.row(t).transpose();
    for (int k = std::min(t + 1, T_); k >= 1; --k) {
      if (with_derivs_) {
        d2e_[static_cast<std::size_t>(k)] +=
            w * (xt * xt.transpose() * e_[static_cast<std::size_t>(k - 1)] +
                 xt * de_[static_cast<std::size_t>(k - 1)].transpose() +
                 de_[static_cast<std::size_t>(k - 1)] * xt.transpose() +
                 d2e_[static_cast<std::size_t>(k - 1)]);
        de_[static_cast<std::size_t>(k)] +=
            w * (xt * e_[static_cast<std::size_t>(k - 1)] +
                 de_[static_cast<std::size_t>(k - 1)]);
      }
      e_[static_cast<std::size_t>(k)] +=
          w * e_[static_cast<std::size_t>(k - 1)];
    }
  }
}

double SymmetricSumWork::c(int k) const {
  return e_[static_cast<std::size_t>(k)] * std::exp(k * shift_);
}

double SymmetricSumWork::log_c(int k) const {
  return std::log(e_[static_cast<std::size_t>(k)]) + k * shift_;
}

double SymmetricSumWork::exp_ratio_from_dot(int k, double dot) const {
  return std::exp(k * (dot - shift_)) / e_[static_cast<std::size_t>(k)];
}

double SymmetricSumWork::exp_ratio(int k,
                                   const Eigen::VectorXd& z) const {
  return exp_ratio_from_dot(k, z.dot(beta_));
}

Eigen::VectorXd SymmetricSumWork::dlog_c(int k) const {
  return de_[static_cast<std::size_t>(k)] / e_[static_cast<std::size_t>(k)];
}

Eigen::MatrixXd SymmetricSumWork::d2log_c(int k) const {
  const Eigen::VectorXd g = dlog_c(k);
  return d2e_[static_cast<std::size_t>(k)] / e_[static_cast<std::size_t>(k)] -
         g * g.transpose();
}

double cond_loglik(const PanelUnit& unit, const Eigen::VectorXd& beta) {
  if (unit.s == 0 || unit.s == unit.periods()) return 0.0;
  SymmetricSumWork work(unit.x, beta, false);
  double lin = 0.0;
  for (int t = 0; t < unit.periods(); ++t) {
    if (unit.y[static_cast<std::size_t>(t)] == 1) {
      lin += unit.x.row(t).dot(beta);
    }
  }
  const double value = lin - work.log_c(unit.s);
  if (std::isnan(value)) throw NumericError("cond_loglik: NaN encountered");
  return value;
}

LoglikDerivatives cond_loglik_derivs(const PanelUnit& unit,
                                     const Eigen::VectorXd& beta) {
  const int p = static_cast<int>(beta.size());
  LoglikDerivatives out;
  out.gradient = Eigen::VectorXd::Zero(p);
  out.hessian = Eigen::MatrixXd::Zero(p, p);
  if (unit.s == 0 || unit.s == unit.periods()) return out;
  SymmetricSumWork work(unit.x, beta, true);
  double lin = 0.0;
  Eigen::VectorXd xsum = Eigen::VectorXd::Zero(p);
  for (int t = 0; t < unit.periods(); ++t) {
    if (unit.y[static_cast<std::size_t>(t)] == 1) {
      lin += unit.x.row(t).dot(beta);
      xsum += unit.x.row(t).transpose();
    }
  }
  out.value = lin - work.log_c(unit.s);
  out.gradient = xsum - work.dlog_c(unit.s);
  out.hessian = -work.d2log_c(unit.s);
  if (std::isnan(out.value) || out.gradient.hasNaN() || out.hessian.hasNaN()) {
    throw NumericError("cond_loglik_derivs: NaN encountered");
  }
  return out;
}

namespace {

struct TotalDerivs {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

// Chunked evaluation: bodies run concurrently, partial sums are combined
// in index order so results do not depend on the schedule.
TotalDerivs total_loglik_derivs(const PanelDataset& data,
                                const Eigen::VectorXd& beta) {
  const int p = static_cast<int>(beta.size());
  const std::size_t n = data.individuals.size();
  const std::size_t chunk = 256;
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  std::vector<TotalDerivs> partial(n_chunks);
  parallel_for(n_chunks, [&](std::size_t c) {
    TotalDerivs acc;
    acc.gradient = Eigen::VectorXd::Zero(p);
    acc.hessian = Eigen::MatrixXd::Zero(p, p);
    const std::size_t hi = std::min(n, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < hi; ++i) {
      const LoglikDerivatives d =
          cond_loglik_derivs(data.individuals[i], beta);
      acc.value += d.value;
      acc.gradient += d.gradient;
      acc.hessian += d.hessian;
    }
    partial[c] = std::move(acc);
  });
  TotalDerivs total;
  total.gradient = Eigen::VectorXd::Zero(p);
  total.hessian = Eigen::MatrixXd::Zero(p, p);
  for (const auto& part : partial) {
    total.value += part.value;
    total.gradient += part.gradient;
    total.hessian += part.hessian;
  }
  return total;
}

double total_loglik(const PanelDataset& data, const Eigen::VectorXd& beta) {
  const std::size_t n = data.individuals.size();
  const std::size_t chunk = 256;
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  std::vector<double> partial(n_chunks, 0.0);
  parallel_for(n_chunks, [&](std::size_t c) {
    double acc = 0.0;
    const std::size_t hi = std::min(n, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < hi; ++i) {
      acc += cond_loglik(data.individuals[i], beta);
    }
    partial[c] = acc;
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

}  // namespace

CmleFit fit_cmle(const PanelDataset& data, const CmleOptions& opts) {
  const RankCondition rank = check_rank_condition(data);
  if (!rank.nonsingular) {
    throw IdentificationError(
        "fit_cmle: within-variation matrix is singular; the slope is not "
        "identified");
  }
  std::size_t informative = 0;
  for (const auto& u : data.individuals) {
    if (u.s > 0 && u.s < u.periods()) ++informative;
  }
  if (informative == 0) {
    throw NonConvergenceError(
        "fit_cmle: every unit has an all-0 or all-1 outcome path; the "
        "conditional likelihood is flat");
  }

  const int p = data.p;
  const std::size_t n = data.individuals.size();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double loglik = total_loglik(data, beta);

  CmleFit fit;
  fit.converged = false;
  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    const TotalDerivs d = total_loglik_derivs(data, beta);
    fit.gradient_norm = d.gradient.lpNorm<Eigen::Infinity>();
    if (fit.gradient_norm < opts.tol) {
      fit.converged = true;
      loglik = d.value;
      break;
    }
    Eigen::MatrixXd neg_hess = -d.hessian;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_hess);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      step = ldlt.solve(d.gradient);
    } else {
      // Concavity can degrade numerically near flat regions; regularise.
      neg_hess.diagonal().array() += 1e-8 * (1.0 + neg_hess.diagonal().maxCoeff());
      step = neg_hess.ldlt().solve(d.gradient);
    }

    double scale = 1.0;
    double new_loglik = 0.0;
    bool improved = false;
    for (int half = 0; half < 40; ++half) {
      const Eigen::VectorXd candidate = beta + scale * step;
      new_loglik = total_loglik(data, candidate);
      if (new_loglik >= d.value - 1e-12 * (1.0 + std::abs(d.value))) {
        beta = candidate;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) {
      throw NonConvergenceError(
          "fit_cmle: line search failed to improve the likelihood",
          std::vector<double>(beta.data(), beta.data() + beta.size()));
    }
    loglik = new_loglik;
    if (beta.norm() > opts.divergence_norm) {
      throw NonConvergenceError(
          "fit_cmle: iterates diverged (possible perfect separation)",
          std::vector<double>(beta.data(), beta.data() + beta.size()));
    }
  }
  if (!fit.converged) {
    throw NonConvergenceError(
        "fit_cmle: maximum number of iterations reached",
        std::vector<double>(beta.data(), beta.data() + beta.size()));
  }

  fit.beta_hat = beta;
  fit.iterations = iter;
  fit.loglik = loglik;

  fit.info = Eigen::MatrixXd::Zero(p, p);
  fit.phi.resize(static_cast<Eigen::Index>(n), p);
  std::vector<Eigen::VectorXd> grads(n);
  {
    std::vector<Eigen::MatrixXd> hess(n);
    parallel_for(n, [&](std::size_t i) {
      const LoglikDerivatives d = cond_loglik_derivs(data.individuals[i], beta);
      grads[i] = d.gradient;
      hess[i] = d.hessian;
    });
    for (std::size_t i = 0; i < n; ++i) fit.info -= hess[i];
    fit.info /= static_cast<double>(n);
  }
  Eigen::LDLT<Eigen::MatrixXd> info_ldlt(fit.info);
  if (info_ldlt.info() != Eigen::Success) {
    throw NumericError("fit_cmle: information matrix is not factorisable");
  }
  fit.info_inv = info_ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  for (std::size_t i = 0; i < n; ++i) {
    fit.phi.row(static_cast<Eigen::Index>(i)) =
        (fit.info_inv * grads[i]).transpose();
  }
  fit.tau = fit.info_inv.diagonal().cwiseMax(0.0).cwiseSqrt();
  return fit;
}

}  // namespace felogit
