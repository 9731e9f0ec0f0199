#ifndef FELOGIT_MONTECARLO_HPP
#define FELOGIT_MONTECARLO_HPP

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "felogit/panel.hpp"
#include "felogit/targets.hpp"

namespace felogit {

// Simulation designs. Covariates are i.i.d. Uniform(-1/2, 1/2); the
// individual effect is alpha = -X_T beta0 + eta with
//   1: eta = 0
//   2: eta ~ N(0,1)
//   3: eta uniform over the finite preimages of the residual-extremum
//      sets, picked by the sign of lambda_{T+1}(X, beta0)
//   4: logistic errors with a Gaussian copula, corr 1/2^|s-t|
//   5: N(0, 8/pi) errors (misspecified, same target value as design 1)
struct DgpConfig {
  int dgp = 1;
  int T = 2;
  std::size_t n = 500;
  double beta0 = 1.0;
  std::uint64_t seed = 0;
  std::size_t reps = 1;
};

struct TruthRecord {
  double delta = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::string method;  // "closed-form" or "quadrature"
};

// Draws one panel; deterministic given (config, rep) through a
// counter-derived substream.
PanelDataset generate(const DgpConfig& config, std::uint64_t rep = 0);

// Population value and sharp bounds of the average marginal effect under
// the design, by closed form where available and tensor quadrature
// otherwise. Designs 4 and 5 share design 1's target value.
TruthRecord truth_oracle(const DgpConfig& config);

// Within-group least squares slope with unit-level cluster-robust
// standard error and the usual Wald interval.
struct LpmEstimate {
  double slope = 0.0;
  double clustered_se = 0.0;
  ConfidenceInterval ci;
};

LpmEstimate lpm_estimate(const PanelDataset& data, int k, double level = 0.95);

// One simulation study: runs the selected estimators over config.reps
// replications and aggregates bias, standard deviation, coverage and
// interval length into long-format CSV rows (dgp,T,n,method,stat,value).
struct StudyRow {
  std::string method;
  std::string stat;
  double value = 0.0;
};

struct StudyResult {
  DgpConfig config;
  std::vector<StudyRow> rows;
  std::size_t failures = 0;
};

StudyResult run_study(const DgpConfig& config,
                      const std::set<std::string>& methods, double level = 0.95,
                      double ci3_gamma = 0.01, double ci3_delta = 0.04);

// Writes rows as CSV (atomically: temp file then rename).
void write_study_csv(const StudyResult& result, const std::string& path);

}  // namespace felogit

#endif  // FELOGIT_MONTECARLO_HPP
