#ifndef FELOGIT_TARGETS_HPP
#define FELOGIT_TARGETS_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "felogit/panel.hpp"

namespace felogit {

enum class EffectKind { AME, ATT, ATU, ATE, ASF };

// What is being estimated: the average marginal effect of covariate k at
// the reference period, a treatment effect of a binary covariate k, or
// the average structural function at a fixed point x0.
struct EffectTarget {
  EffectKind kind = EffectKind::AME;
  int k = 0;  // 0-based covariate index (ignored for ASF)
  Eigen::VectorXd x0;

  static EffectTarget ame(int k) { return {EffectKind::AME, k, {}}; }
  static EffectTarget att(int k) { return {EffectKind::ATT, k, {}}; }
  static EffectTarget atu(int k) { return {EffectKind::ATU, k, {}}; }
  static EffectTarget ate(int k) { return {EffectKind::ATE, k, {}}; }
  static EffectTarget asf(Eigen::VectorXd point) {
    return {EffectKind::ASF, 0, std::move(point)};
  }
};

std::string to_string(EffectKind kind);

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
  std::string method;  // "CI1", "CI2", "CI3", "LPM"
};

// Reference period for the effect: the smallest panel length present,
// as a 0-based position into each unit's periods.
int reference_period(const PanelDataset& data);

// Checks that covariate k is binary at the reference period; throws
// ValidationError otherwise.
void validate_binary_treatment(const PanelDataset& data, int k);

struct TStratum {
  int T = 0;
  std::vector<std::size_t> unit_indices;  // positions in data.individuals
  double weight = 0.0;                    // empirical share
};

// Partition of the units by panel length, with empirical weights.
// Strata smaller than min_units raise an EstimationError.
std::vector<TStratum> stratify_by_T(const PanelDataset& data,
                                    std::size_t min_units = 1);

// View of a stratum as a standalone dataset (units are copied).
PanelDataset subset(const PanelDataset& data,
                    const std::vector<std::size_t>& unit_indices);

}  // namespace felogit

#endif  // FELOGIT_TARGETS_HPP
