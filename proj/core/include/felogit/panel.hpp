#ifndef FELOGIT_PANEL_HPP
#define FELOGIT_PANEL_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace felogit {

// One individual: outcomes y_t in {0,1} and covariate rows x_t over T_i
// periods, plus the within-unit outcome sum s used for conditioning.
struct PanelUnit {
  std::string id;
  std::vector<int> y;
  Eigen::MatrixXd x;  // T_i x p
  std::vector<long long> period_labels;
  int s = 0;

  int periods() const { return static_cast<int>(y.size()); }
  bool covariates_constant() const;
};

// Validated panel: units with T_i >= 2, unique ids, common covariate
// dimension. Immutable after construction.
struct PanelDataset {
  std::vector<PanelUnit> individuals;
  int p = 0;
  int effect_index = 0;  // 0-based index of the covariate of interest
  std::vector<std::string> covariate_names;
  std::size_t stayer_count = 0;  // units with time-constant covariates

  std::size_t size() const { return individuals.size(); }
  bool balanced() const;
  int max_periods() const;
  void validate() const;  // throws ValidationError on broken invariants
};

// Column naming for the long-format CSV.
struct PanelSchema {
  std::string id_column = "id";
  std::string period_column = "t";
  std::string outcome_column = "y";
  // Empty means: every remaining column is a covariate, in file order.
  std::vector<std::string> covariate_columns;
};

// Reads a long-format CSV (one row per id/period, header required) into a
// validated dataset. Periods are sorted and re-indexed per unit; original
// labels are kept for reporting only.
PanelDataset load_panel(const std::string& path,
                        const PanelSchema& schema = PanelSchema{});

// Writes the dataset back in the same format with full double precision,
// so that load_panel(write_panel(d)) reproduces d bit-exactly.
void write_panel(const PanelDataset& data, const std::string& path);

// Sample analog of the within-variation matrix
//   (1/n) sum_i sum_{t,t'} (x_it - x_it')(x_it - x_it')'
// together with its smallest eigenvalue and a nonsingularity flag.
struct RankCondition {
  Eigen::MatrixXd matrix;
  bool nonsingular = false;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
};

RankCondition check_rank_condition(const PanelDataset& data,
                                   double relative_tol = 1e-10);

}  // namespace felogit

#endif  // FELOGIT_PANEL_HPP
