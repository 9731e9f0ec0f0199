#ifndef FELOGIT_MOMENTS_HPP
#define FELOGIT_MOMENTS_HPP

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

namespace felogit {

// Vector (m_0,...,m_T) of raw moments of a candidate measure on [0,1].
// m_0 must be 1; membership in the moment space is decided by
// hankel_determinants below.
struct MomentVector {
  std::vector<double> m;

  MomentVector() = default;
  explicit MomentVector(std::vector<double> values) : m(std::move(values)) {}

  int order() const { return static_cast<int>(m.size()) - 1; }
  double operator[](int t) const { return m[static_cast<std::size_t>(t)]; }
};

// Hankel determinants of both families for t = 1..T, the membership flag
// and the first index at which the vector touches the boundary of the
// moment space (if any).
struct HankelDiagnostics {
  std::vector<double> lower_dets;  // lower_dets[t-1] for t = 1..T
  std::vector<double> upper_dets;
  bool member = false;
  std::optional<int> first_boundary_index;
};

// Range of the next raw moment m_{T+1} over all measures matching m.
struct ExtremalMoments {
  double q_lower = 0.0;
  double q_upper = 0.0;
  bool boundary = false;  // true when the extension is unique
};

enum class BoundarySide { None, Lower, Upper };

// Thresholds for the data-driven order selection used when projecting a
// noisy moment vector into the moment space. Entries are indexed by the
// determinant level t = 1..T (position t-1).
struct ProjectionThresholds {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> sign_cutoff;

  // Constant-scale fallback c_n = n^(-1/3), sign cutoff c_n^(1/2).
  static ProjectionThresholds constant_rule(int T, std::size_t n);
};

// Result of the projection. The Jacobian has one row per output moment
// and one column per input moment; rows 0..I_hat form an identity block.
struct ProjectionResult {
  MomentVector m_hat;
  int I_hat = 0;
  BoundarySide side = BoundarySide::None;
  Eigen::MatrixXd jacobian;  // empty unless requested
};

// --- Hankel machinery ------------------------------------------------

// Builds the lower/upper Hankel matrix of level t from values
// (v_0,...,v_s), s >= t. Level t uses v_0..v_t only.
Eigen::MatrixXd hankel_matrix(std::span<const double> v, int t,
                              BoundarySide side);

// Determinant of the level-t Hankel matrix.
double hankel_det(std::span<const double> v, int t, BoundarySide side);

// Gradient of the level-t Hankel determinant with respect to v_0..v_t.
Eigen::VectorXd hankel_det_gradient(std::span<const double> v, int t,
                                    BoundarySide side);

// Scale used for the relative determinant tolerance at level t.
double hankel_scale(std::span<const double> v, int t, BoundarySide side);

// Membership diagnostics for the moment space of order T = m.order().
HankelDiagnostics hankel_determinants(const MomentVector& m);

// --- Extremal moments -------------------------------------------------

// Sharp bounds on the next moment m_{T+1}. Requires membership; throws
// DomainError otherwise. In the interior case both bounds solve a linear
// equation in the corner entry of a level-(T+1) Hankel matrix; on the
// boundary the extension is unique and both bounds coincide.
ExtremalMoments extremal_moments(const MomentVector& m);

// Same, and also returns d q_lower / d m and d q_upper / d m (length
// T+1; the m_0 component is included for completeness).
ExtremalMoments extremal_moments_with_jacobian(const MomentVector& m,
                                               Eigen::VectorXd* dq_lower,
                                               Eigen::VectorXd* dq_upper);

// One-step unique boundary extension: given a prefix lying on the
// boundary whose first boundary level is t_prime on the given side,
// returns the only admissible next moment. If grad is non-null it
// receives the derivative with respect to the prefix entries.
double boundary_extend(std::span<const double> prefix, int t_prime,
                       BoundarySide side, Eigen::VectorXd* grad = nullptr);

// --- Projection onto the moment space ---------------------------------

// Projects a noisy ratio vector (1, m_1, ..., m_T) into the moment
// space: keeps the leading block that clears the thresholds, snaps the
// next entry to an extremal moment, and completes the tail by the unique
// boundary extension. Total on inputs with m_0 = 1.
ProjectionResult project_moments(const MomentVector& m_tilde,
                                 const ProjectionThresholds& thresholds,
                                 bool want_jacobian = false);

// --- Independent linear-programming oracle ----------------------------

// Extremal next moment computed by discretising the measure on a uniform
// grid over [0,1] and solving the resulting linear programs with a
// self-contained simplex. Used to cross-check extremal_moments; accuracy
// is limited by the grid. Throws DomainError when infeasible.
ExtremalMoments lp_oracle_extremal(const MomentVector& m, int grid_size);

}  // namespace felogit

#endif  // FELOGIT_MOMENTS_HPP
