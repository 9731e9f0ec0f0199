#include "felogit/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "felogit/errors.hpp"

namespace felogit {

namespace {

// Relative tolerance for classifying a Hankel determinant as zero.
constexpr double kDetTolRel = 1e-12;

int hankel_size(int t, BoundarySide side) {
  if (side == BoundarySide::Lower) {
    return (t % 2 == 0) ? t / 2 + 1 : (t + 1) / 2;
  }
  return (t % 2 == 0) ? t / 2 : (t + 1) / 2;
}

// Index pairs (value index, sign) contributing to cell (i,j), 0-based.
// Lower matrices hold single moments, upper ones hold differences.
void hankel_cell(int t, BoundarySide side, int i, int j, int& idx_pos,
                 int& idx_neg) {
  if (side == BoundarySide::Lower) {
    idx_pos = (t % 2 == 0) ? i + j : i + j + 1;
    idx_neg = -1;
  } else {
    if (t % 2 == 0) {
      idx_pos = i + j + 1;
      idx_neg = i + j + 2;
    } else {
      idx_pos = i + j;
      idx_neg = i + j + 1;
    }
  }
}

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

}  // namespace

Eigen::MatrixXd hankel_matrix(std::span<const double> v, int t,
                              BoundarySide side) {
  if (t < 1 || static_cast<int>(v.size()) < t + 1) {
    throw DomainError("hankel_matrix: need values v_0..v_t with t >= 1");
  }
  const int s = hankel_size(t, side);
  Eigen::MatrixXd M(s, s);
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      int ip, in;
      hankel_cell(t, side, i, j, ip, in);
      double val = v[static_cast<std::size_t>(ip)];
      if (in >= 0) val -= v[static_cast<std::size_t>(in)];
      M(i, j) = val;
    }
  }
  return M;
}

double hankel_det(std::span<const double> v, int t, BoundarySide side) {
  const Eigen::MatrixXd M = hankel_matrix(v, t, side);
  if (M.rows() == 1) return M(0, 0);
  return M.determinant();
}

namespace {

// Cofactor matrix (signed minors) of a small square matrix.
Eigen::MatrixXd cofactor_matrix(const Eigen::MatrixXd& M) {
  const int s = static_cast<int>(M.rows());
  Eigen::MatrixXd C(s, s);
  if (s == 1) {
    C(0, 0) = 1.0;
    return C;
  }
  Eigen::MatrixXd minor(s - 1, s - 1);
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      int mr = 0;
      for (int r = 0; r < s; ++r) {
        if (r == i) continue;
        int mc = 0;
        for (int c = 0; c < s; ++c) {
          if (c == j) continue;
          minor(mr, mc++) = M(r, c);
        }
        ++mr;
      }
      const double d = (s == 2) ? minor(0, 0) : minor.determinant();
      C(i, j) = (((i + j) % 2) == 0 ? 1.0 : -1.0) * d;
    }
  }
  return C;
}

}  // namespace

Eigen::VectorXd hankel_det_gradient(std::span<const double> v, int t,
                                    BoundarySide side) {
  const Eigen::MatrixXd M = hankel_matrix(v, t, side);
  const Eigen::MatrixXd C = cofactor_matrix(M);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(t + 1);
  const int s = static_cast<int>(M.rows());
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      int ip, in;
      hankel_cell(t, side, i, j, ip, in);
      grad(ip) += C(i, j);
      if (in >= 0) grad(in) -= C(i, j);
    }
  }
  return grad;
}

double hankel_scale(std::span<const double> v, int t, BoundarySide side) {
  const Eigen::MatrixXd M = hankel_matrix(v, t, side);
  double had = 1.0;
  for (int i = 0; i < M.rows(); ++i) had *= M.row(i).norm();
  return std::max(1.0, had);
}

HankelDiagnostics hankel_determinants(const MomentVector& m) {
  const int T = m.order();
  if (T < 0 || std::abs(m[0] - 1.0) > 1e-9) {
    throw DomainError("hankel_determinants: m_0 must equal 1");
  }
  HankelDiagnostics out;
  out.lower_dets.resize(static_cast<std::size_t>(std::max(T, 0)));
  out.upper_dets.resize(static_cast<std::size_t>(std::max(T, 0)));
  out.member = true;
  const std::span<const double> v(m.m);
  for (int t = 1; t <= T; ++t) {
    const double lo = hankel_det(v, t, BoundarySide::Lower);
    const double up = hankel_det(v, t, BoundarySide::Upper);
    out.lower_dets[static_cast<std::size_t>(t - 1)] = lo;
    out.upper_dets[static_cast<std::size_t>(t - 1)] = up;
    const double tol_lo = kDetTolRel * hankel_scale(v, t, BoundarySide::Lower);
    const double tol_up = kDetTolRel * hankel_scale(v, t, BoundarySide::Upper);
    if (lo < -tol_lo || up < -tol_up) out.member = false;
    if (!out.first_boundary_index &&
        (lo <= tol_lo || up <= tol_up)) {
      out.first_boundary_index = t;
    }
  }
  return out;
}

double boundary_extend(std::span<const double> prefix, int t_prime,
                       BoundarySide side, Eigen::VectorXd* grad) {
  const int s = static_cast<int>(prefix.size()) - 1;  // highest index kept
  if (t_prime < 1 || s + 1 < t_prime) {
    throw DomainError("boundary_extend: prefix shorter than window");
  }
  // Window (v_{s-t'+1},...,v_s, q) treated as a moment vector of order t'.
  std::vector<double> window(static_cast<std::size_t>(t_prime) + 1);
  const int start = s - t_prime + 1;
  for (int w = 0; w < t_prime; ++w) {
    window[static_cast<std::size_t>(w)] =
        prefix[static_cast<std::size_t>(start + w)];
  }
  window[static_cast<std::size_t>(t_prime)] = 0.0;
  const double d0 = hankel_det(window, t_prime, side);
  window[static_cast<std::size_t>(t_prime)] = 1.0;
  const double d1 = hankel_det(window, t_prime, side);
  const double slope = d1 - d0;
  if (std::abs(slope) < 1e-300) {
    throw NumericError("boundary_extend: degenerate extension equation");
  }
  const double q = -d0 / slope;
  if (grad) {
    window[static_cast<std::size_t>(t_prime)] = q;
    const Eigen::VectorXd g =
        hankel_det_gradient(window, t_prime, side);
    *grad = Eigen::VectorXd::Zero(s + 1);
    for (int w = 0; w < t_prime; ++w) {
      (*grad)(start + w) = -g(w) / g(t_prime);
    }
  }
  return clamp01(q);
}

namespace {

// Solves the linear corner equation det H(m, q) = 0 at level T+1.
double solve_corner(const std::vector<double>& m, BoundarySide side,
                    Eigen::VectorXd* dq) {
  const int T = static_cast<int>(m.size()) - 1;
  std::vector<double> vals(m.begin(), m.end());
  vals.push_back(0.0);
  const double d0 = hankel_det(vals, T + 1, side);
  vals.back() = 1.0;
  const double d1 = hankel_det(vals, T + 1, side);
  const double slope = d1 - d0;
  if (std::abs(slope) < 1e-300) {
    throw NumericError("extremal_moments: singular corner equation");
  }
  const double q = -d0 / slope;
  if (dq) {
    vals.back() = q;
    const Eigen::VectorXd g = hankel_det_gradient(vals, T + 1, side);
    *dq = Eigen::VectorXd::Zero(T + 1);
    for (int e = 0; e <= T; ++e) (*dq)(e) = -g(e) / g(T + 1);
  }
  return q;
}

ExtremalMoments extremal_impl(const MomentVector& m, Eigen::VectorXd* dq_lower,
                              Eigen::VectorXd* dq_upper) {
  const HankelDiagnostics diag = hankel_determinants(m);
  if (!diag.member) {
    throw DomainError("extremal_moments: input is not a valid moment vector");
  }
  ExtremalMoments out;
  if (diag.first_boundary_index) {
    const int tp = *diag.first_boundary_index;
    const double lo = diag.lower_dets[static_cast<std::size_t>(tp - 1)];
    const double up = diag.upper_dets[static_cast<std::size_t>(tp - 1)];
    const BoundarySide side =
        (lo <= up) ? BoundarySide::Lower : BoundarySide::Upper;
    Eigen::VectorXd g;
    const double q =
        boundary_extend(m.m, tp, side, (dq_lower || dq_upper) ? &g : nullptr);
    out.q_lower = out.q_upper = q;
    out.boundary = true;
    if (dq_lower) *dq_lower = g;
    if (dq_upper) *dq_upper = g;
    return out;
  }
  out.q_lower = solve_corner(m.m, BoundarySide::Lower, dq_lower);
  out.q_upper = solve_corner(m.m, BoundarySide::Upper, dq_upper);
  out.boundary = false;
  out.q_lower = clamp01(out.q_lower);
  out.q_upper = clamp01(out.q_upper);
  if (out.q_upper < out.q_lower) std::swap(out.q_lower, out.q_upper);
  return out;
}

}  // namespace

ExtremalMoments extremal_moments(const MomentVector& m) {
  return extremal_impl(m, nullptr, nullptr);
}

ExtremalMoments extremal_moments_with_jacobian(const MomentVector& m,
                                               Eigen::VectorXd* dq_lower,
                                               Eigen::VectorXd* dq_upper) {
  return extremal_impl(m, dq_lower, dq_upper);
}

ProjectionThresholds ProjectionThresholds::constant_rule(int T,
                                                         std::size_t n) {
  ProjectionThresholds th;
  const double cn = std::pow(static_cast<double>(std::max<std::size_t>(n, 2)),
                             -1.0 / 3.0);
  th.lower.assign(static_cast<std::size_t>(T), cn);
  th.upper.assign(static_cast<std::size_t>(T), cn);
  th.sign_cutoff.assign(static_cast<std::size_t>(T), std::sqrt(cn));
  return th;
}

ProjectionResult project_moments(const MomentVector& m_tilde,
                                 const ProjectionThresholds& thresholds,
                                 bool want_jacobian) {
  const int T = m_tilde.order();
  if (T < 1) throw DomainError("project_moments: need at least m_0, m_1");
  if (std::abs(m_tilde[0] - 1.0) > 1e-9) {
    throw DomainError("project_moments: m_0 must equal 1");
  }
  if (static_cast<int>(thresholds.lower.size()) < T ||
      static_cast<int>(thresholds.upper.size()) < T) {
    throw DomainError("project_moments: thresholds shorter than order");
  }

  ProjectionResult out;
  out.m_hat.m.assign(m_tilde.m.begin(), m_tilde.m.end());
  out.m_hat.m[0] = 1.0;

  // Largest level whose whole prefix clears the thresholds. Requiring
  // every lower level as well keeps the retained prefix strictly inside
  // the moment space, so the extremal step below is always well posed.
  int I_hat = 0;
  for (int t = 1; t <= T; ++t) {
    const std::span<const double> v(out.m_hat.m);
    const double lo = hankel_det(v, t, BoundarySide::Lower);
    const double up = hankel_det(v, t, BoundarySide::Upper);
    if (lo >= thresholds.lower[static_cast<std::size_t>(t - 1)] &&
        up >= thresholds.upper[static_cast<std::size_t>(t - 1)]) {
      I_hat = t;
    } else {
      break;
    }
  }
  out.I_hat = I_hat;

  if (want_jacobian) {
    out.jacobian = Eigen::MatrixXd::Zero(T + 1, T + 1);
    for (int t = 0; t <= std::min(I_hat, T); ++t) out.jacobian(t, t) = 1.0;
  }

  if (I_hat == T) {
    out.side = BoundarySide::None;
    return out;
  }

  if (I_hat == 0) {
    // No reliable moment beyond m_0: collapse to the point mass at the
    // clamped first entry.
    const double u = clamp01(m_tilde[1]);
    const bool clamped = (u != m_tilde[1]);
    double pw = 1.0;
    for (int t = 1; t <= T; ++t) {
      pw *= u;
      out.m_hat.m[static_cast<std::size_t>(t)] = pw;
    }
    out.side = BoundarySide::Lower;
    if (want_jacobian && !clamped) {
      double dpw = 1.0;  // d u^t / du = t u^(t-1)
      for (int t = 1; t <= T; ++t) {
        out.jacobian(t, 1) = t * dpw;
        dpw *= u;
      }
    }
    return out;
  }

  // Prefix retained as-is; decide which boundary the next entry snaps to.
  std::vector<double> prefix(out.m_hat.m.begin(),
                             out.m_hat.m.begin() + I_hat + 1);
  const MomentVector prefix_m{std::vector<double>(prefix)};

  const int level = I_hat + 1;
  const std::span<const double> v(out.m_hat.m);
  const double det_lo = hankel_det(v, level, BoundarySide::Lower);
  const double det_up = hankel_det(v, level, BoundarySide::Upper);
  const double tol_lo =
      kDetTolRel * hankel_scale(v, level, BoundarySide::Lower);
  const double tol_up =
      kDetTolRel * hankel_scale(v, level, BoundarySide::Upper);

  Eigen::VectorXd dql, dqu;
  const ExtremalMoments ext = extremal_moments_with_jacobian(
      prefix_m, want_jacobian ? &dql : nullptr,
      want_jacobian ? &dqu : nullptr);

  bool keep_input = false;
  if (std::abs(det_lo) <= tol_lo && det_up >= -tol_up) {
    out.side = BoundarySide::Lower;
    keep_input = true;
  } else if (std::abs(det_up) <= tol_up && det_lo >= -tol_lo) {
    out.side = BoundarySide::Upper;
    keep_input = true;
  } else {
    const double cutoff =
        thresholds.sign_cutoff.empty()
            ? 0.0
            : thresholds.sign_cutoff[static_cast<std::size_t>(level - 1)];
    out.side =
        (det_lo < cutoff) ? BoundarySide::Lower : BoundarySide::Upper;
  }

  const double snapped =
      (out.side == BoundarySide::Lower) ? ext.q_lower : ext.q_upper;
  out.m_hat.m[static_cast<std::size_t>(level)] =
      keep_input ? out.m_hat.m[static_cast<std::size_t>(level)] : snapped;

  if (want_jacobian) {
    const Eigen::VectorXd& dq = (out.side == BoundarySide::Lower) ? dql : dqu;
    for (int e = 0; e <= I_hat; ++e) out.jacobian(level, e) = dq(e);
  }

  // Complete the tail: the first boundary level of the running vector is
  // I_hat+1 on the chosen side, so each next moment is the unique root of
  // the same-side window equation.
  for (int t = level + 1; t <= T; ++t) {
    Eigen::VectorXd g;
    const std::span<const double> head(out.m_hat.m.data(),
                                       static_cast<std::size_t>(t));
    const double q =
        boundary_extend(head, level, out.side, want_jacobian ? &g : nullptr);
    out.m_hat.m[static_cast<std::size_t>(t)] = q;
    if (want_jacobian) {
      // Chain through the rows already filled in.
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(T + 1);
      for (int w = 0; w < t; ++w) {
        if (g(w) != 0.0) row += g(w) * out.jacobian.row(w);
      }
      out.jacobian.row(t) = row;
    }
  }
  for (auto& x : out.m_hat.m) x = clamp01(x);
  return out;
}

// ---------------------------------------------------------------------
// Discretised linear-programming oracle.
// ---------------------------------------------------------------------

namespace {

// Minimises c'w subject to A w = b, w >= 0, where column j of A is the
// power column (1, u_j, ..., u_j^T) and c_j = u_j^(T+1). Works on a
// restricted active set of columns, pricing the full grid between
// restricted solves (column generation): a plain simplex walks the fine
// grid one micro-step at a time near degenerate inputs, while the
// restricted problems here stay tiny. The final pricing pass certifies a
// duality gap below rc-tolerance times sum w_j = m_0 = 1. `sense` = +1
// minimises the (T+1)-th moment, -1 maximises it.
class MomentSimplex {
public:
  MomentSimplex(const std::vector<double>& m, int grid, double sense)
      : m_(m), T_(static_cast<int>(m.size()) - 1), n_cols_(grid + 1),
        grid_(grid), sense_(sense) {}

  double solve() {
    const int r = T_ + 1;
    basis_.resize(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) {
      basis_[static_cast<std::size_t>(i)] = n_cols_ + i;
    }
    binv_ = Eigen::MatrixXd::Identity(r, r);
    xb_ = Eigen::Map<const Eigen::VectorXd>(m_.data(), r);

    in_active_.assign(static_cast<std::size_t>(n_cols_), false);
    active_.clear();
    blocked_.clear();
    const int seeds = 64;
    for (int k = 0; k <= seeds; ++k) {
      add_column(static_cast<int>(
          std::llround(static_cast<double>(k) * grid_ / seeds)));
    }

    int restarts = 0;
    for (int outer = 0; outer < 500; ++outer) {
      run(true);
      if (!refactorize() && restarts++ < 5) {
        reset_to_artificial_basis();
        continue;
      }
      if (infeasibility() > 1e-10) {
        if (add_priced_columns(true, 1e-11) != 0) continue;
        if (infeasibility() > 1e-7) {
          throw DomainError(
              "lp_oracle_extremal: moment vector is not representable on "
              "the grid (numerically outside the moment space)");
        }
        // Representable only up to a residual. The leftover slack is
        // frozen: phase 2 refuses any pivot that would grow it.
      }
      cleanout_artificials();
      eliminate_leftover_artificials();
      run(false);
      if (!refactorize() && restarts++ < 5) {
        reset_to_artificial_basis();
        continue;
      }
      if (add_priced_columns(false) == 0) {
        double obj = 0.0;
        for (int i = 0; i < r; ++i) {
          const int j = basis_[static_cast<std::size_t>(i)];
          if (j < n_cols_) obj += cost(j, false) * xb_(i);
        }
        return sense_ * obj;
      }
    }
    throw NumericError("lp_oracle_extremal: column generation stalled");
  }

private:
  double point(int j) const {
    return static_cast<double>(j) / static_cast<double>(grid_);
  }

  double cost(int j, bool phase1) const {
    if (j >= n_cols_) return phase1 ? 1.0 : 0.0;
    if (phase1) return 0.0;
    return sense_ * std::pow(point(j), T_ + 1);
  }

  Eigen::VectorXd column(int j) const {
    const int r = T_ + 1;
    Eigen::VectorXd col = Eigen::VectorXd::Zero(r);
    if (j >= n_cols_) {
      col(j - n_cols_) = 1.0;
      return col;
    }
    const double u = point(j);
    double pw = 1.0;
    for (int t = 0; t < r; ++t) {
      col(t) = pw;
      pw *= u;
    }
    return col;
  }

  void add_column(int j) {
    if (j < 0 || j >= n_cols_ || in_active_[static_cast<std::size_t>(j)]) {
      return;
    }
    in_active_[static_cast<std::size_t>(j)] = true;
    active_.push_back(j);
  }

  // Rebuilds the basis inverse and the basic solution from scratch.
  // Incremental pivot updates drift on the nearly collinear power
  // columns, so this runs periodically and at phase exits. Returns false
  // when the recomputed solution has a solidly negative entry, meaning
  // the walk went through a numerically bad basis; the caller then
  // restarts from the artificial basis. Boundary inputs carry dual
  // vectors of size ~1/spacing^2, so slack beyond ~1e-11 in the basic
  // solution would move the objective visibly and must not be clamped
  // away silently.
  bool refactorize() {
    const int r = T_ + 1;
    Eigen::MatrixXd basis_matrix(r, r);
    for (int i = 0; i < r; ++i) {
      basis_matrix.col(i) = column(basis_[static_cast<std::size_t>(i)]);
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(basis_matrix);
    binv_ = lu.inverse();
    const Eigen::Map<const Eigen::VectorXd> b(m_.data(), r);
    xb_ = binv_ * b;
    xb_ += binv_ * (b - basis_matrix * xb_);
    xb_ += binv_ * (b - basis_matrix * xb_);
    bool clean = true;
    for (int i = 0; i < r; ++i) {
      if (xb_(i) < 0.0) {
        if (xb_(i) > -1e-11) {
          xb_(i) = 0.0;
        } else {
          clean = false;
        }
      }
    }
    return clean;
  }

  void reset_to_artificial_basis() {
    const int r = T_ + 1;
    for (int i = 0; i < r; ++i) {
      basis_[static_cast<std::size_t>(i)] = n_cols_ + i;
    }
    binv_ = Eigen::MatrixXd::Identity(r, r);
    xb_ = Eigen::Map<const Eigen::VectorXd>(m_.data(), r);
  }

  double infeasibility() const {
    double infeas = 0.0;
    for (int i = 0; i < T_ + 1; ++i) {
      if (basis_[static_cast<std::size_t>(i)] >= n_cols_) {
        infeas += std::abs(xb_(i));
      }
    }
    return infeas;
  }

  Eigen::VectorXd duals(bool phase1) const {
    const int r = T_ + 1;
    Eigen::VectorXd cb(r);
    for (int i = 0; i < r; ++i) {
      cb(i) = cost(basis_[static_cast<std::size_t>(i)], phase1);
    }
    return binv_.transpose() * cb;
  }

  // Prices every grid column at the current duals and activates the most
  // negative ones. Returns how many were added.
  int add_priced_columns(bool phase1, double threshold = 1e-9) {
    const int r = T_ + 1;
    const Eigen::VectorXd y = duals(phase1);
    std::vector<std::pair<double, int>> violators;
    for (int j = 0; j < n_cols_; ++j) {
      if (in_active_[static_cast<std::size_t>(j)]) continue;
      if (!phase1 && blocked_.count(j)) continue;
      const double u = point(j);
      double dot = 0.0;
      for (int t = r - 1; t >= 0; --t) dot = dot * u + y(t);
      const double d = cost(j, phase1) - dot;
      if (d < -threshold) violators.push_back({d, j});
    }
    std::sort(violators.begin(), violators.end());
    const int take =
        std::min<int>(25, static_cast<int>(violators.size()));
    for (int k = 0; k < take; ++k) add_column(violators[static_cast<std::size_t>(k)].second);
    return take;
  }

  // Primal simplex over the active columns; Bland's rule with exact
  // tie-breaks once pivots degenerate, which rules out cycling.
  void run(bool phase1) {
    const int r = T_ + 1;
    const double rc_tol = phase1 ? 1e-11 : 1e-9;
    int degenerate_streak = 0;
    for (int iter = 0; iter < 50000; ++iter) {
      if (phase1 && infeasibility() <= 1e-11) return;

      const Eigen::VectorXd y = duals(phase1);
      const bool bland = degenerate_streak > r + 5 || iter > 2000;
      int enter = -1;
      double best = -rc_tol;
      for (int j : active_) {
        if (!phase1 && blocked_.count(j)) continue;
        bool basic = false;
        for (int i = 0; i < r; ++i) {
          if (basis_[static_cast<std::size_t>(i)] == j) basic = true;
        }
        if (basic) continue;  // its true reduced cost is zero
        const double u = point(j);
        double dot = 0.0;
        for (int t = r - 1; t >= 0; --t) dot = dot * u + y(t);
        const double d = cost(j, phase1) - dot;
        if (d < -rc_tol) {
          if (bland) {
            if (enter < 0 || j < enter) enter = j;
          } else if (d < best) {
            best = d;
            enter = j;
          }
        }
      }
      if (enter < 0) return;  // optimal on the active set

      const Eigen::VectorXd dir = binv_ * column(enter);
      if (!phase1) {
        // Entering a column whose pivot would grow a leftover artificial
        // quietly relaxes a constraint, which the boundary geometry
        // amplifies; freeze such directions out of the phase entirely.
        bool grows_artificial = false;
        for (int i = 0; i < r; ++i) {
          if (basis_[static_cast<std::size_t>(i)] >= n_cols_ &&
              dir(i) < -1e-12) {
            grows_artificial = true;
            break;
          }
        }
        if (grows_artificial) {
          blocked_.insert(enter);
          continue;
        }
      }
      int leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < r; ++i) {
        if (dir(i) <= 1e-10) continue;
        const double ratio = std::max(0.0, xb_(i)) / dir(i);
        if (leave < 0 || ratio < best_ratio ||
            (ratio == best_ratio &&
             basis_[static_cast<std::size_t>(i)] <
                 basis_[static_cast<std::size_t>(leave)])) {
          best_ratio = ratio;
          leave = i;
        }
      }
      if (leave < 0) {
        throw NumericError("lp_oracle_extremal: unbounded subproblem");
      }
      degenerate_streak = (best_ratio < 1e-12) ? degenerate_streak + 1 : 0;
      pivot(leave, enter, dir, best_ratio);
      if (!bland && (iter + 1) % 200 == 0) refactorize();
    }
    throw NumericError("lp_oracle_extremal: iteration limit reached");
  }

  void pivot(int leave, int enter, const Eigen::VectorXd& dir,
             double entering_value) {
    const int r = T_ + 1;
    const double piv = dir(leave);
    binv_.row(leave) /= piv;
    xb_(leave) = entering_value;
    for (int i = 0; i < r; ++i) {
      if (i == leave) continue;
      const double f = dir(i);
      if (f != 0.0) {
        binv_.row(i) -= f * binv_.row(leave);
        xb_(i) -= f * entering_value;
        if (xb_(i) < 0.0 && xb_(i) > -1e-12) xb_(i) = 0.0;
      }
    }
    basis_[static_cast<std::size_t>(leave)] = enter;
  }

  // Swaps zero-level artificials out of the basis before phase 2 so the
  // main loop only ever performs standard pivots. Degenerate swap on any
  // active column with a nonzero tableau element in that row.
  // Pivots positive-level artificials out through a real column for
  // which the artificial's row attains the minimum ratio. When it
  // succeeds the basis becomes all-real and a fresh refactorisation
  // reproduces the right-hand side to machine precision, which is what
  // the boundary-sensitive objectives need.
  void eliminate_leftover_artificials() {
    const int r = T_ + 1;
    for (int round = 0; round < 2 * r; ++round) {
      int row = -1;
      for (int i = 0; i < r; ++i) {
        if (basis_[static_cast<std::size_t>(i)] >= n_cols_ && xb_(i) > 0.0) {
          row = i;
          break;
        }
      }
      if (row < 0) return;
      bool pivoted = false;
      for (int j : active_) {
        bool basic = false;
        for (int k = 0; k < r; ++k) {
          if (basis_[static_cast<std::size_t>(k)] == j) basic = true;
        }
        if (basic) continue;
        const Eigen::VectorXd dir = binv_ * column(j);
        if (dir(row) <= 1e-8) continue;
        const double ratio = xb_(row) / dir(row);
        bool attains_min = true;
        for (int k = 0; k < r; ++k) {
          if (k == row || dir(k) <= 1e-10) continue;
          if (std::max(0.0, xb_(k)) / dir(k) < ratio - 1e-15) {
            attains_min = false;
            break;
          }
        }
        if (!attains_min) continue;
        pivot(row, j, dir, ratio);
        (void)refactorize();
        pivoted = true;
        break;
      }
      if (!pivoted) return;
    }
  }

  void cleanout_artificials() {
    const int r = T_ + 1;
    for (int i = 0; i < r; ++i) {
      if (basis_[static_cast<std::size_t>(i)] < n_cols_) continue;
      if (std::abs(xb_(i)) > 1e-9) continue;
      xb_(i) = 0.0;
      // prefer an active column; sweep the whole grid if none pivots
      int found = -1;
      double found_elem = 0.0;
      for (int pass = 0; pass < 2 && found < 0; ++pass) {
        const int step = (pass == 0) ? 0 : 1;
        const auto try_column = [&](int j) {
          bool basic = false;
          for (int k = 0; k < r; ++k) {
            if (basis_[static_cast<std::size_t>(k)] == j) basic = true;
          }
          if (basic) return;
          const double elem = binv_.row(i).dot(column(j));
          if (std::abs(elem) > std::abs(found_elem) &&
              std::abs(elem) > 1e-6) {
            found = j;
            found_elem = elem;
          }
        };
        if (step == 0) {
          for (int j : active_) try_column(j);
        } else {
          for (int j = 0; j < n_cols_; j += std::max(1, grid_ / 512)) {
            try_column(j);
          }
        }
      }
      if (found >= 0) {
        add_column(found);
        pivot(i, found, binv_ * column(found), 0.0);
      }
    }
    (void)refactorize();
  }

  const std::vector<double>& m_;
  int T_;
  int n_cols_;
  int grid_;
  double sense_;
  std::vector<int> basis_;
  std::vector<int> active_;
  std::vector<bool> in_active_;
  std::set<int> blocked_;  // phase-2 columns that would grow an artificial
  Eigen::MatrixXd binv_;
  Eigen::VectorXd xb_;
};

}  // namespace

ExtremalMoments lp_oracle_extremal(const MomentVector& m, int grid_size) {
  if (grid_size < 1000) {
    throw DomainError("lp_oracle_extremal: grid_size must be >= 1000");
  }
  if (std::abs(m[0] - 1.0) > 1e-9) {
    throw DomainError("lp_oracle_extremal: m_0 must equal 1");
  }
  for (double v : m.m) {
    if (v < -1e-12 || v > 1.0 + 1e-12) {
      throw DomainError("lp_oracle_extremal: moments must lie in [0,1]");
    }
  }
  ExtremalMoments out;
  out.q_lower = MomentSimplex(m.m, grid_size, +1.0).solve();
  out.q_upper = MomentSimplex(m.m, grid_size, -1.0).solve();
  out.boundary = false;
  return out;
}

}  // namespace felogit
