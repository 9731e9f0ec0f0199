#ifndef FELOGIT_TEST_HELPERS_HPP
#define FELOGIT_TEST_HELPERS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "felogit/moments.hpp"
#include "felogit/rng.hpp"

namespace felogit::test {

// Moments m_0..m_T of a finite mixture of atoms in [0,1].
inline MomentVector mixture_moments(const std::vector<double>& atoms,
                                    const std::vector<double>& weights,
                                    int T) {
  std::vector<double> m(static_cast<std::size_t>(T) + 1, 0.0);
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    double pw = weights[j];
    for (int t = 0; t <= T; ++t) {
      m[static_cast<std::size_t>(t)] += pw;
      pw *= atoms[j];
    }
  }
  m[0] = 1.0;
  return MomentVector{std::move(m)};
}

// Random mixture of up to max_atoms atoms; when grid > 0 the atoms are
// snapped to the uniform grid so the discretised oracle is exactly
// feasible.
inline MomentVector random_member(Rng& rng, int T, int max_atoms,
                                  int grid = 0) {
  const int n_atoms = 1 + static_cast<int>(rng.below(
                              static_cast<std::uint64_t>(max_atoms)));
  std::vector<double> atoms(static_cast<std::size_t>(n_atoms));
  std::vector<double> weights(static_cast<std::size_t>(n_atoms));
  double total = 0.0;
  for (int j = 0; j < n_atoms; ++j) {
    double u = rng.uniform01();
    if (grid > 0) u = std::round(u * grid) / grid;
    atoms[static_cast<std::size_t>(j)] = u;
    const double w = 0.05 + rng.uniform01();
    weights[static_cast<std::size_t>(j)] = w;
    total += w;
  }
  for (auto& w : weights) w /= total;
  return mixture_moments(atoms, weights, T);
}

// Brute-force subset-sum oracle for the symmetric sums, O(2^T).
inline std::vector<double> enumerate_symmetric_sums(
    const Eigen::MatrixXd& x, const Eigen::VectorXd& beta) {
  const int T = static_cast<int>(x.rows());
  std::vector<double> c(static_cast<std::size_t>(T) + 1, 0.0);
  for (unsigned mask = 0; mask < (1u << T); ++mask) {
    double dot = 0.0;
    int k = 0;
    for (int t = 0; t < T; ++t) {
      if (mask & (1u << t)) {
        dot += x.row(t).dot(beta);
        ++k;
      }
    }
    c[static_cast<std::size_t>(k)] += std::exp(dot);
  }
  return c;
}

}  // namespace felogit::test

#endif
