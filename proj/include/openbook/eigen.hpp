// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "openbook/fem.hpp"

namespace openbook
{

enum class Preconditioner
{
  None,
  Diagonal,
  // Sparse LDL^T of K + sigma M with a small positive shift.
  Factorized
};

const char *to_string(Preconditioner p);
Preconditioner preconditioner_from_string(const std::string &name);

struct SolverOpts
{
  int n_eigs = 6;
  // Block width; 0 picks n_eigs plus a guard of max(4, n_eigs / 2).
  int block = 0;
  double tol = 1e-8;
  int max_iter = 20000;
  Preconditioner precond = Preconditioner::Diagonal;
  std::uint64_t seed = 1;
  // Recompute K X and M X from scratch every this many iterations.
  int refresh = 16;
};

struct EigenResult
{
  std::vector<double> values;
  // Columns are M-orthonormal eigenvectors.
  Eigen::MatrixXd vectors;
  // ||K u - lambda M u|| / (||M u|| max(1, |lambda|)).
  std::vector<double> residuals;
  int iterations = 0;
  bool converged = false;
  // Runs of values within the cluster tolerance: [first, last] index pairs.
  std::vector<std::array<int, 2>> clusters;

  std::size_t size() const { return values.size(); }
  // Lambda = largest returned value.
  double cap() const { return values.empty() ? 0.0 : values.back(); }
};

// Relative width under which neighbouring eigenvalues form one cluster.
inline constexpr double cluster_tolerance = 1e-6;

std::vector<std::array<int, 2>> find_clusters(const std::vector<double> &values,
                                              double rel = cluster_tolerance);

// Lowest n_eigs pairs by block preconditioned Rayleigh-quotient minimization.
EigenResult solve_lowest(const FemPair &pair, const SolverOpts &opts);

// Dense generalized decomposition of the whole pair (dimension <= 2000).
EigenResult dense_oracle(const FemPair &pair);
inline constexpr int dense_limit = 2000;

// u^T K u / u^T M u.
double rayleigh(const FemPair &pair, const Eigen::VectorXd &u);

// Ritz values of the pair on the span of the basis columns.
std::vector<double> ritz_values(const FemPair &pair, const Eigen::MatrixXd &basis);

// Fills residuals from scratch.
void compute_residuals(const FemPair &pair, EigenResult &result);

struct SpectralGap
{
  int index = 0;
  double a = 0.0, b = 0.0;
  double abs = 0.0;
  double rel = 0.0;  // abs / max(|a|, |b|, 1e-300), 0 when both vanish
};

std::vector<SpectralGap> match_spectra(const std::vector<double> &a, const std::vector<double> &b,
                                       int n);
std::vector<SpectralGap> match_spectra(const EigenResult &a, const EigenResult &b, int n);

// Deterministic uniform block in [-1, 1) from a 64-bit Mersenne twister.
Eigen::MatrixXd seeded_block(int rows, int cols, std::uint64_t seed);

}  // namespace openbook
