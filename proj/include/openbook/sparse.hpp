// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace openbook
{

struct Triplet
{
  int row = 0;
  int col = 0;
  double value = 0.0;
};

// Symmetric matrix stored in full CSR form (both triangles) so that products
// are a single row sweep.
struct SparseSym
{
  int n = 0;
  std::vector<std::int64_t> row_ptr{0};
  std::vector<int> col;
  std::vector<double> val;
  // Largest |a_ij - a_ji| seen when the matrix was built.
  double asymmetry = 0.0;

  std::size_t nnz() const { return val.size(); }
  double diagonal(int i) const;
  Eigen::VectorXd diagonal() const;
  // Max absolute row sum.
  double norm_inf() const;
  Eigen::MatrixXd to_dense() const;
  double sum() const;
};

// Sums duplicates, drops exact zeros and records the asymmetry of the input.
SparseSym sparse_from_triplets(int n, std::vector<Triplet> triplets);

SparseSym sparse_from_dense(const Eigen::MatrixXd &a);

// y = A x (OpenMP over rows; each row is reduced serially, so the result does
// not depend on the thread count).
void spmv(const SparseSym &a, const Eigen::VectorXd &x, Eigen::VectorXd &y);
// Y = A X for a block of columns.
void spmm(const SparseSym &a, const Eigen::MatrixXd &x, Eigen::MatrixXd &y);

// Single-threaded reference versions.
void spmv_serial(const SparseSym &a, const Eigen::VectorXd &x, Eigen::VectorXd &y);
void spmm_serial(const SparseSym &a, const Eigen::MatrixXd &x, Eigen::MatrixXd &y);

// x^T A y.
double bilinear(const SparseSym &a, const Eigen::VectorXd &x, const Eigen::VectorXd &y);

// MatrixMarket coordinate format, symmetric lower triangle.
void export_matrix_market(const SparseSym &a, const std::string &path);
SparseSym read_matrix_market(const std::string &path);

}  // namespace openbook
