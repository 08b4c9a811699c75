// SPDX-License-Identifier: Apache-2.0
#include "openbook/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "openbook/error.hpp"
#include "openbook/io.hpp"

namespace openbook
{

double SparseSym::diagonal(int i) const
{
  for (auto k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
  {
    if (col[k] == i)
    {
      return val[k];
    }
  }
  return 0.0;
}

Eigen::VectorXd SparseSym::diagonal() const
{
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i)
  {
    d[i] = diagonal(i);
  }
  return d;
}

double SparseSym::norm_inf() const
{
  double best = 0.0;
  for (int i = 0; i < n; ++i)
  {
    double s = 0.0;
    for (auto k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
    {
      s += std::abs(val[k]);
    }
    best = std::max(best, s);
  }
  return best;
}

Eigen::MatrixXd SparseSym::to_dense() const
{
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
  {
    for (auto k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
    {
      a(i, col[k]) = val[k];
    }
  }
  return a;
}

double SparseSym::sum() const
{
  double s = 0.0;
  for (double v : val)
  {
    s += v;
  }
  return s;
}

SparseSym sparse_from_triplets(int n, std::vector<Triplet> triplets)
{
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet &a, const Triplet &b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseSym a;
  a.n = n;
  a.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
  std::size_t k = 0;
  for (int i = 0; i < n; ++i)
  {
    while (k < triplets.size() && triplets[k].row == i)
    {
      const int j = triplets[k].col;
      if (j < 0 || j >= n)
      {
        fail(ErrorKind::Assembly, "triplet column out of range");
      }
      double v = 0.0;
      while (k < triplets.size() && triplets[k].row == i && triplets[k].col == j)
      {
        v += triplets[k].value;
        ++k;
      }
      if (v != 0.0)
      {
        a.col.push_back(j);
        a.val.push_back(v);
      }
    }
    a.row_ptr[i + 1] = static_cast<std::int64_t>(a.val.size());
  }
  if (k != triplets.size())
  {
    fail(ErrorKind::Assembly, "triplet row out of range");
  }
  // Symmetry certificate: compare each entry with its transpose.
  for (int i = 0; i < n; ++i)
  {
    for (auto p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p)
    {
      const int j = a.col[p];
      const auto b = a.col.begin() + a.row_ptr[j], e = a.col.begin() + a.row_ptr[j + 1];
      const auto it = std::lower_bound(b, e, i);
      const double t = (it != e && *it == i) ? a.val[it - a.col.begin()] : 0.0;
      a.asymmetry = std::max(a.asymmetry, std::abs(a.val[p] - t));
    }
  }
  return a;
}

SparseSym sparse_from_dense(const Eigen::MatrixXd &d)
{
  std::vector<Triplet> t;
  for (int i = 0; i < d.rows(); ++i)
  {
    for (int j = 0; j < d.cols(); ++j)
    {
      if (d(i, j) != 0.0)
      {
        t.push_back({i, j, d(i, j)});
      }
    }
  }
  return sparse_from_triplets(static_cast<int>(d.rows()), std::move(t));
}

void spmv(const SparseSym &a, const Eigen::VectorXd &x, Eigen::VectorXd &y)
{
  y.resize(a.n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.n; ++i)
  {
    double s = 0.0;
    for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
    {
      s += a.val[k] * x[a.col[k]];
    }
    y[i] = s;
  }
}

void spmv_serial(const SparseSym &a, const Eigen::VectorXd &x, Eigen::VectorXd &y)
{
  y.resize(a.n);
  for (int i = 0; i < a.n; ++i)
  {
    double s = 0.0;
    for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
    {
      s += a.val[k] * x[a.col[k]];
    }
    y[i] = s;
  }
}

namespace
{

// Row-major scratch keeps the block reads contiguous.
using RowBlock = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

void spmm(const SparseSym &a, const Eigen::MatrixXd &x, Eigen::MatrixXd &y)
{
  const int m = static_cast<int>(x.cols());
  const RowBlock xr = x;
  RowBlock yr(a.n, m);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.n; ++i)
  {
    auto yi = yr.row(i);
    yi.setZero();
    for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
    {
      yi.noalias() += a.val[k] * xr.row(a.col[k]);
    }
  }
  y = yr;
}

void spmm_serial(const SparseSym &a, const Eigen::MatrixXd &x, Eigen::MatrixXd &y)
{
  const int m = static_cast<int>(x.cols());
  const RowBlock xr = x;
  RowBlock yr(a.n, m);
  for (int i = 0; i < a.n; ++i)
  {
    auto yi = yr.row(i);
    yi.setZero();
    for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
    {
      yi.noalias() += a.val[k] * xr.row(a.col[k]);
    }
  }
  y = yr;
}

double bilinear(const SparseSym &a, const Eigen::VectorXd &x, const Eigen::VectorXd &y)
{
  Eigen::VectorXd ay;
  spmv(a, y, ay);
  return x.dot(ay);
}

void export_matrix_market(const SparseSym &a, const std::string &path)
{
  std::ostringstream os;
  os.precision(17);
  std::size_t lower = 0;
  for (int i = 0; i < a.n; ++i)
  {
    for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
    {
      lower += a.col[k] <= i ? 1 : 0;
    }
  }
  os << "%%MatrixMarket matrix coordinate real symmetric\n";
  os << a.n << ' ' << a.n << ' ' << lower << '\n';
  for (int i = 0; i < a.n; ++i)
  {
    for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
    {
      if (a.col[k] <= i)
      {
        os << i + 1 << ' ' << a.col[k] + 1 << ' ' << a.val[k] << '\n';
      }
    }
  }
  write_file_atomic(path, os.str());
}

SparseSym read_matrix_market(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    fail(ErrorKind::Io, "cannot open '" + path + "'");
  }
  std::string line;
  std::getline(in, line);
  const bool symmetric = line.find("symmetric") != std::string::npos;
  while (std::getline(in, line) && !line.empty() && line[0] == '%')
  {
  }
  std::istringstream hdr(line);
  int rows = 0, cols = 0;
  std::size_t count = 0;
  hdr >> rows >> cols >> count;
  if (rows != cols)
  {
    fail(ErrorKind::Io, "MatrixMarket matrix is not square");
  }
  std::vector<Triplet> t;
  for (std::size_t k = 0; k < count; ++k)
  {
    int i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v))
    {
      fail(ErrorKind::Io, "truncated MatrixMarket file '" + path + "'");
    }
    t.push_back({i - 1, j - 1, v});
    if (symmetric && i != j)
    {
      t.push_back({j - 1, i - 1, v});
    }
  }
  return sparse_from_triplets(rows, std::move(t));
}

}  // namespace openbook
