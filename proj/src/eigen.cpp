// SPDX-License-Identifier: Apache-2.0
#include "openbook/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#ifdef OPENBOOK_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif

#include "openbook/error.hpp"
#include "openbook/log.hpp"

namespace openbook
{

using Eigen::MatrixXd;
using Eigen::VectorXd;

const char *to_string(Preconditioner p)
{
  switch (p)
  {
    case Preconditioner::None:
      return "none";
    case Preconditioner::Diagonal:
      return "diagonal";
    case Preconditioner::Factorized:
      return "factorized";
  }
  return "?";
}

Preconditioner preconditioner_from_string(const std::string &name)
{
  if (name == "none")
  {
    return Preconditioner::None;
  }
  if (name == "diagonal")
  {
    return Preconditioner::Diagonal;
  }
  if (name == "factorized")
  {
    return Preconditioner::Factorized;
  }
  fail(ErrorKind::Config, "unknown preconditioner '" + name + "' (none | diagonal | factorized)");
}

Eigen::MatrixXd seeded_block(int rows, int cols, std::uint64_t seed)
{
  std::mt19937_64 gen(seed);
  MatrixXd x(rows, cols);
  for (int j = 0; j < cols; ++j)
  {
    for (int i = 0; i < rows; ++i)
    {
      // 53 random bits mapped to [-1, 1).
      x(i, j) = static_cast<double>(gen() >> 11) * 0x1.0p-52 - 1.0;
    }
  }
  return x;
}

std::vector<std::array<int, 2>> find_clusters(const std::vector<double> &values, double rel)
{
  std::vector<std::array<int, 2>> out;
  const int n = static_cast<int>(values.size());
  int i = 0;
  while (i < n)
  {
    int j = i;
    while (j + 1 < n)
    {
      const double scale = std::max(std::abs(values[j]), std::abs(values[j + 1]));
      if (std::abs(values[j + 1] - values[j]) <= rel * scale + 1e-12)
      {
        ++j;
      }
      else
      {
        break;
      }
    }
    if (j > i)
    {
      out.push_back({i, j});
    }
    i = j + 1;
  }
  return out;
}

namespace
{

// A block with its M and K images kept consistent under column operations.
struct Images
{
  MatrixXd v, mv, kv;

  int cols() const { return static_cast<int>(v.cols()); }
  void apply(const MatrixXd &t)
  {
    v = v * t;
    mv = mv * t;
    if (kv.cols() > 0)
    {
      kv = kv * t;
    }
  }
};

// Removes the M-components of b along the M-orthonormal block q.
void project_out(Images &b, const Images &q)
{
  if (q.cols() == 0 || b.cols() == 0)
  {
    return;
  }
  const MatrixXd c = q.mv.transpose() * b.v;
  b.v.noalias() -= q.v * c;
  b.mv.noalias() -= q.mv * c;
  if (b.kv.cols() > 0)
  {
    b.kv.noalias() -= q.kv * c;
  }
}

// M-orthonormalizes b by the scaled eigen-decomposition of its Gram matrix,
// dropping directions whose relative weight is below `drop`.
void svqb(Images &b, double drop)
{
  if (b.cols() == 0)
  {
    return;
  }
  MatrixXd g = b.v.transpose() * b.mv;
  g = 0.5 * (g + g.transpose()).eval();
  VectorXd d = g.diagonal();
  for (int i = 0; i < d.size(); ++i)
  {
    d[i] = d[i] > 0.0 ? 1.0 / std::sqrt(d[i]) : 0.0;
  }
  const MatrixXd h = d.asDiagonal() * g * d.asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(h);
  const VectorXd &theta = es.eigenvalues();
  const double top = theta.maxCoeff();
  std::vector<int> keep;
  for (int i = 0; i < theta.size(); ++i)
  {
    if (theta[i] > drop * std::max(top, 1.0))
    {
      keep.push_back(i);
    }
  }
  MatrixXd t(d.size(), static_cast<int>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c)
  {
    t.col(static_cast<int>(c)) =
        d.asDiagonal() * es.eigenvectors().col(keep[c]) / std::sqrt(theta[keep[c]]);
  }
  b.apply(t);
}

double orthonormality_error(const Images &b)
{
  if (b.cols() == 0)
  {
    return 0.0;
  }
  const MatrixXd g = b.v.transpose() * b.mv;
  return (g - MatrixXd::Identity(b.cols(), b.cols())).cwiseAbs().maxCoeff();
}

void orthonormalize(Images &b, double drop)
{
  for (int pass = 0; pass < 3; ++pass)
  {
    svqb(b, drop);
    if (orthonormality_error(b) <= 1e-12)
    {
      return;
    }
  }
}

void refresh_images(const FemPair &pair, Images &b)
{
  if (b.cols() == 0)
  {
    return;
  }
  spmm(pair.mass, b.v, b.mv);
  spmm(pair.stiffness, b.v, b.kv);
}

class Precond
{
public:
  Precond(const FemPair &pair, Preconditioner kind) : kind_(kind)
  {
    const int n = pair.size();
    if (kind == Preconditioner::Diagonal)
    {
      const VectorXd kd = pair.stiffness.diagonal(), md = pair.mass.diagonal();
      diag_ = (kd + md).cwiseInverse();
    }
    else if (kind == Preconditioner::Factorized)
    {
      const double sigma = 1e-6 * pair.stiffness.norm_inf() / pair.mass.norm_inf();
      std::vector<Eigen::Triplet<double>> t;
      t.reserve(pair.stiffness.nnz() + pair.mass.nnz());
      for (const SparseSym *a : {&pair.stiffness, &pair.mass})
      {
        const double f = a == &pair.mass ? sigma : 1.0;
        for (int i = 0; i < n; ++i)
        {
          for (auto k = a->row_ptr[i]; k < a->row_ptr[i + 1]; ++k)
          {
            t.emplace_back(i, a->col[k], f * a->val[k]);
          }
        }
      }
      Eigen::SparseMatrix<double> s(n, n);
      s.setFromTriplets(t.begin(), t.end());
      factor_.compute(s);
      if (factor_.info() != Eigen::Success)
      {
        fail(ErrorKind::Solver, "input error: shifted stiffness could not be factored");
      }
    }
  }

  MatrixXd apply(const MatrixXd &r) const
  {
    switch (kind_)
    {
      case Preconditioner::Diagonal:
        return diag_.asDiagonal() * r;
      case Preconditioner::Factorized:
        return factor_.solve(r);
      case Preconditioner::None:
        break;
    }
    return r;
  }

private:
  Preconditioner kind_;
  VectorXd diag_;
#ifdef OPENBOOK_HAVE_CHOLMOD
  Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>> factor_;
#else
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor_;
#endif
};

double residual_of(double lambda, const VectorXd &ku, const VectorXd &mu)
{
  const double mn = mu.norm();
  return mn > 0.0 ? (ku - lambda * mu).norm() / (mn * std::max(1.0, std::abs(lambda)))
                  : std::numeric_limits<double>::infinity();
}

}  // namespace

void compute_residuals(const FemPair &pair, EigenResult &result)
{
  result.residuals.assign(result.values.size(), 0.0);
  if (result.values.empty())
  {
    return;
  }
  MatrixXd ku, mu;
  spmm(pair.stiffness, result.vectors, ku);
  spmm(pair.mass, result.vectors, mu);
  for (std::size_t i = 0; i < result.values.size(); ++i)
  {
    const int c = static_cast<int>(i);
    result.residuals[i] = residual_of(result.values[i], ku.col(c), mu.col(c));
  }
}

EigenResult solve_lowest(const FemPair &pair, const SolverOpts &opts)
{
  const int n = pair.size();
  const int k = opts.n_eigs;
  if (k < 1)
  {
    fail(ErrorKind::Config, "n_eigs must be at least 1");
  }
  if (!(opts.tol > 0.0))
  {
    fail(ErrorKind::Config, "solver tolerance must be positive");
  }
  if (4 * k >= n)
  {
    fail(ErrorKind::Size, "n_eigs = " + std::to_string(k) + " needs more than " +
                              std::to_string(4 * k) + " degrees of freedom (have " +
                              std::to_string(n) + ")");
  }
  int b = opts.block > 0 ? opts.block : k + std::max(4, k / 2);
  b = std::clamp(b, k, n / 3);

  const VectorXd mdiag = pair.mass.diagonal();
  if (mdiag.minCoeff() <= 0.0)
  {
    fail(ErrorKind::Solver, "input error: mass matrix is not positive definite");
  }
  const Precond precond(pair, opts.precond);

  constexpr double drop = 1e-14;
  Images x, w, p;
  x.v = seeded_block(n, b, opts.seed);
  spmm(pair.mass, x.v, x.mv);
  orthonormalize(x, drop);
  if (x.cols() < b)
  {
    fail(ErrorKind::Solver, "input error: mass matrix is not positive definite on the start block");
  }
  spmm(pair.stiffness, x.v, x.kv);
  VectorXd lambda;
  {
    MatrixXd a = x.v.transpose() * x.kv;
    a = 0.5 * (a + a.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
    lambda = es.eigenvalues();
    x.apply(es.eigenvectors());
  }

  EigenResult res;
  std::vector<double> rn(b, 0.0);
  int it = 0;
  for (; it < opts.max_iter; ++it)
  {
    const MatrixXd r = x.kv - x.mv * lambda.asDiagonal();
    std::vector<int> active;
    bool done = true;
    for (int i = 0; i < b; ++i)
    {
      const double mn = x.mv.col(i).norm();
      rn[i] = r.col(i).norm() / (mn * std::max(1.0, std::abs(lambda[i])));
      if (rn[i] > opts.tol)
      {
        active.push_back(i);
        done = done && i >= k;
      }
    }
    if (done)
    {
      res.converged = true;
      break;
    }

    MatrixXd ra(n, static_cast<int>(active.size()));
    for (std::size_t c = 0; c < active.size(); ++c)
    {
      ra.col(static_cast<int>(c)) = r.col(active[c]);
    }
    w.v = precond.apply(ra);
    spmm(pair.mass, w.v, w.mv);
    w.kv.resize(0, 0);
    for (int pass = 0; pass < 2; ++pass)
    {
      project_out(w, x);
      project_out(w, p);
      orthonormalize(w, drop);
    }
    refresh_images(pair, w);
    if (p.cols() > 0)
    {
      project_out(p, x);
      project_out(p, w);
      orthonormalize(p, drop);
    }

    const int nx = x.cols(), nw = w.cols(), np = p.cols();
    const int ns = nx + nw + np;
    MatrixXd s(n, ns), ms(n, ns), ks(n, ns);
    s << x.v, w.v, p.v;
    ms << x.mv, w.mv, p.mv;
    ks << x.kv, w.kv, p.kv;
    MatrixXd ga = s.transpose() * ks, gb = s.transpose() * ms;
    ga = 0.5 * (ga + ga.transpose()).eval();
    gb = 0.5 * (gb + gb.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ge(ga, gb);
    if (ge.info() != Eigen::Success)
    {
      // Lost conditioning: restart without the search directions.
      p = Images{};
      continue;
    }
    const MatrixXd c = ge.eigenvectors().leftCols(b);
    lambda = ge.eigenvalues().head(b);

    p.v = s.rightCols(nw + np) * c.bottomRows(nw + np);
    p.mv = ms.rightCols(nw + np) * c.bottomRows(nw + np);
    p.kv = ks.rightCols(nw + np) * c.bottomRows(nw + np);
    x.v = s * c;
    x.mv = ms * c;
    x.kv = ks * c;
    if (opts.refresh > 0 && (it + 1) % opts.refresh == 0)
    {
      refresh_images(pair, x);
      refresh_images(pair, p);
    }
  }
  res.iterations = it;
  res.values.assign(lambda.data(), lambda.data() + k);
  res.vectors = x.v.leftCols(k);
  compute_residuals(pair, res);
  res.clusters = find_clusters(res.values);
  log_debug("solve_lowest: n = " + std::to_string(n) + ", block = " + std::to_string(b) +
            ", iterations = " + std::to_string(it) + (res.converged ? "" : " (not converged)"));
  return res;
}

EigenResult dense_oracle(const FemPair &pair)
{
  const int n = pair.size();
  if (n > dense_limit)
  {
    fail(ErrorKind::Size, "dense oracle is limited to " + std::to_string(dense_limit) +
                              " degrees of freedom (have " + std::to_string(n) + ")");
  }
  const MatrixXd kd = pair.stiffness.to_dense(), md = pair.mass.to_dense();
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ge(kd, md);
  if (ge.info() != Eigen::Success)
  {
    fail(ErrorKind::Solver, "input error: dense oracle could not factor the mass matrix");
  }
  EigenResult res;
  res.values.assign(ge.eigenvalues().data(), ge.eigenvalues().data() + n);
  res.vectors = ge.eigenvectors();
  res.converged = true;
  compute_residuals(pair, res);
  res.clusters = find_clusters(res.values);
  return res;
}

double rayleigh(const FemPair &pair, const Eigen::VectorXd &u)
{
  const double m = bilinear(pair.mass, u, u);
  if (!(m > 0.0))
  {
    fail(ErrorKind::Solver, "input error: Rayleigh quotient of a vector with zero M-norm");
  }
  return bilinear(pair.stiffness, u, u) / m;
}

std::vector<double> ritz_values(const FemPair &pair, const Eigen::MatrixXd &basis)
{
  MatrixXd kb, mb;
  spmm(pair.stiffness, basis, kb);
  spmm(pair.mass, basis, mb);
  MatrixXd ga = basis.transpose() * kb, gb = basis.transpose() * mb;
  ga = 0.5 * (ga + ga.transpose()).eval();
  gb = 0.5 * (gb + gb.transpose()).eval();
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ge(ga, gb, Eigen::EigenvaluesOnly);
  if (ge.info() != Eigen::Success)
  {
    fail(ErrorKind::Solver, "input error: trial basis is rank deficient in the M inner product");
  }
  const VectorXd &v = ge.eigenvalues();
  return {v.data(), v.data() + v.size()};
}

std::vector<SpectralGap> match_spectra(const std::vector<double> &a, const std::vector<double> &b,
                                       int n)
{
  if (n < 0 || static_cast<int>(a.size()) < n || static_cast<int>(b.size()) < n)
  {
    fail(ErrorKind::Size, "match_spectra needs " + std::to_string(n) + " values on both sides");
  }
  std::vector<double> sa(a.begin(), a.begin() + n), sb(b.begin(), b.begin() + n);
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::vector<SpectralGap> out;
  for (int i = 0; i < n; ++i)
  {
    SpectralGap g;
    g.index = i;
    g.a = sa[i];
    g.b = sb[i];
    g.abs = std::abs(sa[i] - sb[i]);
    const double scale = std::max(std::abs(sa[i]), std::abs(sb[i]));
    g.rel = scale > 0.0 ? g.abs / scale : 0.0;
    out.push_back(g);
  }
  return out;
}

std::vector<SpectralGap> match_spectra(const EigenResult &a, const EigenResult &b, int n)
{
  if (!a.converged || !b.converged)
  {
    fail(ErrorKind::Size, "match_spectra needs converged results");
  }
  return match_spectra(a.values, b.values, n);
}

}  // namespace openbook
