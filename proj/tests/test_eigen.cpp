// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "openbook/eigen.hpp"
#include "openbook/spec_io.hpp"

using namespace openbook;
using std::numbers::pi;

namespace
{

FemPair square_pair(double h)
{
  OpenBookSpec spec = load_spec(fixture("unit_square.json"));
  spec.finalize();
  SurfaceMeshOptions o;
  o.h = h;
  SurfaceMesh sm = triangulate_pages(spec, o);
  compute_metric_cache(spec, sm);
  return assemble_surface(sm);
}

SolverOpts opts_for(int n, Preconditioner p)
{
  SolverOpts o;
  o.n_eigs = n;
  o.precond = p;
  o.tol = 1e-10;
  return o;
}

}  // namespace

TEST_CASE("block solver matches the dense oracle")
{
  const FemPair p = square_pair(0.05);
  REQUIRE(p.size() <= dense_limit);
  const EigenResult dense = dense_oracle(p);
  for (Preconditioner pc : {Preconditioner::Diagonal, Preconditioner::Factorized})
  {
    CAPTURE(to_string(pc));
    const EigenResult it = solve_lowest(p, opts_for(8, pc));
    REQUIRE(it.converged);
    for (int i = 0; i < 8; ++i)
    {
      CHECK(std::abs(it.values[i] - dense.values[i]) <= 1e-8 * std::max(1.0, dense.values[i]));
      CHECK(it.residuals[i] <= 1e-9);
    }
  }
}

TEST_CASE("seeded solves are bitwise reproducible")
{
  const FemPair p = square_pair(0.1);
  const EigenResult a = solve_lowest(p, opts_for(6, Preconditioner::Factorized));
  const EigenResult b = solve_lowest(p, opts_for(6, Preconditioner::Factorized));
  CHECK(a.values == b.values);
  CHECK((a.vectors - b.vectors).norm() == 0.0);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("eigenvectors are mass-orthonormal")
{
  const FemPair p = square_pair(0.1);
  const EigenResult r = solve_lowest(p, opts_for(6, Preconditioner::Factorized));
  const Eigen::MatrixXd g = r.vectors.transpose() * p.mass.to_dense() * r.vectors;
  CHECK((g - Eigen::MatrixXd::Identity(6, 6)).norm() < 1e-8);
  for (int i = 0; i < 6; ++i)
  {
    CHECK(rayleigh(p, r.vectors.col(i)) == doctest::Approx(r.values[i]).epsilon(1e-9));
  }
  const std::vector<double> ritz = ritz_values(p, r.vectors);
  for (int i = 0; i < 6; ++i)
  {
    CHECK(ritz[i] == doctest::Approx(r.values[i]).epsilon(1e-9));
  }
}

TEST_CASE("square spectrum and its clusters")
{
  const FemPair p = square_pair(0.05);
  const EigenResult r = solve_lowest(p, opts_for(6, Preconditioner::Factorized));
  CHECK(std::abs(r.values[0]) < 1e-9);
  CHECK(r.values[1] == doctest::Approx(pi * pi).epsilon(0.01));
  CHECK(r.values[3] == doctest::Approx(2 * pi * pi).epsilon(0.01));
  const auto clusters = find_clusters(r.values);
  bool pair12 = false;
  for (const auto &c : clusters)
  {
    pair12 = pair12 || (c[0] == 1 && c[1] == 2);
  }
  CHECK(pair12);
}

TEST_CASE("cluster finder")
{
  const auto c = find_clusters({0.0, 1.0, 1.0 + 1e-9, 2.0, 3.0, 3.0, 3.0});
  REQUIRE(c.size() == 2);
  CHECK(c[0] == std::array<int, 2>{1, 2});
  CHECK(c[1] == std::array<int, 2>{4, 6});
}

TEST_CASE("spectra matching")
{
  const auto g = match_spectra(std::vector<double>{0.0, 1.0, 4.0}, std::vector<double>{0.0, 1.1, 4.0}, 3);
  REQUIRE(g.size() == 3);
  CHECK(g[0].rel == 0.0);
  CHECK(g[1].abs == doctest::Approx(0.1));
  CHECK(g[1].rel == doctest::Approx(0.1 / 1.1));
  CHECK_THROWS_AS(match_spectra(std::vector<double>{0.0}, std::vector<double>{0.0, 1.0}, 2), Error);
}

TEST_CASE("solver input checks")
{
  const FemPair p = square_pair(0.5);
  SolverOpts o = opts_for(p.size(), Preconditioner::Diagonal);
  CHECK_THROWS_AS(solve_lowest(p, o), Error);
  CHECK_THROWS_AS(preconditioner_from_string("ilu"), Error);
  CHECK(preconditioner_from_string("factorized") == Preconditioner::Factorized);
}

TEST_CASE("seeded start block")
{
  const Eigen::MatrixXd a = seeded_block(50, 4, 3), b = seeded_block(50, 4, 3), c = seeded_block(50, 4, 4);
  CHECK((a - b).norm() == 0.0);
  CHECK((a - c).norm() > 0.0);
}
