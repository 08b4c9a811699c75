// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "openbook/eigen.hpp"
#include "openbook/fem.hpp"
#include "openbook/oracle.hpp"
#include "openbook/spec_io.hpp"

using namespace openbook;
using std::numbers::pi;

namespace
{

// Symmetric star modes: sqrt(mu) a = j pi; antisymmetric: (j + 1/2) pi with
// multiplicity k - 1.
std::vector<double> star_closed_form(int k, double a, int count)
{
  std::vector<double> v;
  for (int j = 0; j < count; ++j)
  {
    v.push_back(std::pow(j * pi / a, 2));
    for (int r = 0; r < k - 1; ++r)
    {
      v.push_back(std::pow((j + 0.5) * pi / a, 2));
    }
  }
  std::sort(v.begin(), v.end());
  v.resize(count);
  return v;
}

}  // namespace

TEST_CASE("star graph secular roots")
{
  for (int k : {1, 3, 4})
  {
    CAPTURE(k);
    const OracleSpectrum s = star_graph_spectrum(k, 1.0, 10);
    const std::vector<double> ref = star_closed_form(k, 1.0, 10);
    REQUIRE(s.values.size() == 10);
    for (int i = 0; i < 10; ++i)
    {
      CHECK(s.values[i] == doctest::Approx(ref[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("star graph P1 approximation converges")
{
  const std::vector<double> ref = star_closed_form(3, 1.0, 6);
  double prev = 1e300;
  for (int per : {20, 40, 80})
  {
    const std::vector<double> fem = star_graph_fem(3, 1.0, per);
    double err = 0.0;
    for (int i = 1; i < 6; ++i)
    {
      err = std::max(err, std::abs(fem[i] - ref[i]) / ref[i]);
    }
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("flat book is separable")
{
  const double l = pi;
  const OracleSpectrum s = flat_book_spectrum(3, l, 1.0, 12);
  std::vector<double> ref;
  for (double mu : star_closed_form(3, 1.0, 20))
  {
    for (int m = 0; m < 8; ++m)
    {
      ref.push_back(m * m * pi * pi / (l * l) + mu);
    }
  }
  std::sort(ref.begin(), ref.end());
  for (int i = 0; i < 12; ++i)
  {
    CHECK(s.values[i] == doctest::Approx(ref[i]).epsilon(1e-9));
  }
  CHECK(s.method == "separable");
  CHECK(s.values[1] == doctest::Approx(1.0));
  CHECK(s.values[2] == doctest::Approx(pi * pi / 4));
}

TEST_CASE("value grouping")
{
  const auto g = group_values({0.0, 1.0, 1.0, 2.0, 2.0, 2.0});
  REQUIRE(g.size() == 3);
  CHECK(g[1].second == 2);
  CHECK(g[2].second == 3);
}

TEST_CASE("axisymmetric check")
{
  OpenBookSpec flat = load_spec(fixture("flat3.json"));
  flat.finalize();
  CHECK_THROWS_AS(check_axisymmetric(flat), Error);
  OpenBookSpec disk = load_spec(fixture("disk_hemispheres.json"));
  disk.finalize();
  CHECK_NOTHROW(check_axisymmetric(disk));
}

TEST_CASE("axisymmetric reduction agrees with surface FEM")
{
  for (const char *name : {"disk_hemispheres.json", "two_spheres.json"})
  {
    CAPTURE(name);
    OpenBookSpec spec = load_spec(fixture(name));
    spec.finalize();
    AxisymOptions ao;
    ao.elements = 400;
    const OracleSpectrum ax = axisym_spectrum(spec, 8, ao);
    CHECK(ax.method == "axisymmetric-1D");
    CHECK(std::abs(ax.values[0]) < 1e-8);

    SurfaceMeshOptions o;
    o.h = 0.05;
    SurfaceMesh sm = triangulate_pages(spec, o);
    compute_metric_cache(spec, sm);
    SolverOpts so;
    so.n_eigs = 8;
    so.precond = Preconditioner::Factorized;
    const EigenResult fem = solve_lowest(assemble_surface(sm), so);
    REQUIRE(fem.converged);
    for (int i = 1; i < 8; ++i)
    {
      CHECK(fem.values[i] == doctest::Approx(ax.values[i]).epsilon(0.01));
    }
  }
}

TEST_CASE("single azimuthal block is sorted")
{
  OpenBookSpec spec = load_spec(fixture("disk_hemispheres.json"));
  spec.finalize();
  const std::vector<double> b0 = axisym_block(spec, 0, 4, 200);
  const std::vector<double> b1 = axisym_block(spec, 1, 4, 200);
  CHECK(std::is_sorted(b0.begin(), b0.end()));
  CHECK(std::abs(b0[0]) < 1e-8);
  CHECK(b1[0] > 0.0);
}
