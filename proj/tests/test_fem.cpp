// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "fixtures.hpp"
#include "openbook/fem.hpp"
#include "openbook/spec_io.hpp"

using namespace openbook;
using std::numbers::pi;

namespace
{

OpenBookSpec book(const char *name)
{
  OpenBookSpec spec = load_spec(fixture(name));
  spec.finalize();
  return spec;
}

FemPair surface_pair(const OpenBookSpec &spec, double h, SurfaceMesh *out = nullptr)
{
  SurfaceMeshOptions o;
  o.h = h;
  SurfaceMesh sm = triangulate_pages(spec, o);
  compute_metric_cache(spec, sm);
  FemPair p = assemble_surface(sm);
  if (out)
  {
    *out = std::move(sm);
  }
  return p;
}

}  // namespace

TEST_CASE("reference tetrahedron element")
{
  const std::array<Vec3, 4> x{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  Eigen::Matrix4d k, m;
  tet_element(x, k, m);
  CHECK((k * Eigen::Vector4d::Ones()).norm() < 1e-14);
  CHECK((k - k.transpose()).norm() == 0.0);
  CHECK(m.sum() == doctest::Approx(1.0 / 6.0));
  CHECK(m(0, 0) == doctest::Approx(1.0 / 60.0));
  CHECK(m(0, 1) == doctest::Approx(1.0 / 120.0));
  // grad of the hat at the origin is (-1, -1, -1).
  CHECK(k(0, 0) == doctest::Approx(3.0 / 6.0));
  // Energy of u = x is the volume.
  const Eigen::Vector4d u(0, 1, 0, 0);
  CHECK(u.dot(k * u) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("unit square pair integrates linear functions exactly")
{
  SurfaceMesh sm;
  const FemPair p = surface_pair(book("unit_square.json"), 0.1, &sm);
  CHECK(certify(p).pass());
  CHECK(p.measure == doctest::Approx(1.0));
  Eigen::VectorXd x(p.size()), one = Eigen::VectorXd::Ones(p.size());
  for (int i = 0; i < p.size(); ++i)
  {
    x[i] = sm.nodes[i].x.x();
  }
  CHECK(bilinear(p.stiffness, x, x) == doctest::Approx(1.0));
  CHECK(bilinear(p.mass, one, one) == doctest::Approx(1.0));
  CHECK(bilinear(p.mass, x, one) == doctest::Approx(0.5));
  CHECK(bilinear(p.mass, x, x) == doctest::Approx(1.0 / 3.0).epsilon(1e-2));
}

TEST_CASE("sphere cap area converges")
{
  // Two-sphere fixture: page 0 is the cap of polar angle pi/3 on a unit sphere.
  const OpenBookSpec spec = book("two_spheres.json");
  const double exact = 2.0 * pi * (1.0 - std::cos(pi / 3.0));
  double prev = 1.0;
  for (double h : {0.2, 0.1, 0.05})
  {
    SurfaceMesh sm;
    const FemPair p = surface_pair(spec, h, &sm);
    double cap = 0.0;
    // Metric quadrature over the cap triangles.
    for (std::size_t t = 0; t < sm.triangles.size(); ++t)
    {
      if (sm.triangles[t].page != 0)
      {
        continue;
      }
      const auto &y = sm.triangles[t].y;
      const double jac = std::abs((y[1] - y[0]).x() * (y[2] - y[0]).y() - (y[1] - y[0]).y() * (y[2] - y[0]).x());
      for (const auto &q : sm.metric_cache[t])
      {
        cap += q.sqrt_det * jac / 6.0;
      }
    }
    const double err = std::abs(cap - exact) / exact;
    CHECK(err < prev);
    prev = err;
    CHECK(certify(p).pass());
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("binding dofs are tagged")
{
  SurfaceMesh sm;
  const FemPair p = surface_pair(book("flat3.json"), 0.2, &sm);
  int bind = 0;
  for (const auto &d : p.dofs)
  {
    bind += d.tag == DofTag::Binding ? 1 : 0;
    if (d.tag == DofTag::Binding)
    {
      CHECK(sm.nodes[d.node].binding == 0);
    }
  }
  CHECK(bind == static_cast<int>(sm.binding_nodes[0].size()));
  CHECK(p.measure == doctest::Approx(3.0 * pi));
}

TEST_CASE("volume pair on a slab")
{
  const OpenBookSpec spec = book("unit_square.json");
  VolumeMeshOptions o;
  o.h = 0.1;
  o.layers = 4;
  const double eps = 0.05;
  const VolumeBuild vb = assemble_volume_mesh(spec, eps, o);
  const FemPair p = assemble_volume(vb.volume);
  CHECK(certify(p).pass());
  CHECK(p.measure == doctest::Approx(2.0 * eps));
  Eigen::VectorXd z(p.size());
  for (int i = 0; i < p.size(); ++i)
  {
    z[i] = vb.volume.nodes[i].z();
  }
  CHECK(bilinear(p.stiffness, z, z) == doctest::Approx(2.0 * eps));
  for (const auto &d : p.dofs)
  {
    CHECK(d.tag == DofTag::Volume);
  }
}

TEST_CASE("region-restricted volume assembly")
{
  const OpenBookSpec spec = book("flat3.json");
  VolumeMeshOptions o;
  o.h = 0.1;
  o.layers = 4;
  o.sleeve_intervals = 4;
  const VolumeBuild vb = assemble_volume_mesh(spec, 0.1, o);
  const FemPair all = assemble_volume(vb.volume);
  double parts = 0.0;
  for (int r = 0; r <= vb.volume.n_pages; ++r)
  {
    const FemPair pr = assemble_volume(vb.volume, r);
    CHECK(pr.size() == all.size());
    parts += pr.measure;
  }
  CHECK(parts == doctest::Approx(all.measure));
}

TEST_CASE("interval pair")
{
  std::vector<double> x(101);
  for (int i = 0; i <= 100; ++i)
  {
    x[i] = i / 100.0;
  }
  const FemPair p = assemble_interval(x);
  CHECK(p.measure == doctest::Approx(1.0));
  CHECK(certify(p).pass());
  CHECK_THROWS_AS(assemble_interval({0.0, 0.5, 0.5}), Error);
}

TEST_CASE("sparse kernels")
{
  std::vector<Triplet> t{{0, 0, 2.0}, {0, 1, -1.0}, {1, 0, -1.0}, {1, 1, 2.0}, {1, 1, 1.0}, {2, 2, 0.0}};
  const SparseSym a = sparse_from_triplets(3, t);
  CHECK(a.diagonal(1) == doctest::Approx(3.0));
  CHECK(a.nnz() == 4);
  CHECK(a.asymmetry == 0.0);
  CHECK(a.norm_inf() == doctest::Approx(4.0));

  const SparseSym skew = sparse_from_triplets(2, {{0, 1, 1.0}, {1, 0, 0.5}});
  CHECK(skew.asymmetry == doctest::Approx(0.5));

  const FemPair p = surface_pair(book("flat3.json"), 0.1);
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(p.size(), -1.0, 2.0), y1, y2;
  spmv(p.stiffness, x, y1);
  spmv_serial(p.stiffness, x, y2);
  CHECK((y1 - y2).norm() == 0.0);
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(p.size(), 5), Y1, Y2;
  spmm(p.mass, X, Y1);
  spmm_serial(p.mass, X, Y2);
  CHECK((Y1 - Y2).norm() == 0.0);
  CHECK((Y2 - p.mass.to_dense() * X).norm() < 1e-12 * Y2.norm());

  const auto path = (std::filesystem::temp_directory_path() / "openbook_mm_test.mtx").string();
  export_matrix_market(p.stiffness, path);
  const SparseSym back = read_matrix_market(path);
  CHECK(back.n == p.stiffness.n);
  CHECK(back.nnz() == p.stiffness.nnz());
  CHECK((back.to_dense() - p.stiffness.to_dense()).norm() < 1e-12 * p.stiffness.norm_inf());
  std::filesystem::remove(path);
}
