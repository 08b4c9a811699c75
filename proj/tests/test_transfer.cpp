// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "openbook/spec_io.hpp"
#include "openbook/stats.hpp"
#include "openbook/transfer.hpp"

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

VolumeBuild build(const char *name, double eps, int layers, double h = 0.1)
{
  VolumeMeshOptions o;
  o.h = h;
  o.layers = layers;
  o.sleeve_intervals = 4;
  return assemble_volume_mesh(book(name), eps, o);
}

Eigen::VectorXd nodal(const VolumeMesh &vm, const auto &f)
{
  Eigen::VectorXd u(vm.size());
  for (std::size_t i = 0; i < vm.size(); ++i)
  {
    u[i] = f(vm.nodes[i]);
  }
  return u;
}

}  // namespace

TEST_CASE("fiber averages of polynomials in z")
{
  const double eps = 0.1;
  const int layers = 16;
  const VolumeBuild vb = build("unit_square.json", eps, layers);
  const SparseMap N = build_N(vb.surface, vb.volume);
  const Eigen::VectorXd z = nodal(vb.volume, [](const Vec3 &x) { return x.z(); });
  const Eigen::VectorXd z2 = nodal(vb.volume, [](const Vec3 &x) { return x.z() * x.z(); });
  const Eigen::VectorXd nz = N.apply(z), nz2 = N.apply(z2);
  const double dz = 2.0 * eps / layers;
  // Trapezoid rule: exact mean eps^2/3 plus dz^2/6.
  for (int i = 0; i < N.rows; ++i)
  {
    CHECK(N.row_sum(i) == doctest::Approx(1.0));
    CHECK(std::abs(nz[i]) < 1e-14);
    CHECK(nz2[i] == doctest::Approx(eps * eps / 3.0 + dz * dz / 6.0).epsilon(1e-12));
  }
}

TEST_CASE("averaging and extension scale by sqrt(2 eps)")
{
  const double eps = 0.1;
  const VolumeBuild vb = build("flat3.json", eps, 4);
  const TransferOps ops = build_transfer(vb.surface, vb.volume);
  CHECK(ops.c_r == doctest::Approx(default_c_r(vb.volume)));
  CHECK(ops.c_r > 0.0);
  const double s = std::sqrt(2.0 * eps);
  int fiber = 0, blend = 0, binding = 0;
  for (int i = 0; i < ops.J.rows; ++i)
  {
    CHECK(ops.J.row_sum(i) == doctest::Approx(s).epsilon(1e-14));
    CHECK(ops.blend[i] >= 0.0);
    CHECK(ops.blend[i] <= 1.0);
    switch (ops.stencil[i])
    {
      case JStencil::Fiber:
        ++fiber;
        CHECK(ops.blend[i] == 0.0);
        break;
      case JStencil::Blend:
        ++blend;
        break;
      case JStencil::Binding:
        ++binding;
        CHECK(ops.blend[i] == 1.0);
        break;
    }
  }
  CHECK(fiber > 0);
  CHECK(blend > 0);
  CHECK(binding == static_cast<int>(vb.surface.binding_nodes[0].size()));

  const Eigen::VectorXd one_s = Eigen::VectorXd::Ones(vb.surface.size());
  const Eigen::VectorXd k1 = ops.K.apply(one_s);
  CHECK((k1.array() - 1.0 / s).abs().maxCoeff() < 1e-14);
  CHECK((ops.J.apply(k1).array() - 1.0).abs().maxCoeff() < 1e-14);
}

TEST_CASE("JK reproduces linear functions on fiber nodes")
{
  const VolumeBuild vb = build("flat3.json", 0.1, 4);
  const TransferOps ops = build_transfer(vb.surface, vb.volume);
  Eigen::VectorXd u(vb.surface.size());
  for (std::size_t i = 0; i < vb.surface.size(); ++i)
  {
    u[i] = 1.0 + 2.0 * vb.surface.nodes[i].x.x() - vb.surface.nodes[i].x.y();
  }
  const Eigen::VectorXd back = ops.J.apply(ops.K.apply(u));
  for (int i = 0; i < ops.J.rows; ++i)
  {
    if (ops.stencil[i] == JStencil::Fiber)
    {
      CHECK(back[i] == doctest::Approx(u[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("operators are linear")
{
  const VolumeBuild vb = build("flat3.json", 0.1, 4);
  const TransferOps ops = build_transfer(vb.surface, vb.volume);
  const Eigen::VectorXd a = Eigen::VectorXd::Random(vb.volume.size());
  const Eigen::VectorXd b = Eigen::VectorXd::Random(vb.volume.size());
  const Eigen::VectorXd lhs = ops.J.apply(Eigen::VectorXd(2.0 * a - 3.0 * b));
  const Eigen::VectorXd rhs = 2.0 * ops.J.apply(a) - 3.0 * ops.J.apply(b);
  CHECK((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
  Eigen::MatrixXd block(vb.volume.size(), 2);
  block << a, b;
  const Eigen::MatrixXd jb = ops.J.apply(block);
  CHECK((jb.col(0) - ops.J.apply(a)).norm() < 1e-14);
}

TEST_CASE("mollified cross-section average")
{
  const double eps = 0.1;
  const VolumeBuild vb = build("flat3.json", eps, 4);
  const double c_r = default_c_r(vb.volume);
  const SparseMap P = build_P(vb.volume, 0, c_r);
  const Vec3 grad(0.3, -1.0, 2.0);
  const Eigen::VectorXd u = nodal(vb.volume, [&](const Vec3 &x) { return grad.dot(x); });
  const Eigen::VectorXd pu = P.apply(u);
  int rows = 0;
  for (const auto &sec : vb.volume.sections[0])
  {
    const int i = sec.surface_node;
    REQUIRE_FALSE(P.row_empty(i));
    ++rows;
    CHECK(P.row_sum(i) == doctest::Approx(1.0));
    // Deviation of a linear function is at most its gradient times the radius.
    CHECK(std::abs(pu[i] - grad.dot(sec.center)) <= grad.norm() * c_r * eps);
  }
  CHECK(rows == static_cast<int>(vb.volume.sections[0].size()));
  CHECK(bump(0.0) == doctest::Approx(1.0));
  CHECK(bump(1.0) == 0.0);
  CHECK(bump(0.5) < 1.0);
}

TEST_CASE("fiber Poincare extremal mode")
{
  // sin(pi z / 2 eps) is the first nonconstant Neumann mode of [-eps, eps].
  const double eps = 0.1;
  const VolumeBuild vb = build("unit_square.json", eps, 16);
  const FemPair fat = assemble_volume(vb.volume);
  const Eigen::VectorXd u =
      nodal(vb.volume, [&](const Vec3 &x) { return std::sin(pi * x.z() / (2.0 * eps)); });
  const double l2 = bilinear(fat.mass, u, u), h1 = bilinear(fat.stiffness, u, u);
  const double ratio = l2 / (4.0 * eps * eps / (pi * pi) * h1);
  CHECK(ratio == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("poincare audit on a slab")
{
  const double eps = 0.1;
  const VolumeBuild vb = build("unit_square.json", eps, 8);
  const FemPair fat = assemble_volume(vb.volume);
  const TransferOps ops = build_transfer(vb.surface, vb.volume);
  SolverOpts so;
  so.n_eigs = 6;
  so.precond = Preconditioner::Factorized;
  const EigenResult eig = solve_lowest(fat, so);
  PoincareOptions po;
  po.random_functions = 20;
  const AuditReport rep = audit_poincare(vb.volume, fat, ops, eig, po);
  CHECK(rep.pass());
  int fiber = 0;
  for (const auto &r : rep.records)
  {
    fiber += r.inequality == audit_names::fiber_poincare ? 1 : 0;
    CHECK(std::isfinite(r.ratio));
  }
  CHECK(fiber >= 26);
}

TEST_CASE("shortening map")
{
  const double a = 1.0, a_m = 2.0, eps = 0.1;
  const ShorteningMap phi = shortening_map(a, a_m, eps);
  CHECK(phi(0.0) == doctest::Approx(a_m * eps));
  CHECK(phi(a) == doctest::Approx(a));
  CHECK(phi.derivative(0.0) == doctest::Approx(1.0));
  CHECK(phi.derivative(a) == doctest::Approx(1.0));
  const ShorteningSamples s = sample_shortening(phi);
  CHECK(s.min_slope > 0.0);
  CHECK(s.max_shift == doctest::Approx(a_m * eps));
  // Slope deviation is O(eps): shift a_m eps spread by the bump over length a.
  CHECK(s.max_slope_dev < 4.0 * a_m * eps / a);
  const ShorteningSamples half = sample_shortening(shortening_map(a, a_m, eps / 2));
  CHECK(half.max_slope_dev == doctest::Approx(s.max_slope_dev / 2).epsilon(1e-9));
  CHECK_THROWS_AS(shortening_map(0.1, a_m, eps), Error);
}

TEST_CASE("metric perturbation")
{
  ParamChart flat;
  flat.domain = {0.0, 1.0, 0.0, 1.0, false};
  const MetricSample f = metric_perturbation(flat, 0.1);
  CHECK(f.exact == 0.0);
  CHECK(f.stated == 0.0);

  ParamChart sphere;
  sphere.kind = ChartKind::SphericalCap;
  sphere.radius = 1.0;
  sphere.domain = {0.0, 2.0 * pi, 0.0, pi / 2, true};
  ParamChart cyl;
  cyl.kind = ChartKind::CylinderSegment;
  cyl.radius = 1.0;
  cyl.domain = {0.0, pi, 0.0, 1.0, false};
  for (const ParamChart &c : {sphere, cyl})
  {
    std::vector<std::pair<double, double>> exact, stated;
    for (double eps : {0.1, 0.05, 0.025, 0.0125})
    {
      const MetricSample s = metric_perturbation(c, eps);
      exact.emplace_back(eps, s.exact);
      stated.emplace_back(eps, s.stated);
    }
    CHECK(fit_rate(exact).slope == doctest::Approx(1.0).epsilon(0.1));
    CHECK(fit_rate(stated).slope == doctest::Approx(1.0).epsilon(0.1));
  }
  // Cylinder: u2 is the axial direction, so only the (0, 0) entry moves.
  const MetricSample c = metric_perturbation(cyl, 0.05);
  CHECK(c.exact_entries(0, 0) > 0.0);
  CHECK(c.exact_entries(1, 1) <= 1e-12);
  CHECK(c.exact_entries(0, 1) <= 1e-12);
  CHECK(c.stated_entries(1, 1) <= 1e-12);
  // On the unit sphere the offset metric is (1 + z)^2 g, so B = (1 - (1 + z)^-2) I.
  const double eps = 0.01;
  const MetricSample s = metric_perturbation(sphere, eps);
  const double worst = 1.0 / ((1.0 - eps) * (1.0 - eps)) - 1.0;
  CHECK(s.exact == doctest::Approx(std::sqrt(2.0) * worst).epsilon(1e-9));
  CHECK(s.exact_entries(0, 0) == doctest::Approx(worst).epsilon(1e-9));
  CHECK(std::abs(s.exact_entries(0, 1)) < 1e-12);
}

TEST_CASE("transfer audit on the flat book")
{
  const double eps = 0.1;
  const VolumeBuild vb = build("flat3.json", eps, 8, 0.1);
  SurfaceMesh sm = vb.surface;
  compute_metric_cache(book("flat3.json"), sm);
  const FemPair limit = assemble_surface(sm), fat = assemble_volume(vb.volume);
  SolverOpts so;
  so.n_eigs = 9;
  so.precond = Preconditioner::Factorized;
  const EigenResult el = solve_lowest(limit, so), ef = solve_lowest(fat, so);
  const TransferOps ops = build_transfer(sm, vb.volume);
  const AuditReport rep = audit_transfer(limit, fat, ops, el, ef);
  CHECK(rep.pass());
  int rayleigh = 0;
  for (const auto &r : rep.records)
  {
    if (r.inequality == audit_names::j_rayleigh || r.inequality == audit_names::k_rayleigh)
    {
      ++rayleigh;
      CHECK(r.bound == doctest::Approx(1.0 + 3.0 * std::sqrt(eps)));
      CHECK(r.ratio <= r.bound);
    }
  }
  CHECK(rayleigh > 0);

  const AuditReport small = audit_binding_smallness(vb.volume, fat, ef);
  for (const auto &r : small.records)
  {
    CHECK(r.ratio >= 0.0);
    CHECK(r.ratio < 1.0);
  }
}

TEST_CASE("sweep decrease and slope fits")
{
  AuditReport sweep;
  for (double eps : {0.2, 0.1, 0.05})
  {
    AuditRecord r;
    r.inequality = "demo";
    r.index = 0;
    r.eps = eps;
    r.ratio = 3.0 * eps;
    sweep.records.push_back(r);
    r.index = 1;
    r.ratio = eps == 0.1 ? 0.5 : 0.1;
    sweep.records.push_back(r);
  }
  check_sweep_decrease(sweep, {"demo"});
  fit_audit_slopes(sweep, {{"demo", 0.9, 1.1}});
  int decrease = 0;
  for (const auto &r : sweep.records)
  {
    if (r.inequality == "demo-decrease")
    {
      ++decrease;
      CHECK(r.pass == (r.index == 0));
    }
  }
  CHECK(decrease == 2);
  REQUIRE(sweep.slopes.size() == 2);
  CHECK(sweep.slopes[0].slope == doctest::Approx(1.0));
  CHECK(sweep.slopes[0].pass);
  CHECK_FALSE(sweep.slopes[1].pass);
  CHECK_FALSE(sweep.pass());
}
