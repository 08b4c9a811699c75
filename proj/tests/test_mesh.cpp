// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

#include "fixtures.hpp"
#include "openbook/mesh.hpp"
#include "openbook/spec_io.hpp"

using namespace openbook;

namespace
{

OpenBookSpec book(const char *name)
{
  OpenBookSpec spec = load_spec(fixture(name));
  spec.finalize();
  return spec;
}

double triangle_area(const SurfaceMesh &sm, const SurfaceTriangle &t)
{
  const Vec3 &a = sm.nodes[t.v[0]].x, &b = sm.nodes[t.v[1]].x, &c = sm.nodes[t.v[2]].x;
  return 0.5 * (b - a).cross(c - a).norm();
}

}  // namespace

TEST_CASE("unit square triangulation")
{
  const OpenBookSpec spec = book("unit_square.json");
  SurfaceMeshOptions o;
  o.h = 0.1;
  const SurfaceMesh sm = triangulate_pages(spec, o);
  double area = 0.0;
  for (const auto &t : sm.triangles)
  {
    const double a = triangle_area(sm, t);
    CHECK(a > 0.0);
    area += a;
  }
  CHECK(area == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(euler_characteristic(sm, 0) == 1);

  o.refine = 1;
  const SurfaceMesh fine = triangulate_pages(spec, o);
  CHECK(fine.triangles.size() == 4 * sm.triangles.size());
}

TEST_CASE("book pages are disks and share binding nodes")
{
  const OpenBookSpec spec = book("disk_hemispheres.json");
  SurfaceMeshOptions o;
  o.h = 0.2;
  SurfaceMesh sm = triangulate_pages(spec, o);
  for (int k = 0; k < 3; ++k)
  {
    CHECK(euler_characteristic(sm, k) == 1);
  }
  REQUIRE(sm.binding_nodes.size() == 1);
  const auto &ring = sm.binding_nodes[0];
  CHECK(ring.size() == static_cast<std::size_t>(sm.stations[0]));
  CHECK(std::set<int>(ring.begin(), ring.end()).size() == ring.size());
  for (int id : ring)
  {
    CHECK(sm.nodes[id].binding == 0);
    CHECK(std::abs(sm.nodes[id].x.norm() - 1.0) < 1e-12);
  }
  // Every page touches every binding node.
  std::vector<std::set<int>> pages_at(sm.size());
  for (const auto &t : sm.triangles)
  {
    for (int v : t.v)
    {
      pages_at[v].insert(t.page);
    }
  }
  for (int id : ring)
  {
    CHECK(pages_at[id].size() == 3);
  }
  compute_metric_cache(spec, sm);
  CHECK(sm.metric_cache.size() == sm.triangles.size());
}

TEST_CASE("sleeve rows stay within the sleeve width")
{
  const OpenBookSpec spec = book("flat3.json");
  SurfaceMeshOptions o;
  o.h = 0.1;
  o.eps = 0.1;
  o.sleeve_intervals = 4;
  const SurfaceMesh sm = triangulate_pages(spec, o);
  const double width = spec.sleeve_widths[0] * 0.1;
  int sleeve = 0;
  for (const auto &n : sm.nodes)
  {
    if (n.sleeve_binding >= 0)
    {
      ++sleeve;
      CHECK(n.sleeve_distance <= width * (1.0 + 1e-12));
    }
  }
  CHECK(sleeve > 0);
}

TEST_CASE("split prism is conforming and fills the prism")
{
  const std::array<int, 6> v{3, 0, 5, 1, 4, 2};
  const auto tets = split_prism(v);
  std::vector<Vec3> x(6);
  x[3] = Vec3(0, 0, 0);
  x[0] = Vec3(1, 0, 0);
  x[5] = Vec3(0, 1, 0);
  x[1] = Vec3(0, 0, 1);
  x[4] = Vec3(1, 0, 1);
  x[2] = Vec3(0, 1, 1);
  double vol = 0.0;
  for (const auto &t : tets)
  {
    vol += std::abs(tet_signed_volume(x[t[0]], x[t[1]], x[t[2]], x[t[3]]));
  }
  CHECK(vol == doctest::Approx(0.5));
}

TEST_CASE("cross-section certificates")
{
  const OpenBookSpec spec = book("flat3.json");
  const double eps = 0.1;
  CrossSectionOptions o;
  o.sleeve_intervals = 4;
  o.tau_levels = 2;
  const CrossSection cs = cross_section(spec, 0, 1.0, eps, o);
  CHECK(cs.traces.size() == 3);
  CHECK(cs.sectors.size() == 3);
  CHECK(cs.area > 0.0);
  CHECK(cs.inscribed_factor > 0.0);
  CHECK(cs.circumscribed_factor < 3.0);
  double lumped = 0.0;
  for (double a : cs.node_area)
  {
    lumped += a;
  }
  CHECK(lumped == doctest::Approx(cs.area));
  CHECK(section_contains(cs, Vec2::Zero()));
  CHECK_FALSE(section_contains(cs, Vec2(10 * eps, 10 * eps)));
  for (int s = 0; s < 3; ++s)
  {
    const FoliationMap f = sector_foliation(cs, s);
    CHECK(f.segment_property);
    CHECK(f.max_length_factor > 0.0);
    CHECK(f.max_length_factor < 4.0);
  }
}

TEST_CASE("flat slab volume mesh")
{
  const OpenBookSpec spec = book("unit_square.json");
  VolumeMeshOptions o;
  o.h = 0.1;
  o.layers = 4;
  const double eps = 0.05;
  const VolumeBuild vb = assemble_volume_mesh(spec, eps, o);
  const VolumeMesh &vm = vb.volume;
  CHECK(mesh_volume(vm) == doctest::Approx(2.0 * eps).epsilon(1e-12));
  CHECK(check_watertight(vm).pass());
  CHECK(vm.size() == vb.surface.size() * 5);
  for (std::size_t i = 0; i < vb.surface.size(); ++i)
  {
    REQUIRE(vm.fiber_columns[i].size() == 5);
    const Vec3 &lo = vm.nodes[vm.fiber_columns[i].front()];
    const Vec3 &hi = vm.nodes[vm.fiber_columns[i].back()];
    CHECK((hi - lo).norm() == doctest::Approx(2.0 * eps));
  }
}

TEST_CASE("flat book volume mesh")
{
  const OpenBookSpec spec = book("flat3.json");
  VolumeMeshOptions o;
  o.h = 0.1;
  o.layers = 4;
  o.sleeve_intervals = 4;
  const double eps = 0.1;
  const VolumeBuild vb = assemble_volume_mesh(spec, eps, o);
  const VolumeMesh &vm = vb.volume;
  const WatertightReport wt = check_watertight(vm);
  CHECK(wt.pass());
  CHECK(wt.boundary_faces > 0);
  CHECK(count_page_overlaps(vm) == 0);
  for (const auto &t : vm.tets)
  {
    CHECK(tet_signed_volume(vm.nodes[t[0]], vm.nodes[t[1]], vm.nodes[t[2]], vm.nodes[t[3]]) > 0.0);
  }
  double parts = 0.0;
  for (int r = 0; r < vm.n_pages + 1; ++r)
  {
    parts += mesh_volume(vm, r);
  }
  CHECK(parts == doctest::Approx(mesh_volume(vm)));
  // Page slabs alone: 3 pages of l x (a - a_m eps) x 2 eps.
  const double pages = mesh_volume(vm, 0) + mesh_volume(vm, 1) + mesh_volume(vm, 2);
  const double a_m = spec.sleeve_widths[0];
  CHECK(pages <= 3.0 * std::numbers::pi * 1.0 * 2.0 * eps);
  CHECK(pages >= 3.0 * std::numbers::pi * (1.0 - a_m * eps) * 2.0 * eps * (1.0 - 1e-9));
  CHECK(vm.min_inscribed_factor > 0.0);
  for (int f : vm.foot)
  {
    CHECK(f >= 0);
  }
  REQUIRE(vm.sections.size() == 1);
  CHECK(vm.sections[0].size() == static_cast<std::size_t>(vm.stations[0] + 1));
}

TEST_CASE("closed binding volume mesh")
{
  const OpenBookSpec spec = book("disk_hemispheres.json");
  VolumeMeshOptions o;
  o.h = 0.1;
  o.layers = 4;
  const VolumeBuild vb = assemble_volume_mesh(spec, 0.1, o);
  CHECK(check_watertight(vb.volume).pass());
  CHECK(count_page_overlaps(vb.volume) == 0);
  CHECK(vb.volume.sections[0].size() == static_cast<std::size_t>(vb.volume.stations[0]));
}

TEST_CASE("vtk export round trip")
{
  const OpenBookSpec spec = book("flat3.json");
  VolumeMeshOptions o;
  o.h = 0.1;
  o.layers = 4;
  const VolumeBuild vb = assemble_volume_mesh(spec, 0.1, o);
  const auto dir = std::filesystem::temp_directory_path() / "openbook_vtk_test";
  std::filesystem::create_directories(dir);
  const std::string vpath = (dir / "v.vtk").string(), spath = (dir / "s.vtk").string();
  export_vtk(vb.volume, vpath);
  export_vtk(vb.surface, spath);
  const VtkSummary v = read_vtk_summary(vpath);
  CHECK(v.points == vb.volume.size());
  CHECK(v.cells == vb.volume.tets.size());
  CHECK(std::set<int>(v.cell_types.begin(), v.cell_types.end()) == std::set<int>{10});
  CHECK(v.cell_data.size() == v.cells);
  const VtkSummary s = read_vtk_summary(spath);
  CHECK(s.cells == vb.surface.triangles.size());
  CHECK(std::set<int>(s.cell_types.begin(), s.cell_types.end()) == std::set<int>{5});

  const VtkSummary page = [&] {
    export_vtk(vb.volume, vpath, 1);
    return read_vtk_summary(vpath);
  }();
  std::size_t in_page = 0;
  for (int r : vb.volume.regions)
  {
    in_page += r == 1 ? 1 : 0;
  }
  CHECK(page.cells == in_page);
  std::filesystem::remove_all(dir);
}
