// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include "openbook/mesh.hpp"

namespace openbook
{

double tet_signed_volume(const Vec3 &a, const Vec3 &b, const Vec3 &c, const Vec3 &d)
{
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

std::array<std::array<int, 4>, 3> split_prism(const std::array<int, 6> &v)
{
  // Reorder so the smallest index sits at position 0 using the prism symmetries.
  const int pmin = static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
  std::array<int, 6> w;
  const int rot = pmin % 3;
  const bool flip = pmin >= 3;
  for (int i = 0; i < 3; ++i)
  {
    const int bottom = (rot + i) % 3;
    w[i] = flip ? v[3 + bottom] : v[bottom];
    w[3 + i] = flip ? v[bottom] : v[3 + bottom];
  }
  // Diagonal of the quad face (w1, w2, w5, w4) through its smallest vertex.
  if (std::min(w[1], w[5]) < std::min(w[2], w[4]))
  {
    return {{{w[0], w[1], w[2], w[5]}, {w[0], w[1], w[5], w[4]}, {w[0], w[4], w[5], w[3]}}};
  }
  return {{{w[0], w[1], w[2], w[4]}, {w[0], w[4], w[2], w[5]}, {w[0], w[4], w[5], w[3]}}};
}

SurfaceMeshOptions surface_options_for(const VolumeMeshOptions &opts, double eps)
{
  SurfaceMeshOptions s;
  s.h = opts.h;
  s.eps = eps;
  s.sleeve_intervals = opts.sleeve_intervals;
  s.grading = opts.grading;
  s.refine = opts.refine;
  s.min_closed_stations = opts.min_closed_stations;
  return s;
}

namespace
{

struct Builder
{
  VolumeMesh &vm;

  int add_node(const Vec3 &x, int foot)
  {
    vm.nodes.push_back(x);
    vm.foot.push_back(foot);
    return static_cast<int>(vm.nodes.size()) - 1;
  }

  void add_tet(std::array<int, 4> t, int region)
  {
    const Vec3 &a = vm.nodes[t[0]], &b = vm.nodes[t[1]], &c = vm.nodes[t[2]], &d = vm.nodes[t[3]];
    double vol = tet_signed_volume(a, b, c, d);
    const double edge = std::max({(b - a).norm(), (c - a).norm(), (d - a).norm(), (c - b).norm(),
                                  (d - b).norm(), (d - c).norm()});
    if (std::abs(vol) <= 1e-12 * edge * edge * edge)
    {
      std::ostringstream os;
      os << "degenerate tetrahedron " << vm.tets.size() << " in region " << region
         << " (volume " << vol << "); fibers cross or eps is too large for the local geometry";
      fail(ErrorKind::Geometry, os.str());
    }
    if (vol < 0.0)
    {
      std::swap(t[2], t[3]);
    }
    vm.tets.push_back(t);
    vm.regions.push_back(region);
  }

  void add_prism(const std::array<int, 6> &p, int region)
  {
    for (const auto &t : split_prism(p))
    {
      add_tet(t, region);
    }
  }
};

}  // namespace

VolumeBuild assemble_volume_mesh(const OpenBookSpec &spec_in, double eps,
                                 const VolumeMeshOptions &opts)
{
  if (!(eps > 0.0))
  {
    fail(ErrorKind::Config, "eps must be positive");
  }
  if (opts.layers < 2 || opts.layers % 2 != 0)
  {
    fail(ErrorKind::Config, "layers must be an even count >= 2");
  }
  OpenBookSpec spec = spec_in;
  spec.finalize();
  const Epsilon0Report e0 = epsilon0_report(spec);
  if (eps > e0.epsilon0 * (1.0 + 1e-12))
  {
    std::ostringstream os;
    os << "eps = " << eps << " exceeds epsilon0 = " << e0.epsilon0 << " (fattening error)";
    fail(ErrorKind::Geometry, os.str());
  }

  VolumeBuild out;
  out.surface = triangulate_pages(spec, surface_options_for(opts, eps));
  const SurfaceMesh &sm = out.surface;
  VolumeMesh &vm = out.volume;
  const int np = static_cast<int>(spec.pages.size());
  const int nb = static_cast<int>(spec.bindings.size());
  const int L = opts.layers << opts.refine;
  const int n_tau = L / 2;
  const int n_s = sm.sleeve_intervals;
  vm.eps = eps;
  vm.layers = L;
  vm.sleeve_intervals = n_s;
  vm.n_pages = np;
  vm.fiber_columns.assign(sm.size(), {});
  vm.surface_to_volume.assign(sm.size(), -1);
  vm.stations = sm.stations;
  Builder b{vm};

  // Page slabs: fiber columns over every node of the slab rows.
  for (int k = 0; k < np; ++k)
  {
    const ParamChart &chart = spec.pages[k];
    const PageGrid &g = sm.grids[k];
    for (std::size_t i = 0; i < g.ids.size(); ++i)
    {
      for (int j = g.slab_lo; j <= g.slab_hi; ++j)
      {
        const int id = g.ids[i][j];
        if (!vm.fiber_columns[id].empty())
        {
          continue;
        }
        const SurfaceNode &sn = sm.nodes[id];
        const Vec3 n = page_normal(chart, sn.y);
        std::vector<int> col(L + 1);
        for (int l = 0; l <= L; ++l)
        {
          const double z = l == n_tau ? 0.0 : -eps + 2.0 * eps * l / L;
          col[l] = b.add_node(sn.x + z * n, id);
        }
        vm.surface_to_volume[id] = col[n_tau];
        vm.fiber_columns[id] = std::move(col);
      }
    }
  }
  for (const auto &tri : sm.triangles)
  {
    const auto &v = tri.v;
    if (v[0] == v[1] || v[1] == v[2] || v[0] == v[2])
    {
      continue;
    }
    const auto &ca = vm.fiber_columns[v[0]], &cb = vm.fiber_columns[v[1]],
               &cc = vm.fiber_columns[v[2]];
    if (ca.empty() || cb.empty() || cc.empty())
    {
      continue;
    }
    for (int l = 0; l < L; ++l)
    {
      b.add_prism({ca[l], cb[l], cc[l], ca[l + 1], cb[l + 1], cc[l + 1]}, tri.page);
    }
  }

  // Surface node of a page grid at a binding station and sleeve row.
  auto trace_node = [&](const IncidenceEntry &e, int m, int station, int row) {
    const PageGrid &g = sm.grids[e.page];
    const int n_u1 = static_cast<int>(g.ids.size()) - 1;
    int i = e.reversed ? n_u1 - station : station;
    if (g.periodic)
    {
      i = ((i % n_u1) + n_u1) % n_u1;
    }
    const int rows = static_cast<int>(g.distance.size());
    const int j = e.side == Side::U2Min ? row : rows - 1 - row;
    (void)m;
    return g.ids.at(i).at(j);
  };
  auto ensure_surface_volume_node = [&](int sid) {
    if (vm.surface_to_volume[sid] < 0)
    {
      vm.surface_to_volume[sid] = b.add_node(sm.nodes[sid].x, sid);
    }
    return vm.surface_to_volume[sid];
  };

  std::map<std::array<int, 2>, std::vector<int>> gamma;
  vm.sections.resize(nb);
  vm.min_inscribed_factor = std::numeric_limits<double>::infinity();
  vm.max_circumscribed_factor = 0.0;
  for (int m = 0; m < nb; ++m)
  {
    const BindingCurve &curve = spec.bindings[m];
    const int n = sm.stations[m];
    const int count = curve.closed() ? n : n + 1;
    const IncidenceEntry &first = spec.incidence(m).entries.at(0);
    const PageGrid &g0 = sm.grids[first.page];
    CrossSectionOptions co;
    co.sleeve_intervals = n_s;
    co.tau_levels = n_tau;
    for (int r = 0; r <= n_s; ++r)
    {
      co.rows.push_back(first.side == Side::U2Min ? g0.distance[r]
                                                  : g0.distance.back() - g0.distance[g0.distance.size() - 1 - r]);
    }

    std::vector<std::vector<int>> local_to_global(count);
    std::size_t n_local = 0, n_tris = 0;
    std::vector<std::array<int, 3>> tris;
    for (int i = 0; i < count; ++i)
    {
      const double t = curve.length() * i / n;
      const CrossSection cs = cross_section(spec, m, t, eps, co);
      if (i == 0)
      {
        for (const auto &sec : cs.sectors)
        {
          co.diagonals.push_back(sec.diagonals);
          co.arc_segments.push_back(sec.arc_segments);
        }
        for (const auto &tr : cs.traces)
        {
          co.order.emplace_back(tr.entry.page, tr.entry.side);
        }
        n_local = cs.nodes.size();
        n_tris = cs.triangles.size();
        tris = cs.triangles;
      }
      else if (cs.nodes.size() != n_local || cs.triangles.size() != n_tris)
      {
        std::ostringstream os;
        os << "binding " << m << ": cross-section topology changes at station " << i;
        fail(ErrorKind::Mesh, os.str());
      }
      vm.min_inscribed_factor = std::min(vm.min_inscribed_factor, cs.inscribed_factor);
      vm.max_circumscribed_factor = std::max(vm.max_circumscribed_factor, cs.circumscribed_factor);

      // Distance of the curved traces from the straight in-plane slabs.
      for (const auto &tr : cs.traces)
      {
        const Vec3 d = (tr.points.back() - tr.points.front()).normalized();
        for (const auto &x : tr.points)
        {
          const Vec3 r = x - cs.center;
          vm.section_discrepancy = std::max(vm.section_discrepancy, (r - r.dot(d) * d).norm());
        }
      }

      // Map local nodes onto the global mesh.
      StationSection st;
      st.binding = m;
      st.station = i;
      st.center = cs.center;
      st.surface_node = sm.binding_nodes[m][i];
      st.inscribed_factor = cs.inscribed_factor;
      st.circumscribed_factor = cs.circumscribed_factor;
      auto &l2g = local_to_global[i];
      l2g.assign(cs.nodes.size(), -1);
      const double tol = 1e-9 * std::max(1.0, cs.center.norm());
      for (std::size_t a = 0; a < cs.nodes.size(); ++a)
      {
        const SectionNode &node = cs.nodes[a];
        int gid = -1;
        switch (node.kind)
        {
          case SectionNodeKind::Binding:
            gid = ensure_surface_volume_node(sm.binding_nodes[m][i]);
            break;
          case SectionNodeKind::Trace:
          {
            const int sid = trace_node(cs.traces[node.trace].entry, m, i, node.row);
            gid = ensure_surface_volume_node(sid);
            break;
          }
          case SectionNodeKind::Column:
          {
            const IncidenceEntry &e = cs.traces[node.trace].entry;
            const int sid = trace_node(e, m, i, n_s);
            const auto &col = vm.fiber_columns[sid];
            if (col.empty())
            {
              fail(ErrorKind::Mesh, "missing fiber column on Gamma(page " + std::to_string(e.page) +
                                        ", binding " + std::to_string(m) + ")");
            }
            gid = col[n_tau + node.side * node.row];
            gamma[{e.page, m}].push_back(gid);
            break;
          }
          case SectionNodeKind::Interior:
            gid = b.add_node(node.x, -1);
            break;
        }
        if (node.kind != SectionNodeKind::Interior && (vm.nodes[gid] - node.x).norm() > tol)
        {
          std::ostringstream os;
          os << "node identification failed on Gamma(page "
             << (node.trace >= 0 ? cs.traces[node.trace].entry.page : -1) << ", binding " << m
             << ") at station " << i << ": gap " << (vm.nodes[gid] - node.x).norm();
          fail(ErrorKind::Mesh, os.str());
        }
        l2g[a] = gid;
      }

      // Foot points follow the sigma lines; foliation lines feed the averages.
      for (std::size_t s = 0; s < cs.sectors.size(); ++s)
      {
        const Sector &sec = cs.sectors[s];
        for (std::size_t r = 0; r < sec.grid.size(); ++r)
        {
          const int foot_vol = l2g[sec.grid[r][0]];
          const int foot = vm.foot[foot_vol];
          FoliationLine line;
          line.surface_node = foot;
          line.sector = static_cast<int>(s);
          for (int idx : sec.grid[r])
          {
            const int gid = l2g[idx];
            if (vm.foot[gid] < 0)
            {
              vm.foot[gid] = foot;
            }
            line.nodes.push_back(gid);
          }
          st.lines.push_back(std::move(line));
        }
      }
      for (std::size_t a = 0; a < cs.nodes.size(); ++a)
      {
        st.nodes.push_back(l2g[a]);
        st.zeta.push_back(cs.nodes[a].zeta);
        st.area.push_back(cs.node_area[a]);
      }
      vm.sections[m].push_back(std::move(st));
    }

    // Prisms between consecutive stations.
    const int segments = curve.closed() ? n : n;
    for (int i = 0; i < segments; ++i)
    {
      const auto &l0 = local_to_global[i];
      const auto &l1 = local_to_global[(i + 1) % count];
      for (const auto &tri : tris)
      {
        b.add_prism({l0[tri[0]], l0[tri[1]], l0[tri[2]], l1[tri[0]], l1[tri[1]], l1[tri[2]]},
                    vm.region_of_binding(m));
      }
    }
  }
  for (auto &[key, ids] : gamma)
  {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    vm.gamma.emplace_back(key, std::move(ids));
  }
  if (nb == 0)
  {
    vm.min_inscribed_factor = 0.0;
  }

  // Every volume node must have a foot for the extension operator.
  for (std::size_t i = 0; i < vm.foot.size(); ++i)
  {
    if (vm.foot[i] < 0)
    {
      fail(ErrorKind::Mesh, "volume node " + std::to_string(i) + " has no foliation foot point");
    }
  }

  const WatertightReport wt = check_watertight(vm);
  if (!wt.pass())
  {
    std::ostringstream os;
    os << "volume mesh is not watertight: " << wt.nonmanifold_faces << " non-manifold faces, "
       << wt.open_edges << " open boundary edges";
    fail(ErrorKind::Mesh, os.str());
  }
  if (opts.check_overlap)
  {
    const std::size_t overlaps = count_page_overlaps(vm);
    if (overlaps > 0)
    {
      fail(ErrorKind::Geometry, "fattened pages intersect (" + std::to_string(overlaps) +
                                    " overlapping tetrahedron pairs)");
    }
  }
  return out;
}

double mesh_volume(const VolumeMesh &mesh, int region)
{
  double v = 0.0;
  for (std::size_t t = 0; t < mesh.tets.size(); ++t)
  {
    if (region >= 0 && mesh.regions[t] != region)
    {
      continue;
    }
    const auto &c = mesh.tets[t];
    v += tet_signed_volume(mesh.nodes[c[0]], mesh.nodes[c[1]], mesh.nodes[c[2]], mesh.nodes[c[3]]);
  }
  return v;
}

namespace
{

struct ArrayHash
{
  template <std::size_t N>
  std::size_t operator()(const std::array<int, N> &a) const
  {
    std::size_t h = 1469598103934665603ull;
    for (int x : a)
    {
      h ^= static_cast<std::size_t>(x) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
  }
};

}  // namespace

WatertightReport check_watertight(const VolumeMesh &mesh)
{
  std::unordered_map<std::array<int, 3>, int, ArrayHash> faces;
  faces.reserve(mesh.tets.size() * 4);
  static constexpr int fidx[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
  for (const auto &t : mesh.tets)
  {
    for (const auto &f : fidx)
    {
      std::array<int, 3> key = {t[f[0]], t[f[1]], t[f[2]]};
      std::sort(key.begin(), key.end());
      ++faces[key];
    }
  }
  WatertightReport r;
  std::unordered_map<std::array<int, 2>, int, ArrayHash> edges;
  for (const auto &[key, count] : faces)
  {
    if (count > 2)
    {
      ++r.nonmanifold_faces;
    }
    else if (count == 1)
    {
      ++r.boundary_faces;
      for (int i = 0; i < 3; ++i)
      {
        std::array<int, 2> e = {key[i], key[(i + 1) % 3]};
        std::sort(e.begin(), e.end());
        ++edges[e];
      }
    }
  }
  for (const auto &[e, count] : edges)
  {
    if (count % 2 != 0)
    {
      ++r.open_edges;
    }
  }
  return r;
}

namespace
{

using Tet = std::array<Vec3, 4>;

// Separating-axis test; true when the interiors overlap by more than tol.
bool tets_overlap(const Tet &a, const Tet &b, double tol)
{
  std::vector<Vec3> axes;
  auto add_faces = [&](const Tet &t) {
    static constexpr int f[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
    for (const auto &face : f)
    {
      axes.push_back((t[face[1]] - t[face[0]]).cross(t[face[2]] - t[face[0]]));
    }
  };
  add_faces(a);
  add_faces(b);
  static constexpr int e[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  for (const auto &ea : e)
  {
    for (const auto &eb : e)
    {
      axes.push_back((a[ea[1]] - a[ea[0]]).cross(b[eb[1]] - b[eb[0]]));
    }
  }
  for (const Vec3 &ax : axes)
  {
    const double len = ax.norm();
    if (len < 1e-300)
    {
      continue;
    }
    const Vec3 n = ax / len;
    double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
    for (int i = 0; i < 4; ++i)
    {
      const double pa = n.dot(a[i]), pb = n.dot(b[i]);
      amin = std::min(amin, pa);
      amax = std::max(amax, pa);
      bmin = std::min(bmin, pb);
      bmax = std::max(bmax, pb);
    }
    if (amax <= bmin + tol || bmax <= amin + tol)
    {
      return false;
    }
  }
  return true;
}

}  // namespace

std::size_t count_page_overlaps(const VolumeMesh &mesh)
{
  std::vector<std::size_t> page_tets;
  for (std::size_t t = 0; t < mesh.tets.size(); ++t)
  {
    if (mesh.regions[t] < mesh.n_pages)
    {
      page_tets.push_back(t);
    }
  }
  if (page_tets.empty() || mesh.n_pages < 2)
  {
    return 0;
  }
  // Uniform grid over tet bounding boxes.
  Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
  double mean_size = 0.0;
  std::vector<std::pair<Vec3, Vec3>> boxes(page_tets.size());
  for (std::size_t i = 0; i < page_tets.size(); ++i)
  {
    Vec3 a = Vec3::Constant(1e300), c = Vec3::Constant(-1e300);
    for (int v : mesh.tets[page_tets[i]])
    {
      a = a.cwiseMin(mesh.nodes[v]);
      c = c.cwiseMax(mesh.nodes[v]);
    }
    boxes[i] = {a, c};
    lo = lo.cwiseMin(a);
    hi = hi.cwiseMax(c);
    mean_size += (c - a).maxCoeff();
  }
  mean_size /= static_cast<double>(page_tets.size());
  const double cell = std::max(mean_size, 1e-12);
  const Eigen::Vector3i dims = (((hi - lo) / cell).array().floor().cast<int>() + 1).matrix();
  auto cell_of = [&](const Vec3 &p) {
    Eigen::Vector3i c = ((p - lo) / cell).array().floor().cast<int>().matrix();
    return c.cwiseMax(Eigen::Vector3i::Zero()).cwiseMin(dims - Eigen::Vector3i::Ones());
  };
  std::unordered_map<long long, std::vector<std::size_t>> grid;
  auto key = [&](int x, int y, int z) {
    return (static_cast<long long>(x) * dims[1] + y) * dims[2] + z;
  };
  for (std::size_t i = 0; i < boxes.size(); ++i)
  {
    const auto c0 = cell_of(boxes[i].first), c1 = cell_of(boxes[i].second);
    for (int x = c0[0]; x <= c1[0]; ++x)
    {
      for (int y = c0[1]; y <= c1[1]; ++y)
      {
        for (int z = c0[2]; z <= c1[2]; ++z)
        {
          grid[key(x, y, z)].push_back(i);
        }
      }
    }
  }
  std::size_t count = 0;
  const double tol = 1e-9 * cell;
  for (const auto &[k, list] : grid)
  {
    for (std::size_t a = 0; a < list.size(); ++a)
    {
      for (std::size_t bidx = a + 1; bidx < list.size(); ++bidx)
      {
        const std::size_t i = list[a], j = list[bidx];
        const int ra = mesh.regions[page_tets[i]], rb = mesh.regions[page_tets[j]];
        if (ra == rb)
        {
          continue;
        }
        const auto &ba = boxes[i], &bb = boxes[j];
        if ((ba.second.array() < bb.first.array()).any() ||
            (bb.second.array() < ba.first.array()).any())
        {
          continue;
        }
        // Count each pair once: only in the cell holding the overlap-box corner.
        const Vec3 corner = ba.first.cwiseMax(bb.first);
        const auto cc = cell_of(corner);
        if (key(cc[0], cc[1], cc[2]) != k)
        {
          continue;
        }
        Tet ta, tb;
        for (int v = 0; v < 4; ++v)
        {
          ta[v] = mesh.nodes[mesh.tets[page_tets[i]][v]];
          tb[v] = mesh.nodes[mesh.tets[page_tets[j]][v]];
        }
        if (tets_overlap(ta, tb, tol))
        {
          ++count;
        }
      }
    }
  }
  return count;
}

}  // namespace openbook
