// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "openbook/mesh.hpp"

namespace openbook
{

namespace
{

struct SideBinding
{
  int binding = -1;
  bool reversed = false;
};

// Metric distances of the grid rows, measured from u2_min.
std::vector<double> make_rows(double depth, std::optional<double> lo_sleeve,
                              std::optional<double> hi_sleeve, int n_s, double h, double ratio)
{
  auto near_sequence = [&](double width) {
    std::vector<double> seq{0.0};
    const double delta = width / n_s;
    for (int j = 1; j <= n_s; ++j)
    {
      seq.push_back(j * delta);
    }
    double spacing = delta;
    while (spacing * ratio < h)
    {
      spacing *= ratio;
      seq.push_back(seq.back() + spacing);
    }
    return seq;
  };

  std::vector<double> lo{0.0}, hi{0.0};
  if (lo_sleeve)
  {
    lo = near_sequence(*lo_sleeve);
  }
  if (hi_sleeve)
  {
    hi = near_sequence(*hi_sleeve);
  }
  const double pl = lo.back(), pr = depth - hi.back();
  if (pr - pl < 0.5 * h)
  {
    std::ostringstream os;
    os << "page depth " << depth << " cannot hold the sleeve rows (need > " << pl + (depth - pr)
       << ")";
    fail(ErrorKind::Mesh, os.str());
  }
  std::vector<double> rows = lo;
  const int n = std::max(1, static_cast<int>(std::ceil((pr - pl) / h - 1e-9)));
  for (int j = 1; j <= n; ++j)
  {
    rows.push_back(pl + (pr - pl) * j / n);
  }
  rows.back() = pr;
  for (auto it = hi.rbegin() + 1; it != hi.rend(); ++it)
  {
    rows.push_back(depth - *it);
  }
  rows.back() = depth;
  return rows;
}

std::vector<double> bisect(const std::vector<double> &v, int levels)
{
  std::vector<double> out = v;
  for (int l = 0; l < levels; ++l)
  {
    std::vector<double> next;
    next.reserve(2 * out.size());
    for (std::size_t i = 0; i + 1 < out.size(); ++i)
    {
      next.push_back(out[i]);
      next.push_back(0.5 * (out[i] + out[i + 1]));
    }
    next.push_back(out.back());
    out = std::move(next);
  }
  return out;
}

double u1_extent(const ParamChart &chart)
{
  const auto &d = chart.domain;
  double best = 0.0;
  for (int j = 0; j <= 8; ++j)
  {
    const double u2 = d.u2_min + (d.u2_max - d.u2_min) * j / 8.0;
    const ChartEval ev = eval_chart(chart, Vec2(0.5 * (d.u1_min + d.u1_max), u2));
    best = std::max(best, ev.jacobian.col(0).norm() * (d.u1_max - d.u1_min));
  }
  return best;
}

}  // namespace

Vec3 page_normal(const ParamChart &chart, const Vec2 &y)
{
  const auto &d = chart.domain;
  Vec2 p = y;
  const double nudge = 1e-9 * (d.u2_max - d.u2_min);
  if (chart.collapsed(Side::U2Min) && p[1] - d.u2_min < nudge)
  {
    p[1] = d.u2_min + nudge;
  }
  if (chart.collapsed(Side::U2Max) && d.u2_max - p[1] < nudge)
  {
    p[1] = d.u2_max - nudge;
  }
  const ChartEval ev = eval_chart(chart, p);
  const Vec3 n = static_cast<double>(chart.orientation) * ev.jacobian.col(0).cross(ev.jacobian.col(1));
  return n.normalized();
}

SurfaceMesh triangulate_pages(const OpenBookSpec &spec_in, const SurfaceMeshOptions &opts)
{
  if (!(opts.h > 0.0))
  {
    fail(ErrorKind::Config, "mesh size h must be positive");
  }
  if (opts.eps && !(*opts.eps > 0.0))
  {
    fail(ErrorKind::Config, "eps must be positive");
  }
  OpenBookSpec spec = spec_in;
  if (spec.sleeve_widths.size() != spec.bindings.size())
  {
    spec.finalize();
  }
  const int np = static_cast<int>(spec.pages.size());
  const int nb = static_cast<int>(spec.bindings.size());
  const int scale = 1 << opts.refine;

  SurfaceMesh mesh;
  mesh.eps = opts.eps;
  mesh.sleeve_intervals = opts.sleeve_intervals * scale;

  // Incident sides per page.
  std::vector<std::map<Side, SideBinding>> page_sides(np);
  for (const auto &inc : spec.incidences)
  {
    for (const auto &e : inc.entries)
    {
      page_sides.at(e.page)[e.side] = {inc.binding, e.reversed};
    }
  }

  // One station count shared by every binding so pages with two bindings fit.
  int base_stations = 1;
  for (int m = 0; m < nb; ++m)
  {
    const BindingCurve &b = spec.bindings[m];
    int n = static_cast<int>(std::ceil(b.length() / opts.h - 1e-9));
    if (b.closed())
    {
      n = std::max(n, opts.min_closed_stations);
    }
    base_stations = std::max(base_stations, n);
  }
  const int n_stations = base_stations * scale;

  // Binding nodes.
  mesh.binding_nodes.resize(nb);
  mesh.stations.assign(nb, n_stations);
  for (int m = 0; m < nb; ++m)
  {
    const BindingCurve &b = spec.bindings[m];
    const int count = b.closed() ? n_stations : n_stations + 1;
    const IncidenceEntry &first = spec.incidence(m).entries.at(0);
    for (int i = 0; i < count; ++i)
    {
      const double t = b.length() * i / n_stations;
      SurfaceNode node;
      node.x = b.eval(t).position;
      node.page = first.page;
      node.y = binding_chart_point(spec, first, m, t);
      node.binding = m;
      node.station = i;
      if (opts.eps)
      {
        node.sleeve_binding = m;
        node.sleeve_station = i;
      }
      mesh.binding_nodes[m].push_back(static_cast<int>(mesh.nodes.size()));
      mesh.nodes.push_back(node);
    }
  }

  mesh.grids.resize(np);
  for (int k = 0; k < np; ++k)
  {
    const ParamChart &chart = spec.pages[k];
    const auto &d = chart.domain;
    PageGrid &grid = mesh.grids[k];
    grid.periodic = d.periodic_u1;
    const auto &sides = page_sides[k];
    const bool has_binding = !sides.empty();
    for (const auto &[side, sb] : sides)
    {
      const bool closed = spec.bindings[sb.binding].closed();
      if (closed != grid.periodic)
      {
        std::ostringstream os;
        os << "page " << k << ": " << (closed ? "closed" : "open") << " binding " << sb.binding
           << " on a " << (grid.periodic ? "periodic" : "non-periodic") << " page";
        fail(ErrorKind::Mesh, os.str());
      }
    }

    // Stations along u1.
    int n_u1 = 0;
    const double width = u1_extent(chart);
    const double u1mid = 0.5 * (d.u1_min + d.u1_max);
    const double depth = transverse_length(chart, u1mid, d.u2_min, d.u2_max);
    if (opts.h > depth + 1e-12 || (!grid.periodic && opts.h > width + 1e-12))
    {
      std::ostringstream os;
      os << "h = " << opts.h << " exceeds the extent of page " << k;
      fail(ErrorKind::Mesh, os.str());
    }
    if (has_binding)
    {
      n_u1 = n_stations;
    }
    else
    {
      n_u1 = std::max(1, static_cast<int>(std::ceil(width / opts.h - 1e-9)));
      if (grid.periodic)
      {
        n_u1 = std::max(n_u1, opts.min_closed_stations);
      }
      n_u1 *= scale;
    }
    for (int i = 0; i <= n_u1; ++i)
    {
      grid.u1.push_back(d.u1_min + (d.u1_max - d.u1_min) * i / n_u1);
    }
    grid.u1.back() = d.u1_max;

    // Rows.
    std::optional<double> lo_sleeve, hi_sleeve;
    if (opts.eps)
    {
      if (auto it = sides.find(Side::U2Min); it != sides.end())
      {
        lo_sleeve = spec.sleeve_widths[it->second.binding] * *opts.eps;
      }
      if (auto it = sides.find(Side::U2Max); it != sides.end())
      {
        hi_sleeve = spec.sleeve_widths[it->second.binding] * *opts.eps;
      }
    }
    grid.distance = bisect(make_rows(depth, lo_sleeve, hi_sleeve, opts.sleeve_intervals, opts.h,
                                     opts.grading),
                           opts.refine);
    const int rows = static_cast<int>(grid.distance.size());
    for (int j = 0; j < rows; ++j)
    {
      double u2 = u2_at_distance(chart, u1mid, Side::U2Min, grid.distance[j]);
      if (j == 0)
      {
        u2 = d.u2_min;
      }
      if (j == rows - 1)
      {
        u2 = d.u2_max;
      }
      grid.u2.push_back(u2);
    }
    grid.slab_lo = lo_sleeve ? mesh.sleeve_intervals : 0;
    grid.slab_hi = hi_sleeve ? rows - 1 - mesh.sleeve_intervals : rows - 1;

    // Nodes.
    grid.ids.assign(n_u1 + 1, std::vector<int>(rows, -1));
    const bool pole_lo = chart.collapsed(Side::U2Min), pole_hi = chart.collapsed(Side::U2Max);
    int pole_lo_id = -1, pole_hi_id = -1;
    for (int i = 0; i <= n_u1; ++i)
    {
      if (grid.periodic && i == n_u1)
      {
        grid.ids[i] = grid.ids[0];
        break;
      }
      for (int j = 0; j < rows; ++j)
      {
        const Vec2 y(grid.u1[i], grid.u2[j]);
        int id = -1;
        const bool lo_side = j == 0, hi_side = j == rows - 1;
        const Side side = lo_side ? Side::U2Min : Side::U2Max;
        if ((lo_side || hi_side) && sides.count(side))
        {
          const SideBinding sb = sides.at(side);
          int station = sb.reversed ? n_u1 - i : i;
          if (spec.bindings[sb.binding].closed())
          {
            station %= n_stations;
          }
          id = mesh.binding_nodes[sb.binding][station];
        }
        else if (lo_side && pole_lo && pole_lo_id >= 0)
        {
          id = pole_lo_id;
        }
        else if (hi_side && pole_hi && pole_hi_id >= 0)
        {
          id = pole_hi_id;
        }
        else
        {
          SurfaceNode node;
          node.x = eval_chart(chart, y).position;
          node.page = k;
          node.y = y;
          node.collapsed = (lo_side && pole_lo) || (hi_side && pole_hi);
          id = static_cast<int>(mesh.nodes.size());
          mesh.nodes.push_back(node);
          if (lo_side && pole_lo)
          {
            pole_lo_id = id;
          }
          if (hi_side && pole_hi)
          {
            pole_hi_id = id;
          }
          // Sleeve membership.
          if (opts.eps)
          {
            for (const auto &[s, sb] : sides)
            {
              const double dist =
                  s == Side::U2Min ? grid.distance[j] : grid.distance.back() - grid.distance[j];
              const double width_m = spec.sleeve_widths[sb.binding] * *opts.eps;
              if (dist <= width_m * (1.0 + 1e-12))
              {
                auto &n = mesh.nodes[id];
                n.sleeve_binding = sb.binding;
                int station = sb.reversed ? n_u1 - i : i;
                if (spec.bindings[sb.binding].closed())
                {
                  station %= n_stations;
                }
                n.sleeve_station = station;
                n.sleeve_distance = dist;
              }
            }
          }
        }
        grid.ids[i][j] = id;
      }
    }

    // Triangles.
    for (int i = 0; i < n_u1; ++i)
    {
      for (int j = 0; j + 1 < rows; ++j)
      {
        const int a = grid.ids[i][j], b = grid.ids[i + 1][j];
        const int c = grid.ids[i + 1][j + 1], e = grid.ids[i][j + 1];
        const Vec2 ya(grid.u1[i], grid.u2[j]), yb(grid.u1[i + 1], grid.u2[j]);
        const Vec2 yc(grid.u1[i + 1], grid.u2[j + 1]), ye(grid.u1[i], grid.u2[j + 1]);
        mesh.triangles.push_back({{a, b, c}, k, {ya, yb, yc}});
        mesh.triangles.push_back({{a, c, e}, k, {ya, yc, ye}});
      }
    }
  }

  mesh.sleeve_flags.assign(mesh.nodes.size(), 0);
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i)
  {
    mesh.sleeve_flags[i] = mesh.nodes[i].sleeve_binding >= 0 ? 1 : 0;
  }
  compute_metric_cache(spec, mesh);
  return mesh;
}

void compute_metric_cache(const OpenBookSpec &spec, SurfaceMesh &mesh)
{
  mesh.metric_cache.resize(mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
  {
    const SurfaceTriangle &tri = mesh.triangles[t];
    const ParamChart &chart = spec.pages.at(tri.page);
    for (int q = 0; q < 3; ++q)
    {
      const auto [xi, eta] = tri_quad_points[q];
      const Vec2 y = tri.y[0] + xi * (tri.y[1] - tri.y[0]) + eta * (tri.y[2] - tri.y[0]);
      const FundamentalForms ff = fundamental_forms(chart, y);
      Eigen::Matrix2d g;
      g << ff.E, ff.F, ff.F, ff.G;
      mesh.metric_cache[t][q].ginv = g.inverse();
      mesh.metric_cache[t][q].sqrt_det = std::sqrt(ff.det_first());
    }
  }
}

int euler_characteristic(const SurfaceMesh &mesh, int page)
{
  std::set<int> vertices;
  std::set<std::pair<int, int>> edges;
  int faces = 0;
  for (const auto &t : mesh.triangles)
  {
    if (t.page != page)
    {
      continue;
    }
    const auto &v = t.v;
    if (v[0] == v[1] || v[1] == v[2] || v[0] == v[2])
    {
      continue;
    }
    ++faces;
    for (int i = 0; i < 3; ++i)
    {
      vertices.insert(v[i]);
      const int a = v[i], b = v[(i + 1) % 3];
      edges.insert({std::min(a, b), std::max(a, b)});
    }
  }
  return static_cast<int>(vertices.size()) - static_cast<int>(edges.size()) + faces;
}

}  // namespace openbook
