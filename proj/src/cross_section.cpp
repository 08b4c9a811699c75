// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <tuple>

#include "openbook/mesh.hpp"

namespace openbook
{

namespace
{

constexpr double pi = std::numbers::pi;

double cross2(const Vec2 &a, const Vec2 &b)
{
  return a.x() * b.y() - a.y() * b.x();
}

// Proper intersection of segments p0p1 and q0q1; returns the parameter on p.
std::optional<double> segment_hit(const Vec2 &p0, const Vec2 &p1, const Vec2 &q0, const Vec2 &q1)
{
  const Vec2 r = p1 - p0, s = q1 - q0;
  const double denom = cross2(r, s);
  if (std::abs(denom) < 1e-300)
  {
    return std::nullopt;
  }
  const double u = cross2(q0 - p0, s) / denom;
  const double v = cross2(q0 - p0, r) / denom;
  constexpr double tol = 1e-12;
  if (u < -tol || u > 1.0 + tol || v < -tol || v > 1.0 + tol)
  {
    return std::nullopt;
  }
  return std::clamp(u, 0.0, 1.0);
}

std::vector<double> cumulative_length(const std::vector<Vec3> &poly)
{
  std::vector<double> c(poly.size(), 0.0);
  for (std::size_t i = 1; i < poly.size(); ++i)
  {
    c[i] = c[i - 1] + (poly[i] - poly[i - 1]).norm();
  }
  return c;
}

Vec3 point_at_length(const std::vector<Vec3> &poly, const std::vector<double> &cum, double s)
{
  if (s <= 0.0)
  {
    return poly.front();
  }
  if (s >= cum.back())
  {
    return poly.back();
  }
  const auto it = std::upper_bound(cum.begin(), cum.end(), s);
  const std::size_t i = static_cast<std::size_t>(it - cum.begin());
  const double seg = cum[i] - cum[i - 1];
  const double f = seg > 0.0 ? (s - cum[i - 1]) / seg : 0.0;
  return poly[i - 1] + f * (poly[i] - poly[i - 1]);
}

double polygon_area(const std::vector<Vec2> &poly)
{
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i)
  {
    a += cross2(poly[i], poly[(i + 1) % poly.size()]);
  }
  return 0.5 * a;
}

bool polygon_contains(const std::vector<Vec2> &poly, const Vec2 &p, double tol)
{
  // On-boundary test first.
  for (std::size_t i = 0; i < poly.size(); ++i)
  {
    const Vec2 &a = poly[i], &b = poly[(i + 1) % poly.size()];
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double f = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    if ((a + f * ab - p).norm() <= tol)
    {
      return true;
    }
  }
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
  {
    const Vec2 &a = poly[i], &b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y()))
    {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x)
      {
        inside = !inside;
      }
    }
  }
  return inside;
}

}  // namespace

CrossSection cross_section(const OpenBookSpec &spec_in, int m, double t, double eps,
                           const CrossSectionOptions &opts)
{
  OpenBookSpec spec = spec_in;
  if (spec.sleeve_widths.size() != spec.bindings.size())
  {
    spec.finalize();
  }
  if (!(eps > 0.0))
  {
    fail(ErrorKind::Config, "cross-section needs eps > 0");
  }
  const int n_s = opts.sleeve_intervals, n_tau = opts.tau_levels;
  if (n_s < 1 || n_tau < 1)
  {
    fail(ErrorKind::Config, "cross-section needs at least one sleeve interval and tau level");
  }

  CrossSection cs;
  cs.binding = m;
  cs.t = t;
  cs.eps = eps;
  cs.sleeve_width = spec.sleeve_widths.at(m);
  const double width = cs.sleeve_width * eps;
  const CurvePoint cp = spec.bindings.at(m).eval(t);
  cs.center = cp.position;
  cs.tangent = cp.tangent;
  cs.e1 = cp.e1;
  cs.e2 = cp.e2;
  auto zeta = [&](const Vec3 &x) {
    const Vec3 d = x - cs.center;
    return Vec2(d.dot(cs.e1), d.dot(cs.e2));
  };

  std::vector<double> rows = opts.rows;
  if (rows.empty())
  {
    for (int r = 0; r <= n_s; ++r)
    {
      rows.push_back(width * r / n_s);
    }
  }
  if (static_cast<int>(rows.size()) != n_s + 1)
  {
    fail(ErrorKind::Mesh, "sleeve row count does not match the sleeve interval count");
  }

  // Page traces in cyclic order.
  std::vector<ArrangedPage> arranged = arrange_pages(spec, m, t);
  if (!opts.order.empty())
  {
    std::vector<ArrangedPage> ordered;
    for (const auto &[page, side] : opts.order)
    {
      auto it = std::find_if(arranged.begin(), arranged.end(), [&](const ArrangedPage &a) {
        return a.entry.page == page && a.entry.side == side;
      });
      if (it == arranged.end())
      {
        fail(ErrorKind::Mesh, "cross-section page order does not match the incidence");
      }
      ordered.push_back(*it);
    }
    arranged = ordered;
  }
  const int P = static_cast<int>(arranged.size());
  for (const auto &a : arranged)
  {
    SectionTrace tr;
    tr.entry = a.entry;
    tr.angle = a.angle;
    const ParamChart &chart = spec.pages.at(a.entry.page);
    const double u1 = binding_chart_point(spec, a.entry, m, t)[0];
    for (int r = 0; r <= n_s; ++r)
    {
      const double u2 = u2_at_distance(chart, u1, a.entry.side, rows[r]);
      tr.points.push_back(r == 0 ? cs.center : eval_chart(chart, Vec2(u1, u2)).position);
      tr.normals.push_back(page_normal(chart, Vec2(u1, u2)));
    }
    const Vec3 eperp = -std::sin(a.angle) * cs.e1 + std::cos(a.angle) * cs.e2;
    tr.ccw_sign = tr.normals[0].dot(eperp) >= 0.0 ? 1 : -1;
    cs.traces.push_back(std::move(tr));
  }

  // Local node registry.
  std::map<std::tuple<int, int, int, int>, int> shared;
  auto add_node = [&](SectionNode node) {
    node.zeta = zeta(node.x);
    cs.nodes.push_back(node);
    return static_cast<int>(cs.nodes.size()) - 1;
  };
  auto shared_node = [&](std::tuple<int, int, int, int> key, const SectionNode &node) {
    auto it = shared.find(key);
    if (it != shared.end())
    {
      return it->second;
    }
    const int id = add_node(node);
    shared.emplace(key, id);
    return id;
  };

  for (int p = 0; p < P; ++p)
  {
    Sector sec;
    sec.lo = p;
    sec.hi = (p + 1) % P;
    const SectionTrace &lo = cs.traces[sec.lo];
    const SectionTrace &hi = cs.traces[sec.hi];
    if (P == 1)
    {
      sec.angle = 2.0 * pi;
    }
    else
    {
      sec.angle = hi.angle - lo.angle;
      if (sec.angle <= 0.0)
      {
        sec.angle += 2.0 * pi;
      }
    }

    // Offset edges facing into the sector.
    std::vector<Vec3> oa, ob;
    for (int r = 0; r <= n_s; ++r)
    {
      oa.push_back(lo.points[r] + eps * lo.ccw_sign * lo.normals[r]);
      ob.push_back(hi.points[r] - eps * hi.ccw_sign * hi.normals[r]);
    }

    // Outer boundary in three pieces: the lo offset up to the corner, the arc
    // around the binding (wide sectors only), the hi offset from the corner.
    std::vector<Vec3> part_a, arc, part_b;
    constexpr double flat_tol = 1e-9;
    int segments = 0;
    if (sec.angle < pi - flat_tol)
    {
      bool found = false;
      for (int ka = 0; ka < n_s && !found; ++ka)
      {
        for (int kb = 0; kb < n_s && !found; ++kb)
        {
          const auto u = segment_hit(zeta(oa[ka]), zeta(oa[ka + 1]), zeta(ob[kb]), zeta(ob[kb + 1]));
          if (!u)
          {
            continue;
          }
          found = true;
          const Vec3 hit = oa[ka] + *u * (oa[ka + 1] - oa[ka]);
          for (int r = n_s; r > ka; --r)
          {
            part_a.push_back(oa[r]);
          }
          part_a.push_back(hit);
          part_b.push_back(hit);
          for (int r = kb + 1; r <= n_s; ++r)
          {
            part_b.push_back(ob[r]);
          }
        }
      }
      if (!found)
      {
        std::ostringstream os;
        os << "binding " << m << " at t = " << t << ": offset edges of pages "
           << lo.entry.page << " and " << hi.entry.page
           << " do not meet inside the sleeve (slab overlap)";
        fail(ErrorKind::Geometry, os.str());
      }
    }
    else
    {
      for (int r = n_s; r >= 0; --r)
      {
        part_a.push_back(oa[r]);
      }
      for (int r = 0; r <= n_s; ++r)
      {
        part_b.push_back(ob[r]);
      }
      const double sweep = sec.angle - pi;
      if (sweep > flat_tol)
      {
        segments = static_cast<int>(std::ceil(sweep / (pi / 12.0) - 1e-9));
        if (!opts.arc_segments.empty())
        {
          segments = opts.arc_segments.at(p);
        }
        const Vec3 u = lo.ccw_sign * lo.normals[0];
        const Vec3 w = -u.dot(cs.e2) * cs.e1 + u.dot(cs.e1) * cs.e2;
        for (int a = 1; a < segments; ++a)
        {
          const double beta = sweep * a / segments;
          arc.push_back(cs.center + eps * (std::cos(beta) * u + std::sin(beta) * w));
        }
      }
    }
    sec.arc_segments = segments;
    sec.outer = part_a;
    sec.outer.insert(sec.outer.end(), arc.begin(), arc.end());
    sec.outer.insert(sec.outer.end(), part_b.begin() + (segments == 0 ? 1 : 0), part_b.end());

    // Inner boundary: lo trace inward, the binding point once per arc vertex,
    // then the hi trace outward. Each sleeve maps arclength-proportionally onto
    // its offset piece; the binding point fans out over the arc.
    std::vector<Vec3> lo_in, hi_in;
    for (int r = n_s; r >= 0; --r)
    {
      lo_in.push_back(lo.points[r]);
    }
    for (int r = 0; r <= n_s; ++r)
    {
      hi_in.push_back(hi.points[r]);
    }
    auto map_piece = [&](const std::vector<Vec3> &in, const std::vector<Vec3> &out,
                         std::vector<Vec3> &img) {
      const auto cin = cumulative_length(in);
      const auto cout = cumulative_length(out);
      const double ratio = cout.back() / cin.back();
      for (std::size_t i = 0; i < in.size(); ++i)
      {
        img.push_back(point_at_length(out, cout, cin[i] * ratio));
      }
      img.front() = out.front();
      img.back() = out.back();
    };
    std::vector<Vec3> img_a, img_b;
    map_piece(lo_in, part_a, img_a);
    map_piece(hi_in, part_b, img_b);
    sec.inner = lo_in;
    sec.image = img_a;
    if (segments > 0)
    {
      for (const Vec3 &x : arc)
      {
        sec.inner.push_back(cs.center);
        sec.image.push_back(x);
      }
      sec.inner.push_back(cs.center);
      sec.image.push_back(img_b.front());
    }
    sec.inner.insert(sec.inner.end(), hi_in.begin() + 1, hi_in.end());
    sec.image.insert(sec.image.end(), img_b.begin() + 1, img_b.end());

    // Nodes on the (sigma, tau) grid.
    const int ni = static_cast<int>(sec.inner.size());
    const int fan = ni - 2 * n_s - 1;
    sec.grid.assign(ni, std::vector<int>(n_tau + 1, -1));
    for (int i = 0; i < ni; ++i)
    {
      const bool on_lo = i < n_s, on_hi = i > n_s + fan;
      const int row = on_lo ? n_s - i : (on_hi ? i - n_s - fan : 0);
      const int tr = on_lo ? sec.lo : sec.hi;
      for (int q = 0; q <= n_tau; ++q)
      {
        const double tau = static_cast<double>(q) / n_tau;
        SectionNode node;
        node.sector = p;
        node.x = sec.inner[i] + tau * (sec.image[i] - sec.inner[i]);
        if (q == 0 && !on_lo && !on_hi)
        {
          node.kind = SectionNodeKind::Binding;
          node.x = cs.center;
          sec.grid[i][q] = shared_node({0, 0, 0, 0}, node);
        }
        else if (q == 0)
        {
          node.kind = SectionNodeKind::Trace;
          node.trace = tr;
          node.row = row;
          node.x = cs.traces[tr].points[row];
          sec.grid[i][q] = shared_node({1, tr, row, 0}, node);
        }
        else if (i == 0 || i == ni - 1)
        {
          node.kind = SectionNodeKind::Column;
          node.trace = tr;
          node.row = q;
          node.side = on_lo ? lo.ccw_sign : -hi.ccw_sign;
          sec.grid[i][q] = shared_node({2, tr, q, node.side}, node);
        }
        else
        {
          node.kind = SectionNodeKind::Interior;
          sec.grid[i][q] = add_node(node);
        }
      }
    }

    // Quads split into triangles.
    const std::vector<char> *locked =
        opts.diagonals.empty() ? nullptr : &opts.diagonals.at(p);
    for (int i = 0; i + 1 < ni; ++i)
    {
      for (int q = 0; q < n_tau; ++q)
      {
        const int a = sec.grid[i][q], b = sec.grid[i + 1][q];
        const int c = sec.grid[i + 1][q + 1], d = sec.grid[i][q + 1];
        char diag = 0;
        if (a == b)
        {
          diag = 0;
        }
        else if (locked)
        {
          diag = (*locked).at(static_cast<std::size_t>(i * n_tau + q));
        }
        else
        {
          const double ac = (cs.nodes[a].zeta - cs.nodes[c].zeta).norm();
          const double bd = (cs.nodes[b].zeta - cs.nodes[d].zeta).norm();
          diag = bd < ac ? 1 : 0;
        }
        sec.diagonals.push_back(diag);
        std::array<std::array<int, 3>, 2> tris =
            diag == 0 ? std::array<std::array<int, 3>, 2>{{{a, b, c}, {a, c, d}}}
                      : std::array<std::array<int, 3>, 2>{{{a, b, d}, {b, c, d}}};
        for (auto tri : tris)
        {
          if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
          {
            continue;
          }
          const double area2 = cross2(cs.nodes[tri[1]].zeta - cs.nodes[tri[0]].zeta,
                                      cs.nodes[tri[2]].zeta - cs.nodes[tri[0]].zeta);
          if (std::abs(area2) <= 1e-14 * eps * eps)
          {
            std::ostringstream os;
            os << "binding " << m << " at t = " << t << ": degenerate foliation cell in sector "
               << p << " (sigma " << i << ", tau " << q << ")";
            fail(ErrorKind::Geometry, os.str());
          }
          // The (sigma, tau) grid runs clockwise; a positive cell is a fold.
          if (area2 > 0.0)
          {
            std::ostringstream os;
            os << "binding " << m << " at t = " << t << ": folded foliation cell in sector " << p
               << " (sigma " << i << ", tau " << q << ")";
            fail(ErrorKind::Geometry, os.str());
          }
          std::swap(tri[1], tri[2]);
          cs.triangles.push_back(tri);
        }
      }
    }
    cs.sectors.push_back(std::move(sec));
  }

  // Lumped areas.
  cs.node_area.assign(cs.nodes.size(), 0.0);
  for (const auto &tri : cs.triangles)
  {
    const double a = 0.5 * cross2(cs.nodes[tri[1]].zeta - cs.nodes[tri[0]].zeta,
                                  cs.nodes[tri[2]].zeta - cs.nodes[tri[0]].zeta);
    cs.area += a;
    for (int v : tri)
    {
      cs.node_area[v] += a / 3.0;
    }
  }

  // Boundary polygon: outer polylines joined by the Gamma segments.
  for (const auto &sec : cs.sectors)
  {
    for (const auto &x : sec.outer)
    {
      const Vec2 z = zeta(x);
      if (cs.boundary.empty() || (cs.boundary.back() - z).norm() > 1e-14 * eps)
      {
        cs.boundary.push_back(z);
      }
    }
  }
  for (int p = 0; p < P; ++p)
  {
    const Sector &prev = cs.sectors[(p + P - 1) % P];
    const Sector &next = cs.sectors[p];
    cs.gamma.push_back({zeta(prev.outer.back()), zeta(next.outer.front())});
  }
  if (polygon_area(cs.boundary) < 0.0)
  {
    std::reverse(cs.boundary.begin(), cs.boundary.end());
  }

  // Star-shape certificate about the binding point.
  double inscribed = std::numeric_limits<double>::infinity(), circ = 0.0;
  const std::size_t nbnd = cs.boundary.size();
  for (std::size_t i = 0; i < nbnd; ++i)
  {
    const Vec2 &a = cs.boundary[i], &b = cs.boundary[(i + 1) % nbnd];
    const Vec2 ab = b - a;
    if (ab.norm() <= 1e-14 * eps)
    {
      continue;
    }
    // Interior is to the left of a counter-clockwise edge.
    const double dist = cross2(ab, -a) / ab.norm();
    inscribed = std::min(inscribed, dist);
    circ = std::max(circ, a.norm());
  }
  cs.inscribed_factor = inscribed / eps;
  cs.circumscribed_factor = circ / eps;
  return cs;
}

bool section_contains(const CrossSection &cs, const Vec2 &zeta, double tol)
{
  return polygon_contains(cs.boundary, zeta, tol);
}

FoliationMap sector_foliation(const CrossSection &cs, int sector, int z_samples)
{
  if (sector < 0 || sector >= static_cast<int>(cs.sectors.size()))
  {
    fail(ErrorKind::Mesh, "sector " + std::to_string(sector) + " does not exist at this station");
  }
  const Sector &sec = cs.sectors[sector];
  auto zeta = [&](const Vec3 &x) {
    const Vec3 d = x - cs.center;
    return Vec2(d.dot(cs.e1), d.dot(cs.e2));
  };
  FoliationMap fm;
  fm.sector = sector;
  for (std::size_t i = 0; i < sec.inner.size(); ++i)
  {
    fm.samples.push_back({sec.inner[i], sec.image[i] - sec.inner[i]});
    fm.max_length_factor = std::max(fm.max_length_factor, fm.samples.back().v.norm() / cs.eps);
  }
  for (std::size_t i = 0; i + 1 < fm.samples.size(); ++i)
  {
    const double dy = (fm.samples[i + 1].y - fm.samples[i].y).norm();
    if (dy > 0.0)
    {
      fm.max_gradient =
          std::max(fm.max_gradient, (fm.samples[i + 1].v - fm.samples[i].v).norm() / dy);
    }
  }
  // Ends of the inner boundary sit on the Gamma interfaces.
  const SectionTrace &lo = cs.traces[sec.lo], &hi = cs.traces[sec.hi];
  const Vec3 nlo = lo.normals.back() * lo.ccw_sign, nhi = -hi.normals.back() * hi.ccw_sign;
  auto angle = [](const Vec3 &a, const Vec3 &b) {
    return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0));
  };
  fm.endpoint_angle = std::max(angle(fm.samples.front().v, nlo), angle(fm.samples.back().v, nhi));

  // Sector polygon: inner boundary followed by the outer boundary reversed.
  std::vector<Vec2> poly;
  for (const auto &x : sec.inner)
  {
    poly.push_back(zeta(x));
  }
  for (auto it = sec.outer.rbegin(); it != sec.outer.rend(); ++it)
  {
    poly.push_back(zeta(*it));
  }
  const double tol = 1e-9 * cs.eps;
  for (const auto &s : fm.samples)
  {
    for (int k = 1; k < z_samples; ++k)
    {
      const double z = static_cast<double>(k) / z_samples;
      if (!polygon_contains(poly, zeta(s.y + z * s.v), tol))
      {
        fm.segment_property = false;
      }
    }
  }
  return fm;
}

}  // namespace openbook
