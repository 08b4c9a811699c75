// SPDX-License-Identifier: Apache-2.0
#include "openbook/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <Eigen/Dense>

namespace openbook
{

namespace
{

constexpr double pi = std::numbers::pi;

// 8-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr std::array<double, 8> gl_nodes = {-0.9602898564975363, -0.7966664774136267,
                                            -0.5255324099163290, -0.1834346424956498,
                                            0.1834346424956498,  0.5255324099163290,
                                            0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> gl_weights = {0.1012285362903763, 0.2223810344533745,
                                              0.3137066458778873, 0.3626837833783620,
                                              0.3626837833783620, 0.3137066458778873,
                                              0.2223810344533745, 0.1012285362903763};

template <class F>
double gauss_legendre(F &&f, double a, double b, int panels)
{
  double sum = 0.0;
  const double w = (b - a) / panels;
  for (int p = 0; p < panels; ++p)
  {
    const double lo = a + p * w, mid = lo + 0.5 * w;
    for (std::size_t q = 0; q < gl_nodes.size(); ++q)
    {
      sum += 0.5 * w * gl_weights[q] * f(mid + 0.5 * w * gl_nodes[q]);
    }
  }
  return sum;
}

bool is_spherical(ChartKind k)
{
  return k == ChartKind::SphericalCap || k == ChartKind::Hemisphere;
}

bool is_polar_plane(ChartKind k)
{
  return k == ChartKind::PlanarDisk || k == ChartKind::PlanarAnnulus;
}

}  // namespace

const char *to_string(ErrorKind kind)
{
  switch (kind)
  {
    case ErrorKind::Config:
      return "config";
    case ErrorKind::Domain:
      return "domain";
    case ErrorKind::Geometry:
      return "geometry";
    case ErrorKind::Mesh:
      return "mesh";
    case ErrorKind::Assembly:
      return "assembly";
    case ErrorKind::Solver:
      return "solver";
    case ErrorKind::Size:
      return "size";
    case ErrorKind::Audit:
      return "audit";
    case ErrorKind::Io:
      return "io";
  }
  return "unknown";
}

const char *to_string(ChartKind kind)
{
  switch (kind)
  {
    case ChartKind::FlatRectangle:
      return "flat_rectangle";
    case ChartKind::SphericalCap:
      return "spherical_cap";
    case ChartKind::Hemisphere:
      return "hemisphere";
    case ChartKind::PlanarDisk:
      return "planar_disk";
    case ChartKind::PlanarAnnulus:
      return "planar_annulus";
    case ChartKind::CylinderSegment:
      return "cylinder_segment";
  }
  return "unknown";
}

std::optional<ChartKind> chart_kind_from_string(const std::string &name)
{
  for (auto k : {ChartKind::FlatRectangle, ChartKind::SphericalCap, ChartKind::Hemisphere,
                 ChartKind::PlanarDisk, ChartKind::PlanarAnnulus, ChartKind::CylinderSegment})
  {
    if (name == to_string(k))
    {
      return k;
    }
  }
  return std::nullopt;
}

const char *to_string(Side side)
{
  switch (side)
  {
    case Side::U1Min:
      return "u1_min";
    case Side::U1Max:
      return "u1_max";
    case Side::U2Min:
      return "u2_min";
    case Side::U2Max:
      return "u2_max";
  }
  return "unknown";
}

std::optional<Side> side_from_string(const std::string &name)
{
  for (auto s : {Side::U1Min, Side::U1Max, Side::U2Min, Side::U2Max})
  {
    if (name == to_string(s))
    {
      return s;
    }
  }
  return std::nullopt;
}

const char *to_string(CurveKind kind)
{
  switch (kind)
  {
    case CurveKind::Circle:
      return "circle";
    case CurveKind::Ellipse:
      return "ellipse";
    case CurveKind::Segment:
      return "segment";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Charts
// ---------------------------------------------------------------------------

bool ParamChart::collapsed(Side side) const
{
  if (side != Side::U2Min && side != Side::U2Max)
  {
    return false;
  }
  const double u2 = side == Side::U2Min ? domain.u2_min : domain.u2_max;
  if (is_spherical(kind))
  {
    return std::abs(std::sin(u2)) < 1e-12;
  }
  if (is_polar_plane(kind))
  {
    return std::abs(u2) < 1e-12;
  }
  return false;
}

bool ParamChart::contains(const Vec2 &y, double tol) const
{
  return y[0] >= domain.u1_min - tol && y[0] <= domain.u1_max + tol &&
         y[1] >= domain.u2_min - tol && y[1] <= domain.u2_max + tol;
}

ChartEval eval_chart(const ParamChart &chart, const Vec2 &y)
{
  const auto &d = chart.domain;
  if (y[0] < d.u1_min - 1e-12 || y[0] > d.u1_max + 1e-12)
  {
    std::ostringstream os;
    os << "chart " << to_string(chart.kind) << ": coordinate y1 = " << y[0] << " outside ["
       << d.u1_min << ", " << d.u1_max << "]";
    fail(ErrorKind::Domain, os.str());
  }
  if (y[1] < d.u2_min - 1e-12 || y[1] > d.u2_max + 1e-12)
  {
    std::ostringstream os;
    os << "chart " << to_string(chart.kind) << ": coordinate y2 = " << y[1] << " outside ["
       << d.u2_min << ", " << d.u2_max << "]";
    fail(ErrorKind::Domain, os.str());
  }

  ChartEval out;
  const double u = y[0], v = y[1];
  switch (chart.kind)
  {
    case ChartKind::FlatRectangle:
      out.position = chart.origin + u * chart.axis1 + v * chart.axis2;
      out.jacobian.col(0) = chart.axis1;
      out.jacobian.col(1) = chart.axis2;
      out.hessian = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
      break;
    case ChartKind::SphericalCap:
    case ChartKind::Hemisphere:
    {
      const double R = chart.radius;
      const double su = std::sin(u), cu = std::cos(u), sv = std::sin(v), cv = std::cos(v);
      out.position = chart.origin + R * Vec3(sv * cu, sv * su, cv);
      out.jacobian.col(0) = R * Vec3(-sv * su, sv * cu, 0.0);
      out.jacobian.col(1) = R * Vec3(cv * cu, cv * su, -sv);
      out.hessian[0] = R * Vec3(-sv * cu, -sv * su, 0.0);
      out.hessian[1] = R * Vec3(-cv * su, cv * cu, 0.0);
      out.hessian[2] = R * Vec3(-sv * cu, -sv * su, -cv);
      break;
    }
    case ChartKind::PlanarDisk:
    case ChartKind::PlanarAnnulus:
    {
      const double su = std::sin(u), cu = std::cos(u);
      out.position = chart.origin + Vec3(v * cu, v * su, 0.0);
      out.jacobian.col(0) = Vec3(-v * su, v * cu, 0.0);
      out.jacobian.col(1) = Vec3(cu, su, 0.0);
      out.hessian[0] = Vec3(-v * cu, -v * su, 0.0);
      out.hessian[1] = Vec3(-su, cu, 0.0);
      out.hessian[2] = Vec3::Zero();
      break;
    }
    case ChartKind::CylinderSegment:
    {
      const double R = chart.radius;
      const double su = std::sin(u), cu = std::cos(u);
      out.position = chart.origin + Vec3(R * cu, R * su, v);
      out.jacobian.col(0) = Vec3(-R * su, R * cu, 0.0);
      out.jacobian.col(1) = Vec3(0.0, 0.0, 1.0);
      out.hessian[0] = Vec3(-R * cu, -R * su, 0.0);
      out.hessian[1] = Vec3::Zero();
      out.hessian[2] = Vec3::Zero();
      break;
    }
  }
  return out;
}

namespace
{

struct NormalData
{
  Vec3 normal;
  std::array<Vec3, 2> dnormal;
  double norm;
};

NormalData normal_data(const ParamChart &chart, const ChartEval &ev)
{
  const Vec3 x1 = ev.jacobian.col(0), x2 = ev.jacobian.col(1);
  const Vec3 n = static_cast<double>(chart.orientation) * x1.cross(x2);
  const double len = n.norm();
  NormalData out;
  out.norm = len;
  if (len <= 0.0)
  {
    out.normal = Vec3::Zero();
    out.dnormal = {Vec3::Zero(), Vec3::Zero()};
    return out;
  }
  out.normal = n / len;
  // D_i n = X_1i x X_2 + X_1 x X_2i, hessian index: 11 -> 0, 12 -> 1, 22 -> 2.
  const std::array<Vec3, 2> dn = {
      static_cast<double>(chart.orientation) * (ev.hessian[0].cross(x2) + x1.cross(ev.hessian[1])),
      static_cast<double>(chart.orientation) * (ev.hessian[1].cross(x2) + x1.cross(ev.hessian[2]))};
  for (int i = 0; i < 2; ++i)
  {
    out.dnormal[i] = (dn[i] - out.normal * out.normal.dot(dn[i])) / len;
  }
  return out;
}

}  // namespace

FundamentalForms fundamental_forms(const ParamChart &chart, const Vec2 &y)
{
  const ChartEval ev = eval_chart(chart, y);
  const Vec3 x1 = ev.jacobian.col(0), x2 = ev.jacobian.col(1);
  FundamentalForms ff;
  ff.E = x1.dot(x1);
  ff.F = x1.dot(x2);
  ff.G = x2.dot(x2);
  if (ff.det_first() <= 0.0)
  {
    std::ostringstream os;
    os << "chart " << to_string(chart.kind) << " is not an immersion at y = (" << y[0] << ", "
       << y[1] << "): EG - F^2 = " << ff.det_first();
    fail(ErrorKind::Geometry, os.str());
  }
  const NormalData nd = normal_data(chart, ev);
  ff.normal = nd.normal;
  ff.e = -x1.dot(nd.dnormal[0]);
  ff.f = -x1.dot(nd.dnormal[1]);
  ff.g = -x2.dot(nd.dnormal[1]);
  return ff;
}

std::array<Vec3, 2> normal_derivatives(const ParamChart &chart, const Vec2 &y)
{
  const ChartEval ev = eval_chart(chart, y);
  return normal_data(chart, ev).dnormal;
}

std::array<double, 2> principal_curvatures(const ParamChart &chart, const Vec2 &y)
{
  const FundamentalForms ff = fundamental_forms(chart, y);
  Eigen::Matrix2d first, second;
  first << ff.E, ff.F, ff.F, ff.G;
  second << ff.e, ff.f, ff.f, ff.g;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2d> es(second, first,
                                                                Eigen::EigenvaluesOnly);
  return {es.eigenvalues()[0], es.eigenvalues()[1]};
}

double transverse_length(const ParamChart &chart, double u1, double u2_from, double u2_to)
{
  if (u2_to == u2_from)
  {
    return 0.0;
  }
  const double lo = std::min(u2_from, u2_to), hi = std::max(u2_from, u2_to);
  auto speed = [&](double u2) {
    const ChartEval ev = eval_chart(chart, Vec2(u1, u2));
    return ev.jacobian.col(1).norm();
  };
  return gauss_legendre(speed, lo, hi, 16);
}

double u2_at_distance(const ParamChart &chart, double u1, Side from, double s)
{
  const auto &d = chart.domain;
  const double total = transverse_length(chart, u1, d.u2_min, d.u2_max);
  if (s <= 0.0)
  {
    return from == Side::U2Min ? d.u2_min : d.u2_max;
  }
  if (s >= total)
  {
    return from == Side::U2Min ? d.u2_max : d.u2_min;
  }
  const double start = from == Side::U2Min ? d.u2_min : d.u2_max;
  double lo = d.u2_min, hi = d.u2_max;
  // Monotone in u2: bisect on the distance from the chosen side.
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(hi)); ++it)
  {
    const double mid = 0.5 * (lo + hi);
    const double dist = transverse_length(chart, u1, start, mid);
    const bool too_far = dist > s;
    if (from == Side::U2Min)
    {
      (too_far ? hi : lo) = mid;
    }
    else
    {
      (too_far ? lo : hi) = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Binding curves
// ---------------------------------------------------------------------------

BindingCurve BindingCurve::circle(const Vec3 &center, double radius)
{
  if (!(radius > 0.0))
  {
    fail(ErrorKind::Config, "circle binding needs a positive radius");
  }
  BindingCurve c;
  c.kind_ = CurveKind::Circle;
  c.center_ = center;
  c.radius_ = radius;
  c.length_ = 2.0 * pi * radius;
  return c;
}

BindingCurve BindingCurve::ellipse(const Vec3 &center, double semi_x, double semi_y)
{
  if (!(semi_x > 0.0 && semi_y > 0.0))
  {
    fail(ErrorKind::Config, "ellipse binding needs positive semi-axes");
  }
  BindingCurve c;
  c.kind_ = CurveKind::Ellipse;
  c.center_ = center;
  c.semi_x_ = semi_x;
  c.semi_y_ = semi_y;
  auto speed = [&](double psi) {
    return std::hypot(semi_x * std::sin(psi), semi_y * std::cos(psi));
  };
  // Cumulative arclength at uniform angle knots.
  constexpr int knots = 512;
  c.arc_table_.resize(knots + 1);
  c.arc_table_[0] = 0.0;
  for (int k = 0; k < knots; ++k)
  {
    const double a = 2.0 * pi * k / knots, b = 2.0 * pi * (k + 1) / knots;
    c.arc_table_[k + 1] = c.arc_table_[k] + gauss_legendre(speed, a, b, 1);
  }
  c.length_ = c.arc_table_.back();
  return c;
}

BindingCurve BindingCurve::segment(const Vec3 &start, const Vec3 &direction, double length,
                                   const Vec3 &normal_hint)
{
  if (!(length > 0.0) || direction.norm() == 0.0)
  {
    fail(ErrorKind::Config, "segment binding needs a positive length and a direction");
  }
  BindingCurve c;
  c.kind_ = CurveKind::Segment;
  c.start_ = start;
  c.direction_ = direction.normalized();
  Vec3 n = normal_hint - normal_hint.dot(c.direction_) * c.direction_;
  if (n.norm() < 1e-12)
  {
    fail(ErrorKind::Config, "segment binding normal hint is parallel to its direction");
  }
  c.normal_ = n.normalized();
  c.length_ = length;
  return c;
}

double BindingCurve::ellipse_angle(double t) const
{
  constexpr int knots = 512;
  auto speed = [&](double psi) {
    return std::hypot(semi_x_ * std::sin(psi), semi_y_ * std::cos(psi));
  };
  auto arclength = [&](double psi) {
    const int k = std::clamp(static_cast<int>(psi / (2.0 * pi) * knots), 0, knots - 1);
    const double a = 2.0 * pi * k / knots;
    return arc_table_[k] + gauss_legendre(speed, a, psi, 1);
  };
  double psi = 2.0 * pi * t / length_;
  for (int it = 0; it < 50; ++it)
  {
    const double step = (arclength(psi) - t) / speed(psi);
    psi -= step;
    if (std::abs(step) < 1e-15)
    {
      break;
    }
  }
  return psi;
}

CurvePoint BindingCurve::eval(double t) const
{
  if (closed())
  {
    t = std::fmod(t, length_);
    if (t < 0.0)
    {
      t += length_;
    }
  }
  CurvePoint p;
  switch (kind_)
  {
    case CurveKind::Circle:
    {
      const double phi = t / radius_;
      const Vec3 radial(std::cos(phi), std::sin(phi), 0.0);
      p.position = center_ + radius_ * radial;
      p.tangent = Vec3(-std::sin(phi), std::cos(phi), 0.0);
      p.e1 = radial;
      p.e2 = Vec3::UnitZ();
      break;
    }
    case CurveKind::Ellipse:
    {
      const double psi = ellipse_angle(t);
      p.position = center_ + Vec3(semi_x_ * std::cos(psi), semi_y_ * std::sin(psi), 0.0);
      const Vec3 d(-semi_x_ * std::sin(psi), semi_y_ * std::cos(psi), 0.0);
      p.tangent = d.normalized();
      p.e1 = Vec3(p.tangent.y(), -p.tangent.x(), 0.0);
      p.e2 = Vec3::UnitZ();
      break;
    }
    case CurveKind::Segment:
      p.position = start_ + t * direction_;
      p.tangent = direction_;
      p.e1 = normal_;
      p.e2 = direction_.cross(normal_);
      break;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Book
// ---------------------------------------------------------------------------

const Incidence &OpenBookSpec::incidence(int m) const
{
  for (const auto &inc : incidences)
  {
    if (inc.binding == m)
    {
      return inc;
    }
  }
  fail(ErrorKind::Config, "binding " + std::to_string(m) + " has no incidence record");
}

void OpenBookSpec::finalize()
{
  sleeve_widths.assign(bindings.size(), 2.0);
  for (std::size_t m = 0; m < bindings.size(); ++m)
  {
    sleeve_widths[m] = sleeve_width(*this, static_cast<int>(m));
  }
}

Vec2 binding_chart_point(const OpenBookSpec &spec, const IncidenceEntry &entry, int m, double t)
{
  const ParamChart &page = spec.pages.at(entry.page);
  const auto &d = page.domain;
  const double L = spec.bindings.at(m).length();
  double frac = t / L;
  if (entry.reversed)
  {
    frac = 1.0 - frac;
  }
  frac = std::clamp(frac, 0.0, 1.0);
  const double u1 = d.u1_min + frac * (d.u1_max - d.u1_min);
  const double u2 = entry.side == Side::U2Min ? d.u2_min : d.u2_max;
  return Vec2(u1, u2);
}

Vec3 inward_conormal(const OpenBookSpec &spec, const IncidenceEntry &entry, int m, double t)
{
  const ParamChart &page = spec.pages.at(entry.page);
  const ChartEval ev = eval_chart(page, binding_chart_point(spec, entry, m, t));
  const CurvePoint cp = spec.bindings.at(m).eval(t);
  Vec3 d = ev.jacobian.col(1) * (entry.side == Side::U2Min ? 1.0 : -1.0);
  d -= d.dot(cp.tangent) * cp.tangent;
  return d.normalized();
}

std::vector<ArrangedPage> arrange_pages(const OpenBookSpec &spec, int m, double t)
{
  const CurvePoint cp = spec.bindings.at(m).eval(t);
  std::vector<ArrangedPage> out;
  for (const auto &e : spec.incidence(m).entries)
  {
    const Vec3 d = inward_conormal(spec, e, m, t);
    double a = std::atan2(d.dot(cp.e2), d.dot(cp.e1));
    if (a < 0.0)
    {
      a += 2.0 * pi;
    }
    out.push_back({e, a});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ArrangedPage &a, const ArrangedPage &b) { return a.angle < b.angle; });
  return out;
}

namespace
{

std::vector<double> binding_samples(const OpenBookSpec &spec, int m)
{
  const BindingCurve &b = spec.bindings.at(m);
  const int n = std::max(spec.options.samples, 2);
  std::vector<double> ts(n);
  for (int i = 0; i < n; ++i)
  {
    ts[i] = b.closed() ? b.length() * i / n : b.length() * i / (n - 1);
  }
  return ts;
}

}  // namespace

double min_page_angle(const OpenBookSpec &spec, int m)
{
  const auto &entries = spec.incidence(m).entries;
  if (entries.empty())
  {
    fail(ErrorKind::Geometry, "binding " + std::to_string(m) + " is incident to no page");
  }
  if (entries.size() == 1)
  {
    return pi;
  }
  double theta = pi;
  for (double t : binding_samples(spec, m))
  {
    std::vector<Vec3> dirs;
    for (const auto &e : entries)
    {
      dirs.push_back(inward_conormal(spec, e, m, t));
    }
    for (std::size_t i = 0; i < dirs.size(); ++i)
    {
      for (std::size_t j = i + 1; j < dirs.size(); ++j)
      {
        theta = std::min(theta, std::acos(std::clamp(dirs[i].dot(dirs[j]), -1.0, 1.0)));
      }
    }
  }
  return theta;
}

double sleeve_width_from_angle(double theta)
{
  if (!(theta > 0.0) || !std::isfinite(theta))
  {
    std::ostringstream os;
    os << "pages are not transverse: theta'_m = " << theta;
    fail(ErrorKind::Geometry, os.str());
  }
  if (theta < pi / 2.0)
  {
    return 1.0 + 1.0 / std::tan(theta / 2.0);
  }
  return 2.0;
}

double sleeve_width(const OpenBookSpec &spec, int m)
{
  return sleeve_width_from_angle(min_page_angle(spec, m));
}

bool ValidationReport::pass() const
{
  return std::all_of(checks.begin(), checks.end(), [](const auto &c) { return c.pass; });
}

std::string ValidationReport::to_text() const
{
  std::ostringstream os;
  for (const auto &c : checks)
  {
    os << (c.pass ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty())
    {
      os << ": " << c.detail;
    }
    os << "\n";
  }
  os << (pass() ? "overall: PASS" : "overall: FAIL") << "\n";
  return os.str();
}

ValidationReport validate(const OpenBookSpec &spec)
{
  ValidationReport report;
  const int np = static_cast<int>(spec.pages.size());
  const int nb = static_cast<int>(spec.bindings.size());

  // Incidence structure.
  {
    ValidationCheck c{"incidence-structure", true, ""};
    std::set<std::pair<int, int>> used_sides;
    std::ostringstream os;
    if (np == 0)
    {
      c.pass = false;
      os << "no pages; ";
    }
    for (int m = 0; m < nb; ++m)
    {
      const Incidence *inc = nullptr;
      for (const auto &i : spec.incidences)
      {
        if (i.binding == m)
        {
          inc = &i;
        }
      }
      if (!inc || inc->entries.empty())
      {
        c.pass = false;
        os << "dangling binding " << m << " (incident to zero pages); ";
        continue;
      }
      for (const auto &e : inc->entries)
      {
        if (e.page < 0 || e.page >= np)
        {
          c.pass = false;
          os << "binding " << m << " references missing page " << e.page << "; ";
          continue;
        }
        if (e.side != Side::U2Min && e.side != Side::U2Max)
        {
          c.pass = false;
          os << "binding " << m << " attaches to side " << to_string(e.side) << " of page "
             << e.page << " (bindings must lie on u2 sides); ";
        }
        if (!used_sides.insert({e.page, static_cast<int>(e.side)}).second)
        {
          c.pass = false;
          os << "side " << to_string(e.side) << " of page " << e.page << " used twice; ";
        }
        if (spec.pages[e.page].collapsed(e.side))
        {
          c.pass = false;
          os << "binding " << m << " attaches to a collapsed side of page " << e.page << "; ";
        }
      }
    }
    for (const auto &i : spec.incidences)
    {
      if (i.binding < 0 || i.binding >= nb)
      {
        c.pass = false;
        os << "incidence references missing binding " << i.binding << "; ";
      }
    }
    c.detail = os.str();
    report.checks.push_back(c);
    if (!c.pass)
    {
      return report;
    }
  }

  // Closed bindings.
  {
    ValidationCheck c{"closed-bindings", true, ""};
    for (int m = 0; m < nb; ++m)
    {
      if (!spec.bindings[m].closed() && !spec.options.test_mode)
      {
        c.pass = false;
        c.detail += "binding " + std::to_string(m) + " is a segment (requires test_mode); ";
      }
    }
    if (spec.options.test_mode)
    {
      c.detail += "test mode: straight bindings and free Neumann sides allowed";
    }
    report.checks.push_back(c);
  }

  // Page sides: binding, collapsed, periodic, or (test mode) free.
  {
    ValidationCheck c{"no-point-strata", true, ""};
    std::set<std::pair<int, int>> bound;
    for (const auto &i : spec.incidences)
    {
      for (const auto &e : i.entries)
      {
        bound.insert({e.page, static_cast<int>(e.side)});
      }
    }
    for (int k = 0; k < np; ++k)
    {
      const auto &p = spec.pages[k];
      for (auto s : {Side::U1Min, Side::U1Max, Side::U2Min, Side::U2Max})
      {
        const bool u1side = s == Side::U1Min || s == Side::U1Max;
        if (u1side && p.domain.periodic_u1)
        {
          continue;
        }
        if (bound.count({k, static_cast<int>(s)}) || p.collapsed(s))
        {
          continue;
        }
        if (!spec.options.test_mode)
        {
          c.pass = false;
          c.detail += "page " + std::to_string(k) + " side " + to_string(s) +
                      " is a free edge (requires test_mode); ";
        }
      }
    }
    report.checks.push_back(c);
  }

  // Transversality.
  {
    ValidationCheck c{"transversality", true, ""};
    std::ostringstream os;
    for (int m = 0; m < nb; ++m)
    {
      const double theta = min_page_angle(spec, m);
      os << "theta'_" << m << " = " << theta;
      if (spec.incidence(m).entries.size() == 1)
      {
        os << " (single page)";
      }
      else if (theta < spec.options.theta_min)
      {
        c.pass = false;
        os << " below theta_min = " << spec.options.theta_min;
      }
      os << "; ";
    }
    c.detail = os.str();
    report.checks.push_back(c);
  }

  // Connectivity of the page-binding incidence graph.
  {
    ValidationCheck c{"connectivity", true, ""};
    std::vector<int> parent(np + nb);
    for (int i = 0; i < np + nb; ++i)
    {
      parent[i] = i;
    }
    auto find = [&](int x) {
      while (parent[x] != x)
      {
        x = parent[x] = parent[parent[x]];
      }
      return x;
    };
    for (const auto &i : spec.incidences)
    {
      for (const auto &e : i.entries)
      {
        parent[find(e.page)] = find(np + i.binding);
      }
    }
    std::set<int> roots;
    for (int i = 0; i < np + nb; ++i)
    {
      roots.insert(find(i));
    }
    if (roots.size() > 1)
    {
      c.pass = false;
      c.detail = std::to_string(roots.size()) + " connected components";
    }
    report.checks.push_back(c);
  }

  // Immersion on an interior sample grid.
  {
    ValidationCheck c{"immersion", true, ""};
    constexpr int n = 16;
    for (int k = 0; k < np; ++k)
    {
      const auto &d = spec.pages[k].domain;
      double worst = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i)
      {
        for (int j = 0; j < n; ++j)
        {
          const Vec2 y(d.u1_min + (i + 0.5) / n * (d.u1_max - d.u1_min),
                       d.u2_min + (j + 0.5) / n * (d.u2_max - d.u2_min));
          const ChartEval ev = eval_chart(spec.pages[k], y);
          const double E = ev.jacobian.col(0).squaredNorm(), G = ev.jacobian.col(1).squaredNorm();
          const double F = ev.jacobian.col(0).dot(ev.jacobian.col(1));
          worst = std::min(worst, E * G - F * F);
        }
      }
      if (!(worst > 0.0))
      {
        c.pass = false;
        c.detail += "page " + std::to_string(k) + " degenerates (min EG-F^2 = " +
                    std::to_string(worst) + "); ";
      }
    }
    report.checks.push_back(c);
  }

  // Binding frames and boundary matching.
  {
    ValidationCheck frames{"binding-frames", true, ""};
    ValidationCheck match{"boundary-matching", true, ""};
    for (int m = 0; m < nb; ++m)
    {
      const BindingCurve &b = spec.bindings[m];
      double frame_err = 0.0, match_err = 0.0;
      for (double t : binding_samples(spec, m))
      {
        const CurvePoint p = b.eval(t);
        frame_err = std::max({frame_err, std::abs(p.tangent.norm() - 1.0),
                              std::abs(p.e1.norm() - 1.0), std::abs(p.e2.norm() - 1.0),
                              std::abs(p.e1.dot(p.tangent)), std::abs(p.e2.dot(p.tangent)),
                              std::abs(p.e1.dot(p.e2))});
        for (const auto &e : spec.incidence(m).entries)
        {
          const Vec3 x = eval_chart(spec.pages[e.page], binding_chart_point(spec, e, m, t)).position;
          match_err = std::max(match_err, (x - p.position).norm());
        }
      }
      if (frame_err > 1e-8)
      {
        frames.pass = false;
        frames.detail += "binding " + std::to_string(m) + " frame error " +
                         std::to_string(frame_err) + "; ";
      }
      if (match_err > 1e-8)
      {
        match.pass = false;
        std::ostringstream os;
        os << "binding " << m << " deviates from its page sides by " << match_err << "; ";
        match.detail += os.str();
      }
    }
    report.checks.push_back(frames);
    report.checks.push_back(match);
  }
  return report;
}

Epsilon0Report epsilon0_report(const OpenBookSpec &spec)
{
  const ValidationReport v = validate(spec);
  if (!v.pass())
  {
    fail(ErrorKind::Geometry, "epsilon0 requires a validating spec:\n" + v.to_text());
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  const int np = static_cast<int>(spec.pages.size());
  const int nb = static_cast<int>(spec.bindings.size());
  Epsilon0Report r;

  // Curvature of pages and bindings.
  constexpr int n = 24;
  std::vector<std::vector<Vec3>> clouds(np + nb);
  for (int k = 0; k < np; ++k)
  {
    const auto &d = spec.pages[k].domain;
    for (int i = 0; i < n; ++i)
    {
      for (int j = 0; j < n; ++j)
      {
        const Vec2 y(d.u1_min + (i + 0.5) / n * (d.u1_max - d.u1_min),
                     d.u2_min + (j + 0.5) / n * (d.u2_max - d.u2_min));
        const auto kap = principal_curvatures(spec.pages[k], y);
        r.curvature_max = std::max({r.curvature_max, std::abs(kap[0]), std::abs(kap[1])});
        clouds[k].push_back(eval_chart(spec.pages[k], y).position);
      }
    }
  }
  for (int m = 0; m < nb; ++m)
  {
    const BindingCurve &b = spec.bindings[m];
    double kb = 0.0;
    const double L = b.length();
    for (int i = 0; i < 64; ++i)
    {
      const double t = L * i / 64.0, h = 1e-4 * L;
      if (b.closed() || (t > h && t < L - h))
      {
        const Vec3 a = b.eval(t - h).position, c = b.eval(t).position, e = b.eval(t + h).position;
        kb = std::max(kb, ((a - 2.0 * c + e) / (h * h)).norm());
      }
      clouds[np + m].push_back(b.eval(t).position);
    }
    r.curvature_max = std::max(r.curvature_max, kb);
  }
  r.curvature_term = r.curvature_max > 1e-12 ? 1.0 / (2.0 * r.curvature_max) : inf;

  // Distances between non-adjacent strata.
  std::set<std::pair<int, int>> adjacent;
  for (const auto &inc : spec.incidences)
  {
    for (const auto &e : inc.entries)
    {
      adjacent.insert({e.page, np + inc.binding});
      for (const auto &e2 : inc.entries)
      {
        adjacent.insert({e.page, e2.page});
      }
    }
  }
  r.distance_min = inf;
  for (int a = 0; a < np + nb; ++a)
  {
    for (int b = a + 1; b < np + nb; ++b)
    {
      if (adjacent.count({a, b}) || adjacent.count({b, a}))
      {
        continue;
      }
      // Bindings of a common page are adjacent through it.
      if (a >= np && b >= np)
      {
        bool share = false;
        for (int k = 0; k < np && !share; ++k)
        {
          share = adjacent.count({k, a}) && adjacent.count({k, b});
        }
        if (share)
        {
          continue;
        }
      }
      for (const auto &p : clouds[a])
      {
        for (const auto &q : clouds[b])
        {
          r.distance_min = std::min(r.distance_min, (p - q).norm());
        }
      }
    }
  }
  r.distance_term = r.distance_min / 4.0;

  // Page depth must hold the sleeves plus one fiber half-length.
  r.reach_term = inf;
  for (int k = 0; k < np; ++k)
  {
    const auto &p = spec.pages[k];
    const double u1mid = 0.5 * (p.domain.u1_min + p.domain.u1_max);
    const double depth = transverse_length(p, u1mid, p.domain.u2_min, p.domain.u2_max);
    double sleeves = 0.0;
    bool any = false;
    for (const auto &inc : spec.incidences)
    {
      for (const auto &e : inc.entries)
      {
        if (e.page == k)
        {
          sleeves += spec.sleeve_widths.empty() ? sleeve_width(spec, inc.binding)
                                                : spec.sleeve_widths[inc.binding];
          any = true;
        }
      }
    }
    if (!any)
    {
      const double u2mid = 0.5 * (p.domain.u2_min + p.domain.u2_max);
      const ChartEval ev = eval_chart(p, Vec2(u1mid, u2mid));
      const double width = ev.jacobian.col(0).norm() * (p.domain.u1_max - p.domain.u1_min);
      r.reach_term = std::min(r.reach_term, 0.5 * std::min(depth, width));
    }
    else
    {
      r.reach_term = std::min(r.reach_term, depth / (sleeves + 1.0));
    }
  }
  r.epsilon0 = std::min({r.curvature_term, r.distance_term, r.reach_term});
  if (!(r.epsilon0 > 0.0) || !std::isfinite(r.epsilon0))
  {
    fail(ErrorKind::Geometry, "could not determine a positive epsilon0");
  }
  return r;
}

double epsilon0(const OpenBookSpec &spec)
{
  return epsilon0_report(spec).epsilon0;
}

}  // namespace openbook
