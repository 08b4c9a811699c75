// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "openbook/error.hpp"

namespace openbook
{

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

// ---------------------------------------------------------------------------
// Pages: analytic charts X : U -> R^3 from a fixed catalog.
// ---------------------------------------------------------------------------

enum class ChartKind
{
  FlatRectangle,
  SphericalCap,
  Hemisphere,
  PlanarDisk,
  PlanarAnnulus,
  CylinderSegment
};

const char *to_string(ChartKind kind);
std::optional<ChartKind> chart_kind_from_string(const std::string &name);

// Closed parameter rectangle [u1_min, u1_max] x [u2_min, u2_max].
struct ChartDomain
{
  double u1_min = 0.0, u1_max = 1.0;
  double u2_min = 0.0, u2_max = 1.0;
  // u1 is an angle covering a full turn; the u1 sides are glued.
  bool periodic_u1 = false;
};

// Sides of the parameter rectangle.
enum class Side
{
  U1Min,
  U1Max,
  U2Min,
  U2Max
};

const char *to_string(Side side);
std::optional<Side> side_from_string(const std::string &name);

struct ParamChart
{
  ChartKind kind = ChartKind::FlatRectangle;
  // Origin of a flat rectangle, or center of the revolution charts.
  Vec3 origin = Vec3::Zero();
  // Orthonormal in-plane axes of a flat rectangle.
  Vec3 axis1 = Vec3::UnitX();
  Vec3 axis2 = Vec3::UnitY();
  double radius = 1.0;
  ChartDomain domain;
  // +1 or -1; multiplies the cross product of the chart tangents.
  int orientation = 1;

  // A u2 side that maps to a single point (pole of a cap, disk center).
  bool collapsed(Side side) const;
  bool contains(const Vec2 &y, double tol = 1e-12) const;
};

struct ChartEval
{
  Vec3 position;
  // Columns X_1, X_2.
  Eigen::Matrix<double, 3, 2> jacobian;
  // X_11, X_12, X_22.
  std::array<Vec3, 3> hessian;
};

// Analytic X, DX, D^2X. Throws Domain when y lies outside U.
ChartEval eval_chart(const ParamChart &chart, const Vec2 &y);

struct FundamentalForms
{
  double E = 0, F = 0, G = 0;
  double e = 0, f = 0, g = 0;
  Vec3 normal = Vec3::UnitZ();

  double det_first() const { return E * G - F * F; }
};

// First form from the tangents, unit normal from their cross product, second
// form from -DX . DN. Throws Geometry when EG - F^2 <= 0.
FundamentalForms fundamental_forms(const ParamChart &chart, const Vec2 &y);

// Derivatives D_1 N, D_2 N of the unit normal.
std::array<Vec3, 2> normal_derivatives(const ParamChart &chart, const Vec2 &y);

// Principal curvatures (k1 <= k2) at y.
std::array<double, 2> principal_curvatures(const ParamChart &chart, const Vec2 &y);

// Metric length of the u2 grid line at fixed u1 between two u2 values.
double transverse_length(const ParamChart &chart, double u1, double u2_from, double u2_to);

// Inverse of transverse_length measured from the given side: the u2 value at
// metric distance s from that side along the line u1 = const.
double u2_at_distance(const ParamChart &chart, double u1, Side from, double s);

// ---------------------------------------------------------------------------
// Bindings: arclength-parameterized curves with an orthonormal normal frame.
// ---------------------------------------------------------------------------

enum class CurveKind
{
  Circle,
  Ellipse,
  Segment
};

const char *to_string(CurveKind kind);

struct CurvePoint
{
  Vec3 position;
  Vec3 tangent;
  Vec3 e1;
  Vec3 e2;
};

class BindingCurve
{
public:
  static BindingCurve circle(const Vec3 &center, double radius);
  // Axis-aligned ellipse in the plane z = center.z().
  static BindingCurve ellipse(const Vec3 &center, double semi_x, double semi_y);
  // Straight segment; only legal in test mode. `normal_hint` fixes e1.
  static BindingCurve segment(const Vec3 &start, const Vec3 &direction, double length,
                              const Vec3 &normal_hint);

  CurveKind kind() const { return kind_; }
  double length() const { return length_; }
  bool closed() const { return kind_ != CurveKind::Segment; }
  const Vec3 &center() const { return center_; }
  double radius() const { return radius_; }
  double semi_x() const { return semi_x_; }
  double semi_y() const { return semi_y_; }
  const Vec3 &normal_hint() const { return normal_; }

  // t in [0, L]; closed curves wrap t periodically.
  CurvePoint eval(double t) const;

private:
  double ellipse_angle(double t) const;

  CurveKind kind_ = CurveKind::Circle;
  Vec3 center_ = Vec3::Zero();
  double radius_ = 1.0;
  double semi_x_ = 1.0, semi_y_ = 1.0;
  Vec3 start_ = Vec3::Zero(), direction_ = Vec3::UnitX(), normal_ = Vec3::UnitY();
  double length_ = 0.0;
  // Ellipse: cumulative arclength at uniform angle knots.
  std::vector<double> arc_table_;
};

// ---------------------------------------------------------------------------
// Incidence and the full book.
// ---------------------------------------------------------------------------

struct IncidenceEntry
{
  int page = 0;
  Side side = Side::U2Min;
  // Binding parameter runs against the page's u1 direction.
  bool reversed = false;
};

struct Incidence
{
  int binding = 0;
  std::vector<IncidenceEntry> entries;
};

struct BookOptions
{
  double theta_min = 10.0 * std::numbers::pi / 180.0;
  int samples = 256;
  bool test_mode = false;
};

struct OpenBookSpec
{
  std::string name;
  std::vector<ParamChart> pages;
  std::vector<BindingCurve> bindings;
  std::vector<Incidence> incidences;
  BookOptions options;
  // Derived per binding by finalize().
  std::vector<double> sleeve_widths;

  // Incidence record of binding m (Config error when absent).
  const Incidence &incidence(int m) const;
  // Computes sleeve widths; throws Geometry when a binding is not transverse.
  void finalize();
};

// Chart coordinates of the page point lying over binding parameter t.
Vec2 binding_chart_point(const OpenBookSpec &spec, const IncidenceEntry &entry, int m, double t);

// Unit inward conormal of the page at the binding point (in R^3).
Vec3 inward_conormal(const OpenBookSpec &spec, const IncidenceEntry &entry, int m, double t);

// Pages around binding m ordered counter-clockwise in the (e1, e2) frame.
struct ArrangedPage
{
  IncidenceEntry entry;
  double angle = 0.0;  // polar angle of the inward conormal in [0, 2pi)
};
std::vector<ArrangedPage> arrange_pages(const OpenBookSpec &spec, int m, double t);

// Smallest pairwise page angle theta'_m over the t-samples. Single-page
// bindings report pi (no pair to measure).
double min_page_angle(const OpenBookSpec &spec, int m);

// a_m = 1 + cot(theta'/2) below pi/2, otherwise 2.
double sleeve_width_from_angle(double theta);
double sleeve_width(const OpenBookSpec &spec, int m);

struct ValidationCheck
{
  std::string name;
  bool pass = true;
  std::string detail;
};

struct ValidationReport
{
  std::vector<ValidationCheck> checks;
  bool pass() const;
  std::string to_text() const;
};

ValidationReport validate(const OpenBookSpec &spec);

struct Epsilon0Report
{
  double epsilon0 = 0.0;
  double curvature_max = 0.0;
  double curvature_term = 0.0;
  double distance_min = 0.0;
  double distance_term = 0.0;
  double reach_term = 0.0;
};

// Conservative fattening bound; throws Geometry on a spec that fails validate.
Epsilon0Report epsilon0_report(const OpenBookSpec &spec);
double epsilon0(const OpenBookSpec &spec);

}  // namespace openbook
