// SPDX-License-Identifier: Apache-2.0
#include "openbook/spec_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace openbook
{

using nlohmann::json;

namespace
{

constexpr double two_pi = 2.0 * std::numbers::pi;

std::string escape_pointer(const std::string &key)
{
  std::string out;
  for (char c : key)
  {
    if (c == '~')
    {
      out += "~0";
    }
    else if (c == '/')
    {
      out += "~1";
    }
    else
    {
      out += c;
    }
  }
  return out;
}

json vec_json(const Vec3 &v)
{
  return json::array({v.x(), v.y(), v.z()});
}

}  // namespace

JsonReader::JsonReader(const json &node, std::string pointer)
    : node_(node), pointer_(std::move(pointer))
{
}

void JsonReader::error(const std::string &what) const
{
  fail(ErrorKind::Config, (pointer_.empty() ? std::string("/") : pointer_) + ": " + what);
}

void JsonReader::error(const char *key, const std::string &what) const
{
  fail(ErrorKind::Config, pointer_ + "/" + escape_pointer(key) + ": " + what);
}

void JsonReader::allow_only(std::initializer_list<const char *> allowed) const
{
  if (!node_.is_object())
  {
    error("expected an object");
  }
  for (auto it = node_.begin(); it != node_.end(); ++it)
  {
    bool ok = false;
    for (const char *a : allowed)
    {
      ok = ok || it.key() == a;
    }
    if (!ok)
    {
      error(it.key().c_str(), "unknown key");
    }
  }
}

bool JsonReader::has(const char *key) const
{
  return node_.is_object() && node_.contains(key);
}

JsonReader JsonReader::child(const char *key) const
{
  if (!has(key))
  {
    error(key, "missing required key");
  }
  return JsonReader(node_.at(key), pointer_ + "/" + escape_pointer(key));
}

JsonReader JsonReader::at(std::size_t index) const
{
  if (!node_.is_array() || index >= node_.size())
  {
    error("index " + std::to_string(index) + " out of range");
  }
  return JsonReader(node_.at(index), pointer_ + "/" + std::to_string(index));
}

std::size_t JsonReader::size() const
{
  if (!node_.is_array())
  {
    error("expected an array");
  }
  return node_.size();
}

double JsonReader::number(const char *key) const
{
  const JsonReader c = child(key);
  if (!c.node_.is_number())
  {
    c.error("expected a number");
  }
  const double v = c.node_.get<double>();
  if (!std::isfinite(v))
  {
    c.error("expected a finite number");
  }
  return v;
}

double JsonReader::number(const char *key, double fallback) const
{
  return has(key) ? number(key) : fallback;
}

int JsonReader::integer(const char *key) const
{
  const JsonReader c = child(key);
  if (!c.node_.is_number_integer())
  {
    c.error("expected an integer");
  }
  return c.node_.get<int>();
}

int JsonReader::integer(const char *key, int fallback) const
{
  return has(key) ? integer(key) : fallback;
}

bool JsonReader::boolean(const char *key, bool fallback) const
{
  if (!has(key))
  {
    return fallback;
  }
  const JsonReader c = child(key);
  if (!c.node_.is_boolean())
  {
    c.error("expected a boolean");
  }
  return c.node_.get<bool>();
}

std::string JsonReader::string(const char *key) const
{
  const JsonReader c = child(key);
  if (!c.node_.is_string())
  {
    c.error("expected a string");
  }
  return c.node_.get<std::string>();
}

std::string JsonReader::string(const char *key, const std::string &fallback) const
{
  return has(key) ? string(key) : fallback;
}

Vec3 JsonReader::vec3(const char *key) const
{
  const JsonReader c = child(key);
  if (!c.node_.is_array() || c.node_.size() != 3)
  {
    c.error("expected an array of 3 numbers");
  }
  Vec3 v;
  for (int i = 0; i < 3; ++i)
  {
    if (!c.node_[i].is_number())
    {
      c.at(i).error("expected a number");
    }
    v[i] = c.node_[i].get<double>();
  }
  return v;
}

Vec3 JsonReader::vec3(const char *key, const Vec3 &fallback) const
{
  return has(key) ? vec3(key) : fallback;
}

namespace
{

void read_azimuth(const JsonReader &r, ParamChart &c)
{
  c.domain.u1_min = r.number("azimuth_min", 0.0);
  c.domain.u1_max = r.number("azimuth_max", two_pi);
  if (!(c.domain.u1_max > c.domain.u1_min))
  {
    r.error("azimuth_max", "must exceed azimuth_min");
  }
  c.domain.periodic_u1 = std::abs(c.domain.u1_max - c.domain.u1_min - two_pi) < 1e-12;
}

double positive(const JsonReader &r, const char *key)
{
  const double v = r.number(key);
  if (!(v > 0.0))
  {
    r.error(key, "must be positive");
  }
  return v;
}

ParamChart read_page(const JsonReader &r)
{
  ParamChart c;
  const std::string kind = r.string("kind");
  const auto k = chart_kind_from_string(kind);
  if (!k)
  {
    r.error("kind", "unknown chart kind '" + kind + "'");
  }
  c.kind = *k;
  c.orientation = r.integer("orientation", 1);
  if (c.orientation != 1 && c.orientation != -1)
  {
    r.error("orientation", "must be +1 or -1");
  }
  switch (c.kind)
  {
    case ChartKind::FlatRectangle:
    {
      r.allow_only({"kind", "orientation", "origin", "u_axis", "v_axis", "width", "height"});
      c.origin = r.vec3("origin", Vec3::Zero());
      const Vec3 a = r.vec3("u_axis", Vec3::UnitX()), b = r.vec3("v_axis", Vec3::UnitY());
      if (a.norm() < 1e-12 || b.norm() < 1e-12)
      {
        r.error("axes must be nonzero");
      }
      c.axis1 = a.normalized();
      c.axis2 = b.normalized();
      if (std::abs(c.axis1.dot(c.axis2)) > 1e-10)
      {
        r.error("v_axis", "must be orthogonal to u_axis");
      }
      c.domain = {0.0, positive(r, "width"), 0.0, positive(r, "height"), false};
      break;
    }
    case ChartKind::SphericalCap:
      r.allow_only({"kind", "orientation", "center", "radius", "polar_min", "polar_max",
                    "azimuth_min", "azimuth_max"});
      c.origin = r.vec3("center", Vec3::Zero());
      c.radius = positive(r, "radius");
      read_azimuth(r, c);
      c.domain.u2_min = r.number("polar_min");
      c.domain.u2_max = r.number("polar_max");
      if (!(c.domain.u2_min >= 0.0 && c.domain.u2_max <= std::numbers::pi &&
            c.domain.u2_max > c.domain.u2_min))
      {
        r.error("polar range must satisfy 0 <= polar_min < polar_max <= pi");
      }
      break;
    case ChartKind::Hemisphere:
    {
      r.allow_only({"kind", "orientation", "center", "radius", "upper"});
      c.origin = r.vec3("center", Vec3::Zero());
      c.radius = positive(r, "radius");
      const bool upper = r.boolean("upper", true);
      c.domain = {0.0, two_pi, upper ? 0.0 : std::numbers::pi / 2.0,
                  upper ? std::numbers::pi / 2.0 : std::numbers::pi, true};
      break;
    }
    case ChartKind::PlanarDisk:
      r.allow_only({"kind", "orientation", "center", "radius"});
      c.origin = r.vec3("center", Vec3::Zero());
      c.domain = {0.0, two_pi, 0.0, positive(r, "radius"), true};
      break;
    case ChartKind::PlanarAnnulus:
    {
      r.allow_only({"kind", "orientation", "center", "inner_radius", "outer_radius"});
      c.origin = r.vec3("center", Vec3::Zero());
      const double r0 = positive(r, "inner_radius"), r1 = positive(r, "outer_radius");
      if (!(r1 > r0))
      {
        r.error("outer_radius", "must exceed inner_radius");
      }
      c.domain = {0.0, two_pi, r0, r1, true};
      break;
    }
    case ChartKind::CylinderSegment:
      r.allow_only({"kind", "orientation", "center", "radius", "z_min", "z_max", "azimuth_min",
                    "azimuth_max"});
      c.origin = r.vec3("center", Vec3::Zero());
      c.radius = positive(r, "radius");
      read_azimuth(r, c);
      c.domain.u2_min = r.number("z_min");
      c.domain.u2_max = r.number("z_max");
      if (!(c.domain.u2_max > c.domain.u2_min))
      {
        r.error("z_max", "must exceed z_min");
      }
      break;
  }
  return c;
}

BindingCurve read_binding(const JsonReader &r)
{
  const std::string kind = r.string("kind");
  if (kind == "circle")
  {
    r.allow_only({"kind", "center", "radius"});
    return BindingCurve::circle(r.vec3("center", Vec3::Zero()), positive(r, "radius"));
  }
  if (kind == "ellipse")
  {
    r.allow_only({"kind", "center", "semi_x", "semi_y"});
    return BindingCurve::ellipse(r.vec3("center", Vec3::Zero()), positive(r, "semi_x"),
                                 positive(r, "semi_y"));
  }
  if (kind == "segment")
  {
    r.allow_only({"kind", "start", "direction", "length", "normal_hint"});
    return BindingCurve::segment(r.vec3("start"), r.vec3("direction"), positive(r, "length"),
                                 r.vec3("normal_hint"));
  }
  r.error("kind", "unknown binding kind '" + kind + "'");
}

}  // namespace

OpenBookSpec spec_from_json(const json &doc)
{
  const JsonReader root(doc, "");
  root.allow_only({"name", "pages", "bindings", "incidences", "options"});
  OpenBookSpec spec;
  spec.name = root.string("name", "unnamed");

  const JsonReader pages = root.child("pages");
  for (std::size_t i = 0; i < pages.size(); ++i)
  {
    spec.pages.push_back(read_page(pages.at(i)));
  }
  if (root.has("bindings"))
  {
    const JsonReader b = root.child("bindings");
    for (std::size_t i = 0; i < b.size(); ++i)
    {
      spec.bindings.push_back(read_binding(b.at(i)));
    }
  }
  if (root.has("incidences"))
  {
    const JsonReader inc = root.child("incidences");
    for (std::size_t i = 0; i < inc.size(); ++i)
    {
      const JsonReader r = inc.at(i);
      r.allow_only({"binding", "entries"});
      Incidence in;
      in.binding = r.integer("binding");
      const JsonReader entries = r.child("entries");
      for (std::size_t j = 0; j < entries.size(); ++j)
      {
        const JsonReader e = entries.at(j);
        e.allow_only({"page", "side", "reversed"});
        IncidenceEntry entry;
        entry.page = e.integer("page");
        const std::string side = e.string("side");
        const auto s = side_from_string(side);
        if (!s)
        {
          e.error("side", "unknown side '" + side + "'");
        }
        entry.side = *s;
        entry.reversed = e.boolean("reversed", false);
        in.entries.push_back(entry);
      }
      spec.incidences.push_back(in);
    }
  }
  if (root.has("options"))
  {
    const JsonReader o = root.child("options");
    o.allow_only({"theta_min", "samples", "test_mode"});
    spec.options.theta_min = o.number("theta_min", spec.options.theta_min);
    spec.options.samples = o.integer("samples", spec.options.samples);
    spec.options.test_mode = o.boolean("test_mode", false);
    if (!(spec.options.theta_min > 0.0))
    {
      o.error("theta_min", "must be positive");
    }
    if (spec.options.samples < 2)
    {
      o.error("samples", "must be at least 2");
    }
  }
  return spec;
}

json read_json_file(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    fail(ErrorKind::Config, "cannot open '" + path + "'");
  }
  try
  {
    return json::parse(in);
  }
  catch (const json::parse_error &e)
  {
    fail(ErrorKind::Config, path + ": " + e.what());
  }
}

OpenBookSpec load_spec(const std::string &path)
{
  return spec_from_json(read_json_file(path));
}

json spec_to_json(const OpenBookSpec &spec)
{
  json doc;
  doc["name"] = spec.name;
  doc["pages"] = json::array();
  for (const auto &p : spec.pages)
  {
    json j;
    j["kind"] = to_string(p.kind);
    j["orientation"] = p.orientation;
    const auto &d = p.domain;
    switch (p.kind)
    {
      case ChartKind::FlatRectangle:
        j["origin"] = vec_json(p.origin);
        j["u_axis"] = vec_json(p.axis1);
        j["v_axis"] = vec_json(p.axis2);
        j["width"] = d.u1_max;
        j["height"] = d.u2_max;
        break;
      case ChartKind::SphericalCap:
        j["center"] = vec_json(p.origin);
        j["radius"] = p.radius;
        j["polar_min"] = d.u2_min;
        j["polar_max"] = d.u2_max;
        j["azimuth_min"] = d.u1_min;
        j["azimuth_max"] = d.u1_max;
        break;
      case ChartKind::Hemisphere:
        j["center"] = vec_json(p.origin);
        j["radius"] = p.radius;
        j["upper"] = d.u2_min == 0.0;
        break;
      case ChartKind::PlanarDisk:
        j["center"] = vec_json(p.origin);
        j["radius"] = d.u2_max;
        break;
      case ChartKind::PlanarAnnulus:
        j["center"] = vec_json(p.origin);
        j["inner_radius"] = d.u2_min;
        j["outer_radius"] = d.u2_max;
        break;
      case ChartKind::CylinderSegment:
        j["center"] = vec_json(p.origin);
        j["radius"] = p.radius;
        j["z_min"] = d.u2_min;
        j["z_max"] = d.u2_max;
        j["azimuth_min"] = d.u1_min;
        j["azimuth_max"] = d.u1_max;
        break;
    }
    doc["pages"].push_back(j);
  }
  doc["bindings"] = json::array();
  for (const auto &b : spec.bindings)
  {
    json j;
    j["kind"] = to_string(b.kind());
    if (b.kind() == CurveKind::Circle)
    {
      j["center"] = vec_json(b.center());
      j["radius"] = b.radius();
    }
    else if (b.kind() == CurveKind::Ellipse)
    {
      j["center"] = vec_json(b.center());
      j["semi_x"] = b.semi_x();
      j["semi_y"] = b.semi_y();
    }
    else
    {
      const CurvePoint p = b.eval(0.0);
      j["start"] = vec_json(p.position);
      j["direction"] = vec_json(p.tangent);
      j["length"] = b.length();
      j["normal_hint"] = vec_json(b.normal_hint());
    }
    doc["bindings"].push_back(j);
  }
  doc["incidences"] = json::array();
  for (const auto &in : spec.incidences)
  {
    json j;
    j["binding"] = in.binding;
    j["entries"] = json::array();
    for (const auto &e : in.entries)
    {
      j["entries"].push_back({{"page", e.page}, {"side", to_string(e.side)}, {"reversed", e.reversed}});
    }
    doc["incidences"].push_back(j);
  }
  doc["options"] = {{"theta_min", spec.options.theta_min},
                    {"samples", spec.options.samples},
                    {"test_mode", spec.options.test_mode}};
  if (!spec.sleeve_widths.empty())
  {
    doc["sleeve_widths"] = spec.sleeve_widths;
  }
  return doc;
}

}  // namespace openbook
