// SPDX-License-Identifier: Apache-2.0
#include "openbook/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "openbook/error.hpp"
#include "openbook/log.hpp"
#include "openbook/stats.hpp"

namespace openbook
{

void SparseMap::push_row(const std::vector<std::pair<int, double>> &entries)
{
  for (const auto &[c, v] : entries)
  {
    col.push_back(c);
    val.push_back(v);
  }
  row_ptr.push_back(static_cast<std::int64_t>(col.size()));
  rows = static_cast<int>(row_ptr.size()) - 1;
}

double SparseMap::row_sum(int i) const
{
  double s = 0.0;
  for (auto p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
  {
    s += val[p];
  }
  return s;
}

Eigen::VectorXd SparseMap::apply(const Eigen::VectorXd &x) const
{
  if (x.size() != cols)
  {
    fail(ErrorKind::Size, "SparseMap::apply: vector of length " + std::to_string(x.size()) +
                              " for " + std::to_string(cols) + " columns");
  }
  Eigen::VectorXd y(rows);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i)
  {
    double s = 0.0;
    for (auto p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
    {
      s += val[p] * x[col[p]];
    }
    y[i] = s;
  }
  return y;
}

Eigen::MatrixXd SparseMap::apply(const Eigen::MatrixXd &x) const
{
  Eigen::MatrixXd y(rows, x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
  {
    y.col(j) = apply(Eigen::VectorXd(x.col(j)));
  }
  return y;
}

namespace
{

using Row = std::vector<std::pair<int, double>>;

Row row_of(const SparseMap &m, int i)
{
  Row r;
  for (auto p = m.row_ptr[i]; p < m.row_ptr[i + 1]; ++p)
  {
    r.emplace_back(m.col[p], m.val[p]);
  }
  return r;
}

// Sums duplicate columns and scales.
Row combine(std::initializer_list<std::pair<double, const Row *>> parts)
{
  std::map<int, double> acc;
  for (const auto &[w, row] : parts)
  {
    if (w == 0.0)
    {
      continue;
    }
    for (const auto &[c, v] : *row)
    {
      acc[c] += w * v;
    }
  }
  return Row(acc.begin(), acc.end());
}

SparseMap from_rows(const std::vector<Row> &rows, int cols)
{
  SparseMap m;
  m.cols = cols;
  for (const auto &r : rows)
  {
    m.push_row(r);
  }
  m.rows = static_cast<int>(rows.size());
  return m;
}

}  // namespace

SparseMap build_N(const SurfaceMesh &sm, const VolumeMesh &vm, int page)
{
  const int ns = static_cast<int>(sm.size());
  std::vector<Row> rows(ns);
  bool any = false;
  for (int s = 0; s < ns; ++s)
  {
    const auto &col = vm.fiber_columns[s];
    const SurfaceNode &node = sm.nodes[s];
    if (node.binding >= 0 || (page >= 0 && node.page != page))
    {
      continue;
    }
    if (col.empty())
    {
      continue;
    }
    const int L = static_cast<int>(col.size()) - 1;
    Row r;
    for (int l = 0; l <= L; ++l)
    {
      r.emplace_back(col[l], (l == 0 || l == L) ? 0.5 / L : 1.0 / L);
    }
    rows[s] = std::move(r);
    any = true;
  }
  if (page >= 0 && !any)
  {
    fail(ErrorKind::Mesh, "build_N: no fiber columns for page " + std::to_string(page));
  }
  return from_rows(rows, static_cast<int>(vm.size()));
}

SparseMap build_N_foliation(const SurfaceMesh &sm, const VolumeMesh &vm)
{
  const int ns = static_cast<int>(sm.size());
  std::vector<std::vector<const FoliationLine *>> through(ns);
  for (const auto &per_binding : vm.sections)
  {
    for (const auto &st : per_binding)
    {
      for (const auto &line : st.lines)
      {
        if (line.surface_node >= 0 && sm.nodes[line.surface_node].binding < 0)
        {
          through[line.surface_node].push_back(&line);
        }
      }
    }
  }
  std::vector<Row> rows(ns);
  for (int s = 0; s < ns; ++s)
  {
    const SurfaceNode &node = sm.nodes[s];
    if (node.binding >= 0 || node.sleeve_binding < 0 || !vm.fiber_columns[s].empty())
    {
      continue;
    }
    const auto &lines = through[s];
    if (lines.size() != 2)
    {
      fail(ErrorKind::Mesh, "sleeve node " + std::to_string(s) + " lies on " +
                                std::to_string(lines.size()) + " foliation lines (expected 2)");
    }
    // One polyline from the outer end of the first line through the trace
    // node to the outer end of the second.
    std::vector<int> path(lines[0]->nodes.rbegin(), lines[0]->nodes.rend());
    path.insert(path.end(), lines[1]->nodes.begin() + 1, lines[1]->nodes.end());
    std::map<int, double> w;
    double length = 0.0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
    {
      const double d = (vm.nodes[path[i + 1]] - vm.nodes[path[i]]).norm();
      w[path[i]] += 0.5 * d;
      w[path[i + 1]] += 0.5 * d;
      length += d;
    }
    if (!(length > 0.0))
    {
      fail(ErrorKind::Mesh, "degenerate foliation line through sleeve node " + std::to_string(s));
    }
    Row r;
    for (const auto &[c, v] : w)
    {
      r.emplace_back(c, v / length);
    }
    rows[s] = std::move(r);
  }
  return from_rows(rows, static_cast<int>(vm.size()));
}

double bump(double r)
{
  if (std::abs(r) >= 1.0)
  {
    return 0.0;
  }
  return std::exp(1.0 - 1.0 / (1.0 - r * r));
}

double default_c_r(const VolumeMesh &vm)
{
  return 0.5 * vm.min_inscribed_factor;
}

SparseMap build_P(const VolumeMesh &vm, int binding, double c_r)
{
  if (c_r <= 0.0)
  {
    c_r = default_c_r(vm);
  }
  int rows_n = 0;
  for (const auto &per_binding : vm.sections)
  {
    for (const auto &st : per_binding)
    {
      rows_n = std::max(rows_n, st.surface_node + 1);
    }
  }
  std::vector<Row> rows(rows_n);
  const double radius = c_r * vm.eps;
  for (std::size_t m = 0; m < vm.sections.size(); ++m)
  {
    if (binding >= 0 && static_cast<int>(m) != binding)
    {
      continue;
    }
    for (const auto &st : vm.sections[m])
    {
      if (st.inscribed_factor < c_r * (1.0 - 1e-12))
      {
        std::ostringstream os;
        os << "binding " << m << " station " << st.station << ": inscribed factor "
           << st.inscribed_factor << " below the mollifier radius factor " << c_r;
        fail(ErrorKind::Geometry, os.str());
      }
      Row r;
      double total = 0.0;
      for (std::size_t j = 0; j < st.nodes.size(); ++j)
      {
        const double w = bump(st.zeta[j].norm() / radius) * st.area[j];
        if (w > 0.0)
        {
          r.emplace_back(st.nodes[j], w);
          total += w;
        }
      }
      if (r.empty() || !(total > 0.0))
      {
        std::ostringstream os;
        os << "empty mollifier stencil at binding " << m << " station " << st.station
           << " (radius " << radius << "); refine the cross-section";
        fail(ErrorKind::Mesh, os.str());
      }
      std::sort(r.begin(), r.end());
      for (auto &e : r)
      {
        e.second /= total;
      }
      rows[st.surface_node] = std::move(r);
    }
  }
  return from_rows(rows, static_cast<int>(vm.size()));
}

SparseMap build_K(const SurfaceMesh &sm, const VolumeMesh &vm)
{
  const double scale = 1.0 / std::sqrt(2.0 * vm.eps);
  SparseMap k;
  k.cols = static_cast<int>(sm.size());
  for (std::size_t v = 0; v < vm.size(); ++v)
  {
    const int f = vm.foot[v];
    if (f < 0 || f >= k.cols)
    {
      fail(ErrorKind::Geometry, "foliation coverage: volume node " + std::to_string(v) +
                                    " has no foot point");
    }
    k.push_row({{f, scale}});
  }
  return k;
}

TransferOps build_transfer(const SurfaceMesh &sm, const VolumeMesh &vm, double c_r)
{
  TransferOps ops;
  ops.eps = vm.eps;
  ops.c_r = c_r > 0.0 ? c_r : default_c_r(vm);
  const int ns = static_cast<int>(sm.size());
  const int nv = static_cast<int>(vm.size());
  ops.N = build_N(sm, vm);
  ops.N_fol = build_N_foliation(sm, vm);
  ops.P = build_P(vm, -1, ops.c_r);
  ops.K = build_K(sm, vm);
  if (ops.P.rows < ns)
  {
    SparseMap padded = ops.P;
    for (int i = ops.P.rows; i < ns; ++i)
    {
      padded.push_row({});
    }
    ops.P = std::move(padded);
  }

  const double scale = std::sqrt(2.0 * vm.eps);
  ops.stencil.assign(ns, JStencil::Fiber);
  ops.blend.assign(ns, 0.0);
  std::vector<Row> rows(ns);
  for (int s = 0; s < ns; ++s)
  {
    const SurfaceNode &node = sm.nodes[s];
    if (node.binding >= 0)
    {
      if (ops.P.row_empty(s))
      {
        fail(ErrorKind::Mesh, "missing mollifier stencil at binding node " + std::to_string(s));
      }
      const Row p = row_of(ops.P, s);
      rows[s] = combine({{scale, &p}});
      ops.stencil[s] = JStencil::Binding;
      ops.blend[s] = 1.0;
    }
    else if (!ops.N.row_empty(s))
    {
      const Row n = row_of(ops.N, s);
      rows[s] = combine({{scale, &n}});
    }
    else if (node.sleeve_binding >= 0)
    {
      const int m = node.sleeve_binding;
      const auto &sections = vm.sections.at(m);
      const int station = node.sleeve_station;
      if (station < 0 || station >= static_cast<int>(sections.size()))
      {
        fail(ErrorKind::Mesh, "sleeve node " + std::to_string(s) + " refers to missing station " +
                                  std::to_string(station));
      }
      if (ops.P.row_empty(sections[station].surface_node))
      {
        fail(ErrorKind::Mesh, "missing mollifier stencil at binding " + std::to_string(m) +
                                  " station " + std::to_string(station));
      }
      // Filled below once the sleeve widths are known.
      ops.stencil[s] = JStencil::Blend;
    }
    else
    {
      fail(ErrorKind::Mesh, "surface node " + std::to_string(s) + " has no averaging stencil");
    }
  }

  // Sleeve widths a_m eps from the outermost sleeve rows (the Gamma rows).
  std::vector<double> width(vm.sections.size(), 0.0);
  for (int s = 0; s < ns; ++s)
  {
    const SurfaceNode &node = sm.nodes[s];
    if (node.sleeve_binding >= 0 && node.binding < 0)
    {
      width[node.sleeve_binding] = std::max(width[node.sleeve_binding], node.sleeve_distance);
    }
  }
  for (int s = 0; s < ns; ++s)
  {
    if (ops.stencil[s] != JStencil::Blend)
    {
      continue;
    }
    const SurfaceNode &node = sm.nodes[s];
    const int m = node.sleeve_binding;
    const double w = std::clamp(1.0 - node.sleeve_distance / width[m], 0.0, 1.0);
    const int bnode = vm.sections[m][node.sleeve_station].surface_node;
    const Row nf = row_of(ops.N_fol, s);
    const Row p = row_of(ops.P, bnode);
    if (nf.empty())
    {
      fail(ErrorKind::Mesh, "missing foliation average at sleeve node " + std::to_string(s));
    }
    rows[s] = combine({{scale * (1.0 - w), &nf}, {scale * w, &p}});
    ops.blend[s] = w;
  }
  ops.J = from_rows(rows, nv);
  return ops;
}

// ---------------------------------------------------------------------------
// Shortening map
// ---------------------------------------------------------------------------

namespace
{

// 5-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 5> gl_x = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                        0.5384693101056831, 0.9061798459386640};
constexpr std::array<double, 5> gl_w = {0.2369268850561891, 0.4786286704993665,
                                        0.5688888888888889, 0.4786286704993665,
                                        0.2369268850561891};

double bump_profile(double t, double a)
{
  return bump(2.0 * t / a - 1.0);
}

double bump_primitive(double t, double a)
{
  t = std::clamp(t, 0.0, a);
  constexpr int panels = 64;
  const double h = t / panels;
  double s = 0.0;
  for (int p = 0; p < panels; ++p)
  {
    const double c = (p + 0.5) * h;
    for (int q = 0; q < 5; ++q)
    {
      s += gl_w[q] * bump_profile(c + 0.5 * h * gl_x[q], a);
    }
  }
  return 0.5 * h * s;
}

}  // namespace

ShorteningMap shortening_map(double a, double a_m, double eps)
{
  if (!(a > a_m * eps))
  {
    std::ostringstream os;
    os << "shortening map needs page depth a = " << a << " > a_m eps = " << a_m * eps;
    fail(ErrorKind::Geometry, os.str());
  }
  ShorteningMap m;
  m.a = a;
  m.a_m = a_m;
  m.eps = eps;
  m.shift = a_m * eps;
  m.bump_integral = bump_primitive(a, a);
  if (m.shift >= m.bump_integral)
  {
    std::ostringstream os;
    os << "shortening map is not monotone: shift " << m.shift << " exceeds bump mass "
       << m.bump_integral;
    fail(ErrorKind::Geometry, os.str());
  }
  return m;
}

double ShorteningMap::operator()(double t) const
{
  return t + shift * (1.0 - bump_primitive(t, a) / bump_integral);
}

double ShorteningMap::derivative(double t) const
{
  return 1.0 - shift * bump_profile(t, a) / bump_integral;
}

ShorteningSamples sample_shortening(const ShorteningMap &map, int samples)
{
  ShorteningSamples out;
  out.min_slope = 1e300;
  for (int i = 0; i < samples; ++i)
  {
    const double t = map.a * i / (samples - 1);
    const double p = map(t), d = map.derivative(t);
    out.t.push_back(t);
    out.phi.push_back(p);
    out.dphi.push_back(d);
    out.max_shift = std::max(out.max_shift, std::abs(p - t));
    out.max_slope_dev = std::max(out.max_slope_dev, std::abs(d - 1.0));
    out.min_slope = std::min(out.min_slope, d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Audits
// ---------------------------------------------------------------------------

bool AuditReport::pass() const
{
  return std::all_of(records.begin(), records.end(), [](const AuditRecord &r) { return r.pass; }) &&
         std::all_of(slopes.begin(), slopes.end(), [](const AuditSlope &s) { return s.pass; });
}

void AuditReport::append(const AuditReport &other)
{
  if (h == 0.0)
  {
    h = other.h;
    layers = other.layers;
  }
  records.insert(records.end(), other.records.begin(), other.records.end());
  slopes.insert(slopes.end(), other.slopes.begin(), other.slopes.end());
  warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
}

namespace
{

double quad(const SparseSym &a, const Eigen::VectorXd &x)
{
  Eigen::VectorXd y;
  spmv(a, x, y);
  return x.dot(y);
}

double safe_ratio(double lhs, double rhs)
{
  if (rhs == 0.0)
  {
    return lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return lhs / rhs;
}

AuditRecord make_record(const char *name, double eps, int index, double lhs, double rhs,
                        double bound = 0.0)
{
  AuditRecord r;
  r.inequality = name;
  r.eps = eps;
  r.index = index;
  r.lhs = lhs;
  r.rhs = rhs;
  r.ratio = safe_ratio(lhs, rhs);
  r.bound = bound;
  r.pass = std::isfinite(r.ratio) && (bound == 0.0 || r.ratio <= bound);
  return r;
}

// Indices strictly below Lambda = values[cap], with the guards on Lambda.
std::vector<int> below_cap(const EigenResult &eig, int cap_index, double eps, const char *side,
                           std::vector<std::string> &warnings)
{
  std::vector<int> out;
  if (eig.values.empty())
  {
    return out;
  }
  const int cap = std::min<int>(cap_index, static_cast<int>(eig.values.size()) - 1);
  const double lambda = eig.values[cap];
  std::ostringstream os;
  if (lambda * eps >= 0.5)
  {
    os << side << ": Lambda * eps = " << lambda * eps << " >= 0.5 (Lambda = " << lambda << ")";
    warnings.push_back(os.str());
    log_warn(os.str());
    os.str("");
  }
  for (const auto &c : eig.clusters)
  {
    if (c[0] < cap && c[1] >= cap)
    {
      os << side << ": Lambda = lambda_" << cap << " lies inside the cluster [" << c[0] << ", "
         << c[1] << "]; choose Lambda in a spectral gap";
      warnings.push_back(os.str());
      log_warn(os.str());
      os.str("");
    }
  }
  const double cut = lambda - cluster_tolerance * std::max(1.0, std::abs(lambda));
  for (int i = 0; i < cap; ++i)
  {
    if (eig.values[i] < cut)
    {
      out.push_back(i);
    }
  }
  return out;
}

}  // namespace

AuditReport audit_transfer(const FemPair &limit, const FemPair &fat, const TransferOps &ops,
                           const EigenResult &eig_limit, const EigenResult &eig_fat,
                           const TransferAuditOptions &opts)
{
  namespace an = audit_names;
  AuditReport rep;
  const double eps = ops.eps;
  const double rayleigh_bound = 1.0 + opts.rayleigh_c * std::sqrt(eps);
  if (ops.J.rows != limit.size() || ops.J.cols != fat.size())
  {
    fail(ErrorKind::Size, "audit_transfer: J does not map the fattened DOFs onto the surface DOFs");
  }
  // Relative size under which an energy counts as zero.
  constexpr double zero_energy = 1e-10;

  auto fat_idx = below_cap(eig_fat, opts.cap_index, eps, "fattened", rep.warnings);
  auto lim_idx = below_cap(eig_limit, opts.cap_index, eps, "limit", rep.warnings);
  // Both sides audit the same indices: an exact cluster on one side cuts the
  // mesh-split copy on the other.
  const std::size_t common = std::min(fat_idx.size(), lim_idx.size());
  fat_idx.resize(common);
  lim_idx.resize(common);

  // J side: u is an eigenfunction on M_eps.
  std::vector<std::vector<AuditRecord>> jrec(fat_idx.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t q = 0; q < fat_idx.size(); ++q)
  {
    const int i = fat_idx[q];
    const Eigen::VectorXd u = eig_fat.vectors.col(i);
    const Eigen::VectorXd ju = ops.J.apply(u);
    const double nu = quad(fat.mass, u), qe = quad(fat.stiffness, u);
    const double nj = quad(limit.mass, ju), qj = quad(limit.stiffness, ju);
    const double h1 = nu + qe;
    auto &out = jrec[q];
    out.push_back(make_record(an::j_isometry, eps, i, std::abs(nu - nj), h1));
    AuditRecord en = qe > zero_energy * h1 ? make_record(an::j_energy, eps, i, qj - qe, qe)
                                           : make_record(an::j_energy, eps, i, qj - qe, h1);
    if (!(qe > zero_energy * h1))
    {
      en.note = "zero energy: normalized by the H1 norm";
    }
    out.push_back(en);
    AuditRecord rr = make_record(an::j_rayleigh, eps, i, qj / nj, qe / nu, rayleigh_bound);
    if (!(qe > zero_energy * h1))
    {
      rr.ratio = std::abs(qj / nj) <= zero_energy ? 1.0 : std::numeric_limits<double>::infinity();
      rr.pass = rr.ratio <= rayleigh_bound;
      rr.note = "zero energy";
    }
    out.push_back(rr);
  }

  // K side: u is a limit eigenfunction.
  std::vector<std::vector<AuditRecord>> krec(lim_idx.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t q = 0; q < lim_idx.size(); ++q)
  {
    const int i = lim_idx[q];
    const Eigen::VectorXd u = eig_limit.vectors.col(i);
    const Eigen::VectorXd ku = ops.K.apply(u);
    const double nu = quad(limit.mass, u), qu = quad(limit.stiffness, u);
    const double nk = quad(fat.mass, ku), qk = quad(fat.stiffness, ku);
    const double h1 = nu + qu;
    auto &out = krec[q];
    out.push_back(make_record(an::k_isometry, eps, i, std::abs(nu - nk), h1));
    AuditRecord en = qu > zero_energy * h1 ? make_record(an::k_energy, eps, i, qk - qu, qu)
                                           : make_record(an::k_energy, eps, i, qk - qu, h1);
    if (!(qu > zero_energy * h1))
    {
      en.note = "zero energy: normalized by the H1 norm";
    }
    out.push_back(en);
    AuditRecord rr = make_record(an::k_rayleigh, eps, i, qk / nk, qu / nu, rayleigh_bound);
    if (!(qu > zero_energy * h1))
    {
      rr.ratio = std::abs(qk / nk) <= zero_energy ? 1.0 : std::numeric_limits<double>::infinity();
      rr.pass = rr.ratio <= rayleigh_bound;
      rr.note = "zero energy";
    }
    out.push_back(rr);
    const Eigen::VectorXd d = ops.J.apply(ku) - u;
    out.push_back(make_record(an::jk_composition, eps, i, std::sqrt(quad(limit.mass, d)),
                              std::sqrt(nu)));
  }
  for (auto &v : jrec)
  {
    rep.records.insert(rep.records.end(), v.begin(), v.end());
  }
  for (auto &v : krec)
  {
    rep.records.insert(rep.records.end(), v.begin(), v.end());
  }
  return rep;
}

AuditReport audit_poincare(const VolumeMesh &vm, const FemPair &fat, const TransferOps &ops,
                           const EigenResult &eig_fat, const PoincareOptions &opts)
{
  namespace an = audit_names;
  AuditReport rep;
  rep.layers = vm.layers;
  rep.h = opts.h;
  const double eps = vm.eps;
  const double c_fiber = 4.0 * eps * eps / (std::numbers::pi * std::numbers::pi);
  const double tol = 1.0 + opts.c_eps * eps + opts.c_h * opts.h * opts.h;
  const int nv = static_cast<int>(vm.size());
  if (fat.size() != nv)
  {
    fail(ErrorKind::Size, "audit_poincare: pair does not match the volume mesh");
  }

  std::vector<FemPair> slabs(vm.n_pages);
  for (int k = 0; k < vm.n_pages; ++k)
  {
    slabs[k] = assemble_volume(vm, k);
  }
  std::vector<std::vector<int>> page_columns(vm.n_pages);
  // Page of each column from the regions of its tets.
  std::vector<int> node_page(nv, -1);
  for (std::size_t t = 0; t < vm.tets.size(); ++t)
  {
    if (vm.regions[t] < vm.n_pages)
    {
      for (int v : vm.tets[t])
      {
        node_page[v] = vm.regions[t];
      }
    }
  }
  for (std::size_t s = 0; s < vm.fiber_columns.size(); ++s)
  {
    if (!vm.fiber_columns[s].empty())
    {
      const int k = node_page[vm.fiber_columns[s].front()];
      if (k >= 0)
      {
        page_columns[k].push_back(static_cast<int>(s));
      }
    }
  }

  // Worst slab ratio of one function.
  auto fiber_check = [&](const Eigen::VectorXd &u, int index, const char *note) {
    const Eigen::VectorXd nu = ops.N.apply(u);
    double worst = -1.0;
    AuditRecord best;
    for (int k = 0; k < vm.n_pages; ++k)
    {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(nv);
      for (int s : page_columns[k])
      {
        for (int v : vm.fiber_columns[s])
        {
          d[v] = u[v] - nu[s];
        }
      }
      const double lhs = quad(slabs[k].mass, d);
      const double grad = quad(slabs[k].stiffness, u);
      AuditRecord r = make_record(an::fiber_poincare, eps, index, lhs, c_fiber * grad, tol);
      if (r.ratio > worst)
      {
        worst = r.ratio;
        best = r;
        best.note = std::string(note) + ", page " + std::to_string(k);
      }
    }
    return best;
  };

  const int nr = opts.random_functions;
  const Eigen::MatrixXd rnd = nr > 0 ? seeded_block(nv, nr, opts.seed) : Eigen::MatrixXd(nv, 0);
  const int ne = static_cast<int>(eig_fat.values.size());
  std::vector<AuditRecord> fiber(nr + ne);
#pragma omp parallel for schedule(dynamic)
  for (int q = 0; q < nr + ne; ++q)
  {
    if (q < nr)
    {
      fiber[q] = fiber_check(rnd.col(q), q, "random");
    }
    else
    {
      fiber[q] = fiber_check(eig_fat.vectors.col(q - nr), q - nr, "eigenfunction");
    }
  }
  rep.records.insert(rep.records.end(), fiber.begin(), fiber.end());

  // Cross-section check for P on each binding solid, eigenfunctions only.
  for (std::size_t m = 0; m < vm.sections.size(); ++m)
  {
    const FemPair solid = assemble_volume(vm, vm.region_of_binding(static_cast<int>(m)));
    const auto &st = vm.sections[m];
    const int n = static_cast<int>(st.size());
    if (n < 2)
    {
      continue;
    }
    // Station weights from the center polyline (closed bindings wrap).
    std::vector<double> dt(n, 0.0);
    const bool closed = (st.front().center - st.back().center).norm() > 0.0 &&
                        vm.stations[m] == n;
    for (int i = 0; i + 1 < n; ++i)
    {
      const double d = (st[i + 1].center - st[i].center).norm();
      dt[i] += 0.5 * d;
      dt[i + 1] += 0.5 * d;
    }
    if (closed)
    {
      const double d = (st.front().center - st.back().center).norm();
      dt.front() += 0.5 * d;
      dt.back() += 0.5 * d;
    }
    std::vector<AuditRecord> sec(ne);
#pragma omp parallel for schedule(dynamic)
    for (int q = 0; q < ne; ++q)
    {
      const Eigen::VectorXd u = eig_fat.vectors.col(q);
      const Eigen::VectorXd pu = ops.P.apply(u);
      double lhs = 0.0;
      for (int i = 0; i < n; ++i)
      {
        const double c = pu[st[i].surface_node];
        double s = 0.0;
        for (std::size_t j = 0; j < st[i].nodes.size(); ++j)
        {
          const double d = u[st[i].nodes[j]] - c;
          s += st[i].area[j] * d * d;
        }
        lhs += dt[i] * s;
      }
      const double grad = quad(solid.stiffness, u);
      AuditRecord r = make_record(an::section_poincare, eps, q, lhs, grad * eps * eps);
      r.note = "binding " + std::to_string(m) + ", ratio = constant / eps^2";
      sec[q] = r;
    }
    rep.records.insert(rep.records.end(), sec.begin(), sec.end());
  }
  return rep;
}

AuditReport audit_binding_smallness(const VolumeMesh &vm, const FemPair &fat,
                                    const EigenResult &eig_fat)
{
  namespace an = audit_names;
  AuditReport rep;
  rep.layers = vm.layers;
  const double eps = vm.eps;
  std::vector<FemPair> solids;
  for (std::size_t m = 0; m < vm.sections.size(); ++m)
  {
    solids.push_back(assemble_volume(vm, vm.region_of_binding(static_cast<int>(m))));
  }
  const int ne = static_cast<int>(eig_fat.values.size());
  std::vector<std::array<AuditRecord, 2>> out(ne);
#pragma omp parallel for schedule(dynamic)
  for (int q = 0; q < ne; ++q)
  {
    const Eigen::VectorXd u = eig_fat.vectors.col(q);
    const double h1 = quad(fat.mass, u) + quad(fat.stiffness, u);
    double l2e = 0.0, h1e = 0.0;
    for (const auto &s : solids)
    {
      const double l = quad(s.mass, u);
      l2e += l;
      h1e += l + quad(s.stiffness, u);
    }
    out[q] = {make_record(an::binding_l2, eps, q, l2e, h1),
              make_record(an::binding_h1, eps, q, h1e, h1)};
  }
  for (const auto &r : out)
  {
    rep.records.push_back(r[0]);
    rep.records.push_back(r[1]);
  }
  return rep;
}

MetricSample metric_perturbation(const ParamChart &chart, double eps, int grid, int z_samples)
{
  MetricSample out;
  const ChartDomain &d = chart.domain;
  for (int i = 0; i < grid; ++i)
  {
    for (int j = 0; j < grid; ++j)
    {
      // Interior grid, away from collapsed sides.
      const double s = (i + 0.5) / grid, t = 0.05 + 0.9 * (j + 0.5) / grid;
      const Vec2 y(d.u1_min + s * (d.u1_max - d.u1_min), d.u2_min + t * (d.u2_max - d.u2_min));
      const FundamentalForms ff = fundamental_forms(chart, y);
      const auto dn = normal_derivatives(chart, y);
      Eigen::Matrix2d g, two;
      g << ff.E, ff.F, ff.F, ff.G;
      two << ff.e, ff.f, ff.f, ff.g;
      Eigen::Matrix2d three;
      for (int a = 0; a < 2; ++a)
      {
        for (int b = 0; b < 2; ++b)
        {
          three(a, b) = dn[a].dot(dn[b]);
        }
      }
      for (int k = 0; k < z_samples; ++k)
      {
        const double z = z_samples == 1 ? eps : -eps + 2.0 * eps * k / (z_samples - 1);
        const Eigen::Matrix2d exact = g - 2.0 * z * two + z * z * three;
        const Eigen::Matrix2d stated = g - z * two;
        // g_offset - g_product = B g_offset.
        const Eigen::Matrix2d be = (exact - g) * exact.inverse();
        const Eigen::Matrix2d bs = (stated - g) * stated.inverse();
        out.exact = std::max(out.exact, be.norm());
        out.stated = std::max(out.stated, bs.norm());
        out.exact_entries = out.exact_entries.cwiseMax(be.cwiseAbs());
        out.stated_entries = out.stated_entries.cwiseMax(bs.cwiseAbs());
      }
    }
  }
  return out;
}

AuditReport audit_metric(const ParamChart &chart, double eps)
{
  namespace an = audit_names;
  AuditReport rep;
  const MetricSample s = metric_perturbation(chart, eps);
  auto entries = [](const Eigen::Matrix2d &m) {
    std::ostringstream os;
    os << "max |B_ij| = [[" << m(0, 0) << ", " << m(0, 1) << "], [" << m(1, 0) << ", " << m(1, 1)
       << "]]";
    return os.str();
  };
  AuditRecord e = make_record(an::metric_exact, eps, -1, s.exact, 1.0);
  e.note = entries(s.exact_entries);
  AuditRecord l = make_record(an::metric_stated, eps, -1, s.stated, 1.0);
  l.note = entries(s.stated_entries);
  rep.records = {e, l};
  return rep;
}

void check_sweep_decrease(AuditReport &sweep, const std::vector<std::string> &names, double floor)
{
  std::map<std::pair<std::string, int>, std::map<double, double>> series;
  for (const auto &r : sweep.records)
  {
    if (std::find(names.begin(), names.end(), r.inequality) != names.end())
    {
      series[{r.inequality, r.index}][r.eps] = std::abs(r.ratio);
    }
  }
  for (const auto &[key, pts] : series)
  {
    if (pts.size() < 2)
    {
      continue;
    }
    // Walk from the largest eps down; growth below the floor is noise.
    double worst = 0.0, prev = pts.rbegin()->second;
    for (auto it = std::next(pts.rbegin()); it != pts.rend(); ++it)
    {
      const double v = it->second;
      if (v > floor || prev > floor)
      {
        worst = std::max(worst, v - prev);
      }
      prev = v;
    }
    AuditRecord r;
    r.inequality = key.first + "-decrease";
    r.index = key.second;
    r.eps = pts.begin()->first;
    r.lhs = worst;
    r.rhs = floor;
    r.ratio = worst;
    r.pass = worst <= 0.0;
    r.note = "largest increase of the defect magnitude along the sweep";
    sweep.records.push_back(r);
  }
}

void fit_audit_slopes(AuditReport &sweep, const std::vector<SlopeWindow> &windows)
{
  std::map<std::pair<std::string, int>, std::map<double, double>> series;
  for (const auto &r : sweep.records)
  {
    series[{r.inequality, r.index}][r.eps] = r.ratio;
  }
  for (const auto &w : windows)
  {
    for (const auto &[key, pts] : series)
    {
      if (key.first != w.inequality || pts.size() < 3)
      {
        continue;
      }
      std::vector<std::pair<double, double>> xy(pts.begin(), pts.end());
      AuditSlope s;
      s.inequality = key.first;
      s.index = key.second;
      s.min_slope = w.min_slope;
      s.max_slope = w.max_slope;
      try
      {
        const RateFit f = fit_rate(xy);
        s.slope = f.slope;
        s.width = f.width;
        s.points = f.points;
        s.pass = f.slope >= w.min_slope && f.slope <= w.max_slope;
      }
      catch (const Error &err)
      {
        // All-zero series (flat charts) carry no rate.
        s.points = 0;
        s.pass = true;
        sweep.warnings.push_back(key.first + " index " + std::to_string(key.second) + ": " +
                                 err.what());
      }
      sweep.slopes.push_back(s);
    }
  }
}

}  // namespace openbook
