// SPDX-License-Identifier: Apache-2.0
#include "openbook/study.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "openbook/error.hpp"
#include "openbook/fem.hpp"
#include "openbook/log.hpp"
#include "openbook/mesh.hpp"
#include "openbook/spec_io.hpp"

namespace openbook
{

using nlohmann::json;

// ---------------------------------------------------------------------------
// Plan
// ---------------------------------------------------------------------------

namespace
{

const std::vector<std::string> known_audits = {"transfer", "poincare", "binding", "metric"};

std::vector<double> number_list(const JsonReader &r)
{
  std::vector<double> out;
  for (std::size_t i = 0; i < r.size(); ++i)
  {
    const JsonReader c = r.at(i);
    if (!c.node().is_number() || !std::isfinite(c.node().get<double>()))
    {
      c.error("expected a finite number");
    }
    out.push_back(c.node().get<double>());
  }
  return out;
}

}  // namespace

StudyPlan plan_from_json(const json &doc, const std::string &base_dir)
{
  namespace fs = std::filesystem;
  StudyPlan p;
  const JsonReader r(doc, "");
  if (!doc.is_object())
  {
    r.error("expected an object");
  }
  r.allow_only({"geometry", "eps", "n_eigs", "surface", "volume", "ladder", "max_ladder",
                "audits", "solver", "oracle", "output", "seed"});
  p.geometry = r.string("geometry");
  fs::path gp(p.geometry);
  if (gp.is_relative())
  {
    gp = fs::path(base_dir) / gp;
  }
  p.spec = load_spec(gp.string());
  p.spec.finalize();

  p.eps = number_list(r.child("eps"));
  p.n_eigs = r.integer("n_eigs", p.n_eigs);
  p.ladder = r.integer("ladder", p.ladder);
  p.max_ladder = r.integer("max_ladder", std::max(p.ladder, p.max_ladder));
  if (r.has("surface"))
  {
    const JsonReader s = r.child("surface");
    s.allow_only({"h"});
    p.surface_h = s.number("h", p.surface_h);
  }
  if (r.has("volume"))
  {
    const JsonReader v = r.child("volume");
    v.allow_only({"h", "layers", "sleeve_intervals"});
    p.volume.h = v.number("h", p.volume.h);
    if (v.has("layers"))
    {
      const JsonReader l = v.child("layers");
      if (l.node().is_number_integer())
      {
        p.volume.layers.assign(p.eps.size(), l.node().get<int>());
      }
      else
      {
        for (double x : number_list(l))
        {
          if (x != std::floor(x))
          {
            l.error("expected integer layer counts");
          }
          p.volume.layers.push_back(static_cast<int>(x));
        }
      }
    }
    p.volume.sleeve_intervals = v.integer("sleeve_intervals", 0);
  }
  if (r.has("audits"))
  {
    const JsonReader a = r.child("audits");
    for (std::size_t i = 0; i < a.size(); ++i)
    {
      const JsonReader c = a.at(i);
      if (!c.node().is_string())
      {
        c.error("expected a string");
      }
      const std::string name = c.node().get<std::string>();
      if (std::find(known_audits.begin(), known_audits.end(), name) == known_audits.end())
      {
        c.error("unknown audit '" + name + "'");
      }
      p.audits.push_back(name);
    }
  }
  if (r.has("solver"))
  {
    const JsonReader s = r.child("solver");
    s.allow_only({"preconditioner", "tol", "max_iter"});
    if (s.has("preconditioner"))
    {
      try
      {
        p.precond = preconditioner_from_string(s.string("preconditioner"));
      }
      catch (const Error &e)
      {
        s.error("preconditioner", e.what());
      }
    }
    p.tol = s.number("tol", p.tol);
    p.max_iter = s.integer("max_iter", p.max_iter);
  }
  if (r.has("oracle"))
  {
    const JsonReader o = r.child("oracle");
    o.allow_only({"case", "k", "l", "a", "m_max", "elements"});
    p.oracle.kind = o.string("case", p.oracle.kind);
    p.oracle.k = o.integer("k", 0);
    p.oracle.l = o.number("l", 0.0);
    p.oracle.a = o.number("a", 0.0);
    p.oracle.axisym.m_max = o.integer("m_max", p.oracle.axisym.m_max);
    p.oracle.axisym.elements = o.integer("elements", p.oracle.axisym.elements);
    const std::vector<std::string> kinds = {"auto", "none", "flat-book", "axisymmetric"};
    if (std::find(kinds.begin(), kinds.end(), p.oracle.kind) == kinds.end())
    {
      o.error("case", "unknown oracle case '" + p.oracle.kind + "'");
    }
    if (p.oracle.kind == "flat-book" && (p.oracle.k < 1 || p.oracle.l <= 0.0 || p.oracle.a <= 0.0))
    {
      o.error("flat-book oracle needs k >= 1, l > 0 and a > 0");
    }
  }
  if (r.has("output"))
  {
    const JsonReader o = r.child("output");
    o.allow_only({"dir", "report", "gaps"});
    p.out_dir = o.string("dir", p.out_dir);
    p.report_file = o.string("report", p.report_file);
    p.gaps_file = o.string("gaps", p.gaps_file);
  }
  if (r.has("seed"))
  {
    const JsonReader s = r.child("seed");
    if (!s.node().is_number_integer() || s.node().get<std::int64_t>() < 0)
    {
      s.error("expected a non-negative integer");
    }
    p.seed = s.node().get<std::uint64_t>();
  }
  validate_plan(p);
  return p;
}

StudyPlan load_plan(const std::string &path)
{
  const json doc = read_json_file(path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  return plan_from_json(doc, base.empty() ? "." : base.string());
}

void validate_plan(const StudyPlan &p)
{
  auto bad = [](const std::string &where, const std::string &what) {
    fail(ErrorKind::Config, where + ": " + what);
  };
  if (p.eps.empty())
  {
    bad("/eps", "at least one eps is required");
  }
  for (std::size_t i = 0; i < p.eps.size(); ++i)
  {
    if (!(p.eps[i] > 0.0))
    {
      bad("/eps/" + std::to_string(i), "eps must be positive");
    }
    if (i > 0 && !(p.eps[i] < p.eps[i - 1]))
    {
      bad("/eps/" + std::to_string(i), "eps must be descending");
    }
  }
  const double e0 = epsilon0(p.spec);
  if (p.eps.front() > e0)
  {
    std::ostringstream os;
    os << "eps " << p.eps.front() << " exceeds the fattening bound eps0 = " << e0;
    bad("/eps/0", os.str());
  }
  if (p.n_eigs < 1)
  {
    bad("/n_eigs", "n_eigs must be at least 1");
  }
  if (p.surface_h <= 0.0)
  {
    bad("/surface/h", "h must be positive");
  }
  if (p.volume.h <= 0.0)
  {
    bad("/volume/h", "h must be positive");
  }
  if (p.ladder < 1 || p.ladder > 4)
  {
    bad("/ladder", "ladder must lie in [1, 4]");
  }
  if (p.max_ladder < p.ladder || p.max_ladder > 4)
  {
    bad("/max_ladder", "max_ladder must lie in [ladder, 4]");
  }
  if (!p.volume.layers.empty())
  {
    if (p.volume.layers.size() != p.eps.size())
    {
      bad("/volume/layers", "one layer count per eps is required");
    }
    for (std::size_t i = 0; i < p.volume.layers.size(); ++i)
    {
      if (p.volume.layers[i] < 2 || p.volume.layers[i] % 2 != 0)
      {
        bad("/volume/layers/" + std::to_string(i), "layer counts must be even and >= 2");
      }
    }
  }
  if (p.volume.sleeve_intervals < 0)
  {
    bad("/volume/sleeve_intervals", "must be non-negative");
  }
  if (!(p.tol > 0.0))
  {
    bad("/solver/tol", "tol must be positive");
  }
}

json plan_to_json(const StudyPlan &p)
{
  json layers = json::array();
  for (std::size_t i = 0; i < p.eps.size(); ++i)
  {
    layers.push_back(layers_for(p, i));
  }
  return {{"geometry", p.geometry},
          {"geometry_spec", spec_to_json(p.spec)},
          {"eps", p.eps},
          {"n_eigs", p.n_eigs},
          {"ladder", p.ladder},
          {"max_ladder", p.max_ladder},
          {"surface", {{"h", p.surface_h}}},
          {"volume",
           {{"h", p.volume.h}, {"layers", layers}, {"sleeve_intervals", sleeve_intervals_for(p)}}},
          {"audits", p.audits},
          {"solver",
           {{"preconditioner", to_string(p.precond)}, {"tol", p.tol}, {"max_iter", p.max_iter}}},
          {"oracle",
           {{"case", p.oracle.kind},
            {"k", p.oracle.k},
            {"l", p.oracle.l},
            {"a", p.oracle.a},
            {"m_max", p.oracle.axisym.m_max},
            {"elements", p.oracle.axisym.elements}}},
          {"output", {{"dir", p.out_dir}, {"report", p.report_file}, {"gaps", p.gaps_file}}},
          {"seed", p.seed}};
}

int layers_for(const StudyPlan &p, std::size_t i)
{
  if (!p.volume.layers.empty())
  {
    return p.volume.layers.at(i);
  }
  int l = std::max(4, static_cast<int>(std::ceil(8.0 * p.eps.at(i) / p.volume.h - 1e-12)));
  return l + (l % 2);
}

int sleeve_intervals_for(const StudyPlan &p)
{
  if (p.volume.sleeve_intervals > 0)
  {
    return p.volume.sleeve_intervals;
  }
  double a = 0.0;
  for (double w : p.spec.sleeve_widths)
  {
    a = std::max(a, w);
  }
  return std::max(2, static_cast<int>(std::ceil(2.0 * a - 1e-12)));
}

SolverOpts solver_opts(const StudyPlan &p, int n_eigs)
{
  SolverOpts so;
  so.n_eigs = n_eigs;
  so.tol = p.tol;
  so.max_iter = p.max_iter;
  so.precond = p.precond;
  so.seed = p.seed;
  return so;
}

// ---------------------------------------------------------------------------
// Spectra
// ---------------------------------------------------------------------------

namespace
{

SpectrumRung rung_from(const EigenResult &r, int refine, double h, int dofs)
{
  SpectrumRung g;
  g.refine = refine;
  g.h = h;
  g.dofs = dofs;
  g.values = r.values;
  g.residuals = r.residuals;
  g.iterations = r.iterations;
  g.converged = r.converged;
  return g;
}

}  // namespace

SpectrumRung limit_rung(const OpenBookSpec &spec, double h, int refine, const SolverOpts &opts,
                        EigenResult *keep)
{
  SurfaceMeshOptions mo;
  mo.h = h;
  mo.refine = refine;
  SurfaceMesh sm = triangulate_pages(spec, mo);
  compute_metric_cache(spec, sm);
  const FemPair pair = assemble_surface(sm);
  EigenResult r = solve_lowest(pair, opts);
  SpectrumRung g = rung_from(r, refine, h / (1 << refine), pair.size());
  log_info("limit rung " + std::to_string(refine) + ": " + std::to_string(pair.size()) +
           " dofs, " + std::to_string(r.iterations) + " iterations");
  if (keep)
  {
    *keep = std::move(r);
  }
  return g;
}

SpectrumRung fattened_rung(const OpenBookSpec &spec, double eps, const VolumeMeshOptions &mesh,
                           const SolverOpts &opts, EigenResult *keep)
{
  const VolumeBuild vb = assemble_volume_mesh(spec, eps, mesh);
  const FemPair pair = assemble_volume(vb.volume);
  EigenResult r = solve_lowest(pair, opts);
  SpectrumRung g = rung_from(r, mesh.refine, mesh.h / (1 << mesh.refine), pair.size());
  std::ostringstream os;
  os << "fattened eps " << eps << " rung " << mesh.refine << ": " << pair.size() << " dofs, "
     << r.iterations << " iterations";
  log_info(os.str());
  if (keep)
  {
    *keep = std::move(r);
  }
  return g;
}

LadderValues extrapolate(const std::vector<SpectrumRung> &rungs, int n)
{
  LadderValues out;
  if (rungs.empty())
  {
    return out;
  }
  const SpectrumRung &fine = rungs.back();
  const int count = std::min<int>(n, static_cast<int>(fine.values.size()));
  for (int i = 0; i < count; ++i)
  {
    if (rungs.size() == 1)
    {
      out.values.push_back(fine.values[i]);
      out.errors.push_back(0.0);
      continue;
    }
    const SpectrumRung &coarse = rungs[rungs.size() - 2];
    const Extrapolation e = richardson(coarse.values.at(i), fine.values[i]);
    out.values.push_back(e.value);
    out.errors.push_back(e.error);
    out.nested = out.nested && e.nested;
  }
  return out;
}

namespace
{

// (k, l, a) when the book is k equal flat rectangles l x a glued along one
// side u2 = const to a straight binding of length l (or one unbound page).
std::optional<std::array<double, 3>> flat_book_shape(const OpenBookSpec &spec)
{
  if (spec.pages.empty() || spec.bindings.size() > 1)
  {
    return std::nullopt;
  }
  const ChartDomain &d0 = spec.pages[0].domain;
  const double l = d0.u1_max - d0.u1_min, a = d0.u2_max - d0.u2_min;
  for (const auto &c : spec.pages)
  {
    const ChartDomain &d = c.domain;
    if (c.kind != ChartKind::FlatRectangle || std::abs(d.u1_max - d.u1_min - l) > 1e-12 * l ||
        std::abs(d.u2_max - d.u2_min - a) > 1e-12 * a)
    {
      return std::nullopt;
    }
  }
  if (spec.bindings.empty())
  {
    if (spec.pages.size() != 1)
    {
      return std::nullopt;
    }
    return std::array<double, 3>{1.0, l, a};
  }
  const BindingCurve &b = spec.bindings[0];
  if (b.kind() != CurveKind::Segment || std::abs(b.length() - l) > 1e-12 * l ||
      spec.incidences.size() != 1 || spec.incidences[0].entries.size() != spec.pages.size())
  {
    return std::nullopt;
  }
  for (const auto &e : spec.incidences[0].entries)
  {
    if (e.side != Side::U2Min && e.side != Side::U2Max)
    {
      return std::nullopt;
    }
  }
  return std::array<double, 3>{static_cast<double>(spec.pages.size()), l, a};
}

}  // namespace

std::optional<OracleSpectrum> oracle_for(const OpenBookSpec &spec, const OracleRequest &req,
                                         int count)
{
  if (req.kind == "none")
  {
    return std::nullopt;
  }
  if (req.kind == "flat-book")
  {
    return flat_book_spectrum(req.k, req.l, req.a, count);
  }
  if (req.kind == "auto")
  {
    if (const auto shape = flat_book_shape(spec))
    {
      return flat_book_spectrum(static_cast<int>((*shape)[0]), (*shape)[1], (*shape)[2], count);
    }
  }
  if (req.kind == "axisymmetric" || req.kind == "auto")
  {
    try
    {
      check_axisymmetric(spec);
    }
    catch (const Error &e)
    {
      if (req.kind == "axisymmetric")
      {
        throw;
      }
      log_debug(std::string("no oracle: ") + e.what());
      return std::nullopt;
    }
    return axisym_spectrum(spec, count, req.axisym);
  }
  fail(ErrorKind::Config, "unknown oracle case '" + req.kind + "'");
}

// ---------------------------------------------------------------------------
// Study
// ---------------------------------------------------------------------------

void compute_gaps(const StudyPlan &plan, StudyReport &rep)
{
  rep.gaps.clear();
  rep.diagnostics.clear();
  rep.valid = true;
  const int n = plan.n_eigs;
  const auto &lim = rep.limit.converged;
  for (int k = 0; k < n; ++k)
  {
    IndexDiagnostics d;
    d.n = k;
    if (k >= static_cast<int>(lim.values.size()))
    {
      continue;
    }
    const double ll = lim.values[k];
    const double floor = exact_mode_floor * std::max(1.0, std::abs(ll));
    std::vector<GapRow> rows;
    for (const auto &f : rep.fattened)
    {
      if (k >= static_cast<int>(f.converged.values.size()))
      {
        continue;
      }
      GapRow g;
      g.n = k;
      g.eps = f.eps;
      g.lambda_limit = ll;
      g.lambda_eps = f.converged.values[k];
      g.gap = std::abs(ll - g.lambda_eps);
      g.error = lim.errors[k] + f.converged.errors[k];
      g.refined = f.rungs.size() >= 2;
      rows.push_back(g);
    }
    if (rows.empty())
    {
      continue;
    }
    d.exact_mode = std::all_of(rows.begin(), rows.end(),
                               [&](const GapRow &g) { return g.gap < floor; });
    for (std::size_t i = 1; i < rows.size(); ++i)
    {
      const double inc = rows[i].gap - rows[i - 1].gap - (rows[i].error + rows[i - 1].error) -
                         roundoff_floor * std::max(1.0, std::abs(ll));
      d.max_increase = std::max(d.max_increase, inc);
    }
    d.monotone = d.max_increase <= 0.0;
    d.strict_decrease = d.exact_mode || rows.size() < 2 || rows.back().gap < rows.front().gap;
    d.final_rel_gap = std::abs(ll) > floor ? rows.back().gap / std::abs(ll) : rows.back().gap;
    if (rows.size() >= 3 && !d.exact_mode)
    {
      std::vector<std::pair<double, double>> xy;
      for (const auto &g : rows)
      {
        xy.emplace_back(g.eps, g.gap);
      }
      try
      {
        d.slope = fit_rate(xy);
      }
      catch (const Error &e)
      {
        rep.notes.push_back("index " + std::to_string(k) + ": " + e.what());
      }
    }
    // Mesh error must stay below the eps effect at the largest eps.
    if (!d.exact_mode && !rows.front().refined)
    {
      rep.valid = false;
      rep.notes.push_back("index " + std::to_string(k) + ": single rung, no mesh error estimate");
    }
    else if (!d.exact_mode && !(rows.front().error < 0.2 * rows.front().gap))
    {
      rep.valid = false;
      std::ostringstream os;
      os << "index " << k << ": Richardson error " << rows.front().error << " is not below 20% of "
         << "the gap " << rows.front().gap << " at eps " << rows.front().eps;
      rep.notes.push_back(os.str());
    }
    rep.gaps.insert(rep.gaps.end(), rows.begin(), rows.end());
    rep.diagnostics.push_back(d);
  }
  if (!lim.nested)
  {
    rep.notes.push_back("limit ladder is not nested for some index");
  }
  for (const auto &f : rep.fattened)
  {
    if (!f.converged.nested)
    {
      std::ostringstream os;
      os << "fattened ladder at eps " << f.eps << " is not nested for some index";
      rep.notes.push_back(os.str());
    }
  }
  if (!lim.values.empty() && std::abs(lim.values[0]) > 1e-6)
  {
    rep.notes.push_back("limit lambda_0 is not zero");
  }
}

namespace
{

void run_audits_at(const StudyPlan &plan, double eps, const VolumeBuild &vb, const FemPair &fat,
                   const EigenResult &eig_fat, AuditReport &out)
{
  auto wants = [&](const char *name) {
    return std::find(plan.audits.begin(), plan.audits.end(), name) != plan.audits.end();
  };
  const bool need_ops = wants("transfer") || wants("poincare");
  TransferOps ops;
  if (need_ops)
  {
    ops = build_transfer(vb.surface, vb.volume);
  }
  if (wants("transfer"))
  {
    SurfaceMesh sm = vb.surface;
    compute_metric_cache(plan.spec, sm);
    const FemPair lim = assemble_surface(sm);
    TransferAuditOptions to;
    const EigenResult eig_lim =
        solve_lowest(lim, solver_opts(plan, std::max(plan.n_eigs, to.cap_index + 1)));
    if (!eig_lim.converged)
    {
      out.warnings.push_back("limit solve on the eps-adapted surface mesh did not converge");
    }
    AuditReport r = audit_transfer(lim, fat, ops, eig_lim, eig_fat, to);
    out.append(r);
  }
  if (wants("poincare"))
  {
    PoincareOptions po;
    po.h = plan.volume.h;
    po.seed = plan.seed + 7;
    out.append(audit_poincare(vb.volume, fat, ops, eig_fat, po));
  }
  if (wants("binding"))
  {
    out.append(audit_binding_smallness(vb.volume, fat, eig_fat));
  }
  if (wants("metric"))
  {
    for (std::size_t k = 0; k < plan.spec.pages.size(); ++k)
    {
      AuditReport m = audit_metric(plan.spec.pages[k], eps);
      for (auto &rec : m.records)
      {
        rec.index = static_cast<int>(k);
      }
      out.append(m);
    }
  }
}

VolumeMeshOptions volume_options(const StudyPlan &plan, std::size_t i, int refine)
{
  VolumeMeshOptions vo;
  vo.h = plan.volume.h;
  vo.layers = layers_for(plan, i);
  vo.sleeve_intervals = sleeve_intervals_for(plan);
  vo.refine = refine;
  vo.check_overlap = false;
  return vo;
}

void add_fattened_rung(const StudyPlan &plan, std::size_t i, FattenedSpectrum &f, bool audits,
                       AuditReport &audit_out)
{
  const int refine = static_cast<int>(f.rungs.size());
  const VolumeMeshOptions vo = volume_options(plan, i, refine);
  const int n_solve = audits ? std::max(plan.n_eigs, TransferAuditOptions{}.cap_index + 1)
                             : plan.n_eigs;
  const SolverOpts so = solver_opts(plan, n_solve);
  if (!audits)
  {
    f.rungs.push_back(fattened_rung(plan.spec, plan.eps[i], vo, so));
  }
  else
  {
    const VolumeBuild vb = assemble_volume_mesh(plan.spec, plan.eps[i], vo);
    const FemPair pair = assemble_volume(vb.volume);
    const EigenResult r = solve_lowest(pair, so);
    SpectrumRung g;
    g.refine = refine;
    g.h = vo.h / (1 << refine);
    g.dofs = pair.size();
    g.values = r.values;
    g.residuals = r.residuals;
    g.iterations = r.iterations;
    g.converged = r.converged;
    f.rungs.push_back(g);
    std::ostringstream os;
    os << "fattened eps " << plan.eps[i] << " rung " << refine << ": " << pair.size()
       << " dofs, " << r.iterations << " iterations (audited)";
    log_info(os.str());
    AuditReport a;
    a.h = vo.h;
    a.layers = vb.volume.layers;
    run_audits_at(plan, plan.eps[i], vb, pair, r, a);
    audit_out.append(a);
  }
  f.complete = f.complete && f.rungs.back().converged;
}

}  // namespace

StudyReport run_convergence(const StudyPlan &plan)
{
  validate_plan(plan);
  StudyReport rep;
  rep.plan = plan_to_json(plan);
  const bool audits = !plan.audits.empty();

  const SolverOpts so = solver_opts(plan, plan.n_eigs);
  for (int r = 0; r < plan.ladder; ++r)
  {
    rep.limit.rungs.push_back(limit_rung(plan.spec, plan.surface_h, r, so));
  }
  rep.limit.converged = extrapolate(rep.limit.rungs, plan.n_eigs);
  try
  {
    rep.limit.oracle = oracle_for(plan.spec, plan.oracle, plan.n_eigs);
  }
  catch (const Error &e)
  {
    if (plan.oracle.kind != "auto")
    {
      throw;
    }
    rep.notes.push_back(std::string("oracle unavailable: ") + e.what());
  }
  if (rep.limit.oracle)
  {
    const auto &ov = rep.limit.oracle->values;
    for (int k = 0; k < plan.n_eigs && k < static_cast<int>(ov.size()) &&
                    k < static_cast<int>(rep.limit.converged.values.size());
         ++k)
    {
      const double dev = std::abs(rep.limit.converged.values[k] - ov[k]);
      rep.limit.oracle_max_rel =
          std::max(rep.limit.oracle_max_rel, dev / std::max(1.0, std::abs(ov[k])));
    }
  }

  for (std::size_t i = 0; i < plan.eps.size(); ++i)
  {
    FattenedSpectrum f;
    f.eps = plan.eps[i];
    f.layers = layers_for(plan, i);
    f.sleeve_intervals = sleeve_intervals_for(plan);
    for (int r = 0; r < plan.ladder; ++r)
    {
      add_fattened_rung(plan, i, f, audits && r == 0, rep.audits);
    }
    f.converged = extrapolate(f.rungs, plan.n_eigs);
    rep.fattened.push_back(std::move(f));
  }
  compute_gaps(plan, rep);

  // Deepen the ladder while the mesh error is not subdominant.
  int depth = plan.ladder;
  while (!rep.valid && depth < plan.max_ladder)
  {
    log_info("study not valid at ladder depth " + std::to_string(depth) + "; deepening");
    rep.limit.rungs.push_back(limit_rung(plan.spec, plan.surface_h, depth, so));
    rep.limit.converged = extrapolate(rep.limit.rungs, plan.n_eigs);
    for (std::size_t i = 0; i < plan.eps.size(); ++i)
    {
      add_fattened_rung(plan, i, rep.fattened[i], false, rep.audits);
      rep.fattened[i].converged = extrapolate(rep.fattened[i].rungs, plan.n_eigs);
    }
    ++depth;
    rep.notes.push_back("ladder deepened to " + std::to_string(depth) + " rungs");
    compute_gaps(plan, rep);
  }

  rep.complete = std::all_of(rep.limit.rungs.begin(), rep.limit.rungs.end(),
                             [](const SpectrumRung &g) { return g.converged; }) &&
                 std::all_of(rep.fattened.begin(), rep.fattened.end(),
                             [](const FattenedSpectrum &f) { return f.complete; });
  if (!rep.complete)
  {
    rep.notes.push_back("incomplete: at least one eigensolve did not converge");
  }

  if (audits)
  {
    namespace an = audit_names;
    check_sweep_decrease(rep.audits, {an::j_isometry, an::j_energy, an::k_isometry, an::k_energy});
    fit_audit_slopes(rep.audits, {{an::binding_l2, 0.8, 1e300},
                                  {an::metric_exact, 0.9, 1.1},
                                  {an::metric_stated, 0.9, 1.1}});
    rep.audits_run = true;
  }
  rep.provenance = provenance(rep.plan, plan.seed);
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

json to_json(const SpectrumRung &g)
{
  return {{"refine", g.refine},     {"h", g.h},
          {"dofs", g.dofs},         {"values", g.values},
          {"residuals", g.residuals}, {"iterations", g.iterations},
          {"converged", g.converged}};
}

json to_json(const AuditReport &rep)
{
  json records = json::array();
  for (const auto &r : rep.records)
  {
    records.push_back({{"inequality", r.inequality},
                       {"eps", r.eps},
                       {"index", r.index},
                       {"lhs", r.lhs},
                       {"rhs", r.rhs},
                       {"ratio", r.ratio},
                       {"bound", r.bound},
                       {"pass", r.pass},
                       {"note", r.note},
                       {"h", rep.h},
                       {"layers", rep.layers}});
  }
  json slopes = json::array();
  for (const auto &s : rep.slopes)
  {
    slopes.push_back({{"inequality", s.inequality},
                      {"index", s.index},
                      {"slope", s.slope},
                      {"width", s.width},
                      {"points", s.points},
                      {"min_slope", s.min_slope},
                      {"max_slope", s.max_slope},
                      {"pass", s.pass}});
  }
  return {{"pass", rep.pass()},
          {"records", records},
          {"slopes", slopes},
          {"warnings", rep.warnings}};
}

namespace
{

json ladder_json(const LadderValues &v)
{
  return {{"values", v.values}, {"errors", v.errors}, {"nested", v.nested}};
}

}  // namespace

json to_json(const StudyReport &rep)
{
  json limit = {{"rungs", json::array()}, {"converged", ladder_json(rep.limit.converged)}};
  for (const auto &g : rep.limit.rungs)
  {
    limit["rungs"].push_back(to_json(g));
  }
  if (rep.limit.oracle)
  {
    limit["oracle"] = {{"method", rep.limit.oracle->method},
                       {"values", rep.limit.oracle->values},
                       {"accuracy", rep.limit.oracle->accuracy},
                       {"max_rel_deviation", rep.limit.oracle_max_rel}};
  }
  json fattened = json::array();
  for (const auto &f : rep.fattened)
  {
    json rungs = json::array();
    for (const auto &g : f.rungs)
    {
      rungs.push_back(to_json(g));
    }
    fattened.push_back({{"eps", f.eps},
                        {"layers", f.layers},
                        {"sleeve_intervals", f.sleeve_intervals},
                        {"rungs", rungs},
                        {"converged", ladder_json(f.converged)},
                        {"complete", f.complete}});
  }
  json gaps = json::array();
  for (const auto &g : rep.gaps)
  {
    gaps.push_back({{"n", g.n},
                    {"eps", g.eps},
                    {"lambda_limit", g.lambda_limit},
                    {"lambda_eps", g.lambda_eps},
                    {"gap", g.gap},
                    {"error", g.error},
                    {"refined", g.refined}});
  }
  json diag = json::array();
  for (const auto &d : rep.diagnostics)
  {
    json j = {{"n", d.n},
              {"exact_mode", d.exact_mode},
              {"monotone", d.monotone},
              {"max_increase", d.max_increase},
              {"strict_decrease", d.strict_decrease},
              {"final_rel_gap", d.final_rel_gap}};
    if (d.slope)
    {
      j["slope"] = {{"slope", d.slope->slope}, {"width", d.slope->width}, {"points", d.slope->points}};
    }
    diag.push_back(j);
  }
  json out = {{"plan", rep.plan},
              {"limit", limit},
              {"fattened", fattened},
              {"gaps", gaps},
              {"diagnostics", diag},
              {"valid", rep.valid},
              {"complete", rep.complete},
              {"notes", rep.notes},
              {"provenance", rep.provenance}};
  if (rep.audits_run)
  {
    out["audits"] = to_json(rep.audits);
  }
  return out;
}

CsvTable gaps_csv(const StudyReport &rep)
{
  CsvTable t;
  t.schema = "openbook-gaps";
  t.columns = {"n", "eps", "lambda_limit", "lambda_eps", "gap"};
  for (const auto &g : rep.gaps)
  {
    t.add({std::to_string(g.n), format_double(g.eps), format_double(g.lambda_limit),
           format_double(g.lambda_eps), format_double(g.gap)});
  }
  return t;
}

CsvTable eigen_csv(const std::vector<double> &values, const std::vector<double> &residuals)
{
  CsvTable t;
  t.schema = "openbook-eigenvalues";
  t.columns = {"index", "lambda", "residual"};
  for (std::size_t i = 0; i < values.size(); ++i)
  {
    t.add({std::to_string(i), format_double(values[i]),
           format_double(i < residuals.size() ? residuals[i] : 0.0)});
  }
  return t;
}

void write_study(const StudyPlan &plan, const StudyReport &report)
{
  namespace fs = std::filesystem;
  const fs::path dir(plan.out_dir);
  write_file_atomic((dir / plan.report_file).string(), to_json(report).dump(2) + "\n");
  write_file_atomic((dir / plan.gaps_file).string(), gaps_csv(report).str());
}

}  // namespace openbook
