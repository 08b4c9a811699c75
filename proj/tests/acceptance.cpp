// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance run. One line per criterion; exit status 1 if any fails.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "openbook/log.hpp"
#include "openbook/spec_io.hpp"
#include "openbook/study.hpp"

using namespace openbook;
using nlohmann::json;
using std::numbers::pi;

namespace
{

// Pinned tolerances.
constexpr double square_tol = 0.01;
constexpr double square_budget_s = 30.0;
constexpr double slab_tol = 0.02;
constexpr double star_tol = 0.01;
constexpr double main_final_gap = 0.05;
constexpr double main_budget_s = 20.0 * 60.0;
constexpr double binding_min_slope = 0.8;
constexpr double fiber_tol = 0.02;
constexpr double rayleigh_c = 3.0;
constexpr double metric_slope_tol = 0.1;
constexpr double dense_tol = 1e-8;
constexpr int dense_max_dofs = 2000;

struct Outcome
{
  bool pass = false;
  std::string detail;
};

struct Stopwatch
{
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const
  {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

OpenBookSpec book(const std::string &name)
{
  OpenBookSpec spec = load_spec(fixture(name));
  spec.finalize();
  return spec;
}

SolverOpts solver(int n)
{
  SolverOpts o;
  o.n_eigs = n;
  o.precond = Preconditioner::Factorized;
  o.tol = 1e-10;
  return o;
}

double rel_dev(double value, double ref)
{
  return std::abs(value - ref) / std::max(1.0, std::abs(ref));
}

std::string fmt(double x)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

// Neumann star graph with k unit-speed edges of length a.
std::vector<double> star_values(int k, double a, int count)
{
  std::vector<double> v;
  for (int j = 0; j <= count; ++j)
  {
    v.push_back(std::pow(j * pi / a, 2));
    for (int r = 0; r < k - 1; ++r)
    {
      v.push_back(std::pow((j + 0.5) * pi / a, 2));
    }
  }
  std::sort(v.begin(), v.end());
  v.resize(count);
  return v;
}

// Separable flat book: binding direction of length l times the star graph.
std::vector<double> flat_book_values(int k, double l, double a, int count)
{
  std::vector<double> v;
  for (double mu : star_values(k, a, count))
  {
    for (int m = 0; m <= count; ++m)
    {
      v.push_back(std::pow(m * pi / l, 2) + mu);
    }
  }
  std::sort(v.begin(), v.end());
  v.resize(count);
  return v;
}

std::vector<std::pair<double, double>> series_of(const AuditReport &rep, const std::string &name,
                                                 int index)
{
  std::map<double, double> pts;
  for (const auto &r : rep.records)
  {
    if (r.inequality == name && r.index == index)
    {
      pts[r.eps] = r.ratio;
    }
  }
  return {pts.begin(), pts.end()};
}

Outcome unit_square()
{
  const OpenBookSpec spec = book("unit_square.json");
  const std::vector<double> ref = {0.0, pi * pi, pi * pi, 2 * pi * pi, 4 * pi * pi, 4 * pi * pi};
  const int threads = omp_get_max_threads();
  omp_set_num_threads(1);
  Stopwatch sw;
  std::vector<SpectrumRung> rungs;
  for (int refine : {0, 1})
  {
    rungs.push_back(limit_rung(spec, 0.04, refine, solver(6)));
  }
  const LadderValues lv = extrapolate(rungs, 6);
  const double secs = sw.seconds();
  omp_set_num_threads(threads);
  double worst = 0.0;
  for (int i = 0; i < 6; ++i)
  {
    worst = std::max(worst, rel_dev(lv.values[i], ref[i]));
  }
  const bool ok = rungs.back().converged && worst <= square_tol && secs < square_budget_s;
  return {ok, "h=0.02 extrapolated, max rel dev " + fmt(worst) + ", " + fmt(secs) + " s on 1 thread"};
}

Outcome thin_slab()
{
  const OpenBookSpec spec = book("unit_square.json");
  const double eps = 0.05;
  const std::vector<double> ref = {pi * pi, pi * pi, 2 * pi * pi, 4 * pi * pi, 4 * pi * pi};
  std::vector<SpectrumRung> rungs;
  for (int refine : {0, 1})
  {
    VolumeMeshOptions vo;
    vo.h = 0.1;
    vo.layers = 4;
    vo.sleeve_intervals = 2;
    vo.refine = refine;
    rungs.push_back(fattened_rung(spec, eps, vo, solver(6)));
  }
  const LadderValues lv = extrapolate(rungs, 6);
  double worst = 0.0;
  for (int i = 0; i < 5; ++i)
  {
    worst = std::max(worst, rel_dev(lv.values[i + 1], ref[i]));
  }
  const bool ok = rungs.back().converged && worst <= slab_tol;
  return {ok, "box height 0.1, 5 nonzero modes, max rel dev " + fmt(worst)};
}

Outcome kirchhoff_limit()
{
  const OpenBookSpec spec = book("flat3.json");
  std::vector<SpectrumRung> rungs;
  for (int refine : {0, 1})
  {
    rungs.push_back(limit_rung(spec, 0.1, refine, solver(7)));
  }
  const LadderValues lv = extrapolate(rungs, 7);
  const std::vector<double> ref = flat_book_values(3, pi, 1.0, 7);
  double worst = 0.0;
  for (int i = 0; i < 7; ++i)
  {
    worst = std::max(worst, rel_dev(lv.values[i], ref[i]));
  }
  const bool ok = rungs.back().converged && worst <= star_tol;
  return {ok, "first 7 vs separable star-graph values, max rel dev " + fmt(worst)};
}

StudyPlan flat_book_plan(const std::filesystem::path &out)
{
  const json doc = {{"geometry", "flat3.json"},
                    {"eps", {0.2, 0.1, 0.05, 0.025}},
                    {"n_eigs", 6},
                    {"audits", {"transfer", "poincare", "binding", "metric"}},
                    {"seed", 1}};
  StudyPlan p = plan_from_json(doc, OPENBOOK_FIXTURE_DIR);
  p.out_dir = out.string();
  return p;
}

Outcome main_theorem(const StudyReport &rep, double secs)
{
  bool ok = rep.complete && rep.valid && secs < main_budget_s;
  std::ostringstream os;
  double worst_final = 0.0;
  int exact = 0;
  for (const auto &d : rep.diagnostics)
  {
    if (d.n >= 6)
    {
      continue;
    }
    if (d.exact_mode)
    {
      ++exact;
      continue;
    }
    ok = ok && d.monotone && d.strict_decrease;
    worst_final = std::max(worst_final, d.final_rel_gap);
  }
  ok = ok && worst_final <= main_final_gap && rep.diagnostics.size() >= 6;
  os << "final rel gap " << fmt(worst_final) << " at eps=0.025, " << exact
     << " modes exact at every eps, " << fmt(secs) << " s";
  if (!rep.valid)
  {
    os << ", study not valid";
  }
  return {ok, os.str()};
}

Outcome closed_binding()
{
  const json doc = {{"geometry", "disk_hemispheres.json"},
                    {"eps", {0.1, 0.05, 0.025}},
                    {"n_eigs", 4},
                    {"seed", 1}};
  StudyPlan p = plan_from_json(doc, OPENBOOK_FIXTURE_DIR);
  p.out_dir = (std::filesystem::temp_directory_path() / "openbook_acceptance_disk").string();
  const StudyReport rep = run_convergence(p);
  AxisymOptions ao;
  ao.elements = 2000;
  const OracleSpectrum oracle = axisym_spectrum(p.spec, 4, ao);
  bool ok = rep.complete;
  double final_gap = 0.0;
  for (int n = 0; n < 4; ++n)
  {
    double prev = 1e300;
    for (const auto &f : rep.fattened)
    {
      const double gap = std::abs(f.converged.values.at(n) - oracle.values[n]);
      const double floor = roundoff_floor * std::max(1.0, oracle.values[n]) + f.converged.errors.at(n);
      if (gap > floor || prev > floor)
      {
        ok = ok && gap < prev;
      }
      prev = gap;
    }
    final_gap = std::max(final_gap, rel_dev(rep.fattened.back().converged.values[n], oracle.values[n]));
  }
  std::filesystem::remove_all(p.out_dir);
  return {ok, "gaps to the axisymmetric oracle shrink over eps 0.1..0.025, final rel gap " +
                  fmt(final_gap) + ", limit FEM vs oracle " + fmt(rep.limit.oracle_max_rel)};
}

Outcome binding_smallness(const AuditReport &audits)
{
  bool ok = true;
  double worst = 1e300;
  int fitted = 0;
  for (int n = 0; n < 6; ++n)
  {
    const auto pts = series_of(audits, audit_names::binding_l2, n);
    if (pts.size() < 3)
    {
      ok = false;
      continue;
    }
    const RateFit f = fit_rate(pts);
    ++fitted;
    worst = std::min(worst, f.slope);
    ok = ok && f.slope >= binding_min_slope;
  }
  for (const auto &s : audits.slopes)
  {
    if (s.inequality == audit_names::binding_l2 && s.index < 6)
    {
      ok = ok && s.pass;
    }
  }
  return {ok && fitted == 6, "min slope " + fmt(worst) + " over the first 6 eigenfunctions"};
}

Outcome fiber_poincare(const AuditReport &audits)
{
  const double eps = 0.1;
  VolumeMeshOptions vo;
  vo.h = 0.1;
  vo.layers = 16;
  vo.sleeve_intervals = 4;
  const VolumeBuild vb = assemble_volume_mesh(book("unit_square.json"), eps, vo);
  const FemPair fat = assemble_volume(vb.volume);
  Eigen::VectorXd u(vb.volume.size());
  for (std::size_t i = 0; i < vb.volume.size(); ++i)
  {
    u[i] = std::sin(pi * vb.volume.nodes[i].z() / (2.0 * eps));
  }
  const double ratio =
      bilinear(fat.mass, u, u) / (4.0 * eps * eps / (pi * pi) * bilinear(fat.stiffness, u, u));
  bool ok = std::abs(ratio - 1.0) <= fiber_tol;

  std::map<double, int> random_per_eps;
  int violations = 0;
  for (const auto &r : audits.records)
  {
    if (r.inequality != audit_names::fiber_poincare)
    {
      continue;
    }
    if (r.note.rfind("random", 0) == 0)
    {
      ++random_per_eps[r.eps];
    }
    violations += r.pass ? 0 : 1;
  }
  for (const auto &[e, c] : random_per_eps)
  {
    ok = ok && c >= 100;
  }
  ok = ok && violations == 0 && random_per_eps.size() == 4;
  return {ok, "extremal ratio " + fmt(ratio) + " at 16 layers, " + std::to_string(violations) +
                  " violations over " + std::to_string(random_per_eps.size()) + " eps values"};
}

Outcome transfer_contracts(const AuditReport &audits)
{
  namespace an = audit_names;
  const std::vector<std::string> four = {an::j_isometry, an::j_energy, an::k_isometry, an::k_energy};
  int decrease = 0, rayleigh = 0;
  bool ok = true;
  double worst = 0.0;
  for (const auto &r : audits.records)
  {
    for (const auto &name : four)
    {
      if (r.inequality == name + "-decrease")
      {
        ++decrease;
        ok = ok && r.pass;
      }
    }
    if (r.inequality == an::j_rayleigh || r.inequality == an::k_rayleigh)
    {
      ++rayleigh;
      const double bound = 1.0 + rayleigh_c * std::sqrt(r.eps);
      worst = std::max(worst, r.ratio / bound);
      ok = ok && r.ratio <= bound;
    }
  }
  ok = ok && decrease > 0 && rayleigh > 0;
  return {ok, std::to_string(decrease) + " sweep-decrease checks, " + std::to_string(rayleigh) +
                  " Rayleigh ratios, worst ratio/bound " + fmt(worst)};
}

Outcome metric_perturbation_rate()
{
  ParamChart sphere;
  sphere.kind = ChartKind::SphericalCap;
  sphere.radius = 1.0;
  sphere.domain = {0.0, 2.0 * pi, 0.0, pi / 2, true};
  ParamChart cyl;
  cyl.kind = ChartKind::CylinderSegment;
  cyl.radius = 1.0;
  cyl.domain = {0.0, pi, 0.0, 1.0, false};
  bool ok = true;
  std::ostringstream os;
  os << "slopes";
  for (const auto &[label, chart] : {std::pair{"sphere", sphere}, std::pair{"cylinder", cyl}})
  {
    AuditReport sweep;
    for (double eps : {0.1, 0.05, 0.025, 0.0125})
    {
      sweep.append(audit_metric(chart, eps));
    }
    for (const char *name : {audit_names::metric_exact, audit_names::metric_stated})
    {
      const RateFit f = fit_rate(series_of(sweep, name, -1));
      ok = ok && std::abs(f.slope - 1.0) <= metric_slope_tol;
      os << " " << label << "/" << (name == audit_names::metric_exact ? "induced" : "linear") << " "
         << fmt(f.slope);
    }
  }
  // Unit sphere closed form: the induced offset metric is (1 + z)^2 g.
  const double eps = 0.05;
  const double closed = std::sqrt(2.0) * (1.0 / ((1.0 - eps) * (1.0 - eps)) - 1.0);
  ok = ok && std::abs(metric_perturbation(sphere, eps).exact - closed) <= 1e-9 * closed;
  return {ok, os.str()};
}

Outcome solver_equivalence()
{
  std::vector<std::pair<std::string, FemPair>> pairs;
  for (const char *name : {"unit_square.json", "flat1.json", "flat3.json", "cross4.json",
                           "disk_hemispheres.json", "two_spheres.json"})
  {
    const OpenBookSpec spec = book(name);
    for (double h : {0.05, 0.1, 0.2, 0.4})
    {
      SurfaceMeshOptions o;
      o.h = h;
      SurfaceMesh sm = triangulate_pages(spec, o);
      if (static_cast<int>(sm.size()) > dense_max_dofs)
      {
        continue;
      }
      compute_metric_cache(spec, sm);
      pairs.emplace_back(name, assemble_surface(sm));
      break;
    }
  }
  VolumeMeshOptions vo;
  vo.h = 0.2;
  vo.layers = 2;
  const VolumeBuild vb = assemble_volume_mesh(book("unit_square.json"), 0.1, vo);
  pairs.emplace_back("slab volume", assemble_volume(vb.volume));

  bool ok = pairs.size() == 7;
  double worst = 0.0;
  bool bitwise = true;
  const int threads = omp_get_max_threads();
  for (const auto &[name, pair] : pairs)
  {
    const EigenResult dense = dense_oracle(pair);
    omp_set_num_threads(1);
    const EigenResult a = solve_lowest(pair, solver(6));
    const EigenResult b = solve_lowest(pair, solver(6));
    omp_set_num_threads(2);
    const EigenResult c = solve_lowest(pair, solver(6));
    omp_set_num_threads(threads);
    ok = ok && a.converged;
    for (int i = 0; i < 6; ++i)
    {
      const double d = std::abs(a.values[i] - dense.values[i]) / std::max(1.0, std::abs(dense.values[i]));
      worst = std::max(worst, d);
    }
    bitwise = bitwise && a.values == b.values && a.values == c.values &&
              (a.vectors - b.vectors).cwiseAbs().maxCoeff() == 0.0 &&
              (a.vectors - c.vectors).cwiseAbs().maxCoeff() == 0.0;
  }
  ok = ok && worst <= dense_tol && bitwise;
  return {ok, std::to_string(pairs.size()) + " pairs, max rel dev " + fmt(worst) +
                  (bitwise ? ", bitwise reproducible on 1 and 2 threads" : ", NOT bitwise reproducible")};
}

void report(int id, const std::string &name, const Outcome &o, int &failures)
{
  std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << " " << name << ": " << o.detail << std::endl;
  failures += o.pass ? 0 : 1;
}

}  // namespace

int main()
{
  set_log_level("warn");
  int failures = 0;
  auto guarded = [&](int id, const std::string &name, const std::function<Outcome()> &f) {
    Outcome o;
    try
    {
      o = f();
    }
    catch (const std::exception &e)
    {
      o = {false, std::string("exception: ") + e.what()};
    }
    report(id, name, o, failures);
  };

  guarded(1, "unit square Neumann spectrum", unit_square);
  guarded(2, "thin slab consistency", thin_slab);
  guarded(3, "Kirchhoff limit operator", kirchhoff_limit);

  StudyReport flat;
  const auto out = std::filesystem::temp_directory_path() / "openbook_acceptance_flat";
  Stopwatch sw;
  std::string study_error;
  try
  {
    flat = run_convergence(flat_book_plan(out));
    write_study(flat_book_plan(out), flat);
  }
  catch (const std::exception &e)
  {
    study_error = e.what();
  }
  const double secs = sw.seconds();
  auto from_study = [&](const std::function<Outcome()> &f) {
    return [&, f]() { return study_error.empty() ? f() : Outcome{false, "study failed: " + study_error}; };
  };
  guarded(4, "flat book spectral convergence", from_study([&] { return main_theorem(flat, secs); }));
  guarded(5, "closed binding geometry", closed_binding);
  guarded(6, "binding smallness rate", from_study([&] { return binding_smallness(flat.audits); }));
  guarded(7, "fiber Poincare constant", from_study([&] { return fiber_poincare(flat.audits); }));
  guarded(8, "averaging and extension contracts", from_study([&] { return transfer_contracts(flat.audits); }));
  guarded(9, "metric perturbation rate", metric_perturbation_rate);
  guarded(10, "solver equivalence and determinism", solver_equivalence);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << " (study report in " << out.string() << ")" << std::endl;
  return failures == 0 ? 0 : 1;
}
