// SPDX-License-Identifier: Apache-2.0
//
// openbook: command-line driver for meshes, spectra, oracles, studies and audits.

#include <omp.h>

#include <filesystem>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "openbook/eigen.hpp"
#include "openbook/error.hpp"
#include "openbook/fem.hpp"
#include "openbook/io.hpp"
#include "openbook/log.hpp"
#include "openbook/mesh.hpp"
#include "openbook/oracle.hpp"
#include "openbook/spec_io.hpp"
#include "openbook/study.hpp"
#include "openbook/transfer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace openbook;

namespace
{

enum Exit
{
  ok = 0,
  config = 2,
  geometry = 3,
  solver = 4,
  audit = 5
};

int exit_code(ErrorKind kind)
{
  switch (kind)
  {
    case ErrorKind::Config:
    case ErrorKind::Size:
    case ErrorKind::Io:
      return config;
    case ErrorKind::Domain:
    case ErrorKind::Geometry:
    case ErrorKind::Mesh:
    case ErrorKind::Assembly:
      return geometry;
    case ErrorKind::Solver:
      return solver;
    case ErrorKind::Audit:
      return audit;
  }
  return config;
}

struct Args
{
  std::string geom, plan, eps, out, format = "csv", kase;
  double h = 0.0;
  int layers = 0, n = 6, jobs = 0, k = 3;
  double l = std::numbers::pi, a = 1.0;
  std::uint64_t seed = 1;
};

std::vector<double> parse_eps(const std::string &s)
{
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
  {
    try
    {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size())
      {
        throw std::invalid_argument(item);
      }
      out.push_back(v);
    }
    catch (const std::exception &)
    {
      fail(ErrorKind::Config, "--eps: cannot parse '" + item + "'");
    }
  }
  if (out.empty())
  {
    fail(ErrorKind::Config, "--eps: empty list");
  }
  return out;
}

OpenBookSpec load_geometry(const Args &a)
{
  if (a.geom.empty())
  {
    fail(ErrorKind::Config, "--geom is required");
  }
  OpenBookSpec spec = load_spec(a.geom);
  spec.finalize();
  return spec;
}

json provenance_for(const Args &a, const std::string &command)
{
  json cfg = {{"command", command}, {"geom", a.geom}, {"plan", a.plan}, {"eps", a.eps},
              {"h", a.h},           {"layers", a.layers}, {"n", a.n},     {"seed", a.seed},
              {"case", a.kase},     {"k", a.k},          {"l", a.l},      {"a", a.a}};
  if (!a.geom.empty())
  {
    cfg["geometry_spec"] = spec_to_json(load_geometry(a));
  }
  return provenance(cfg, a.seed);
}

// Writes to --out when given, standard output otherwise.
void emit(const Args &a, const std::string &content)
{
  if (a.out.empty())
  {
    std::cout << content;
  }
  else
  {
    write_file_atomic(a.out, content);
  }
}

std::string spectrum_output(const Args &a, const std::string &command,
                            const std::vector<double> &values,
                            const std::vector<double> &residuals, json extra)
{
  const json prov = provenance_for(a, command);
  if (a.format == "json")
  {
    extra["values"] = values;
    extra["residuals"] = residuals;
    extra["provenance"] = prov;
    return extra.dump(2) + "\n";
  }
  const std::string csv = eigen_csv(values, residuals).str();
  // Schema line first, provenance as a second comment line.
  const auto cut = csv.find('\n') + 1;
  json p = prov;
  p.erase("config");
  return csv.substr(0, cut) + "# provenance " + p.dump() + "\n" + csv.substr(cut);
}

int cmd_validate(const Args &a)
{
  if (a.geom.empty())
  {
    fail(ErrorKind::Config, "--geom is required");
  }
  OpenBookSpec spec = load_spec(a.geom);
  const ValidationReport rep = validate(spec);
  double e0 = 0.0;
  if (rep.pass())
  {
    spec.finalize();
    e0 = epsilon0(spec);
  }
  if (a.format == "json")
  {
    json checks = json::array();
    for (const auto &c : rep.checks)
    {
      checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    }
    json out = {{"pass", rep.pass()}, {"checks", checks}, {"provenance", provenance(spec_to_json(spec), a.seed)}};
    if (rep.pass())
    {
      out["epsilon0"] = e0;
      out["sleeve_widths"] = spec.sleeve_widths;
    }
    emit(a, out.dump(2) + "\n");
  }
  else
  {
    std::ostringstream os;
    os << rep.to_text();
    if (rep.pass())
    {
      os << "epsilon0 " << e0 << "\n";
    }
    emit(a, os.str());
  }
  return rep.pass() ? ok : geometry;
}

int cmd_mesh(const Args &a)
{
  const OpenBookSpec spec = load_geometry(a);
  const std::string dir = a.out.empty() ? "." : a.out;
  json summary;
  if (a.eps.empty())
  {
    SurfaceMeshOptions mo;
    mo.h = a.h > 0.0 ? a.h : mo.h;
    SurfaceMesh sm = triangulate_pages(spec, mo);
    compute_metric_cache(spec, sm);
    const FemPair pair = assemble_surface(sm);
    const PairCertificate cert = certify(pair);
    export_vtk(sm, (fs::path(dir) / "surface.vtk").string());
    summary = {{"kind", "surface"},
               {"nodes", sm.size()},
               {"triangles", sm.triangles.size()},
               {"area", pair.measure},
               {"certificate_pass", cert.pass()}};
  }
  else
  {
    const std::vector<double> eps = parse_eps(a.eps);
    VolumeMeshOptions vo;
    vo.h = a.h > 0.0 ? a.h : vo.h;
    vo.layers = a.layers > 0 ? a.layers : vo.layers;
    const VolumeBuild vb = assemble_volume_mesh(spec, eps.front(), vo);
    const WatertightReport wt = check_watertight(vb.volume);
    export_vtk(vb.volume, (fs::path(dir) / "volume.vtk").string());
    export_vtk(vb.surface, (fs::path(dir) / "surface.vtk").string());
    summary = {{"kind", "volume"},
               {"eps", eps.front()},
               {"nodes", vb.volume.size()},
               {"tets", vb.volume.tets.size()},
               {"layers", vb.volume.layers},
               {"volume", mesh_volume(vb.volume)},
               {"boundary_faces", wt.boundary_faces},
               {"watertight", wt.pass()},
               {"min_inscribed_factor", vb.volume.min_inscribed_factor},
               {"max_circumscribed_factor", vb.volume.max_circumscribed_factor}};
  }
  summary["provenance"] = provenance_for(a, "mesh");
  write_file_atomic((fs::path(dir) / "mesh.json").string(), summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return ok;
}

SolverOpts cli_solver(const Args &a, int n)
{
  SolverOpts so;
  so.n_eigs = n;
  so.seed = a.seed;
  so.precond = Preconditioner::Factorized;
  return so;
}

int cmd_limit(const Args &a)
{
  const OpenBookSpec spec = load_geometry(a);
  const double h = a.h > 0.0 ? a.h : 0.05;
  const SpectrumRung r = limit_rung(spec, h, 0, cli_solver(a, a.n));
  emit(a, spectrum_output(a, "limit", r.values, r.residuals,
                          {{"h", h}, {"dofs", r.dofs}, {"converged", r.converged}}));
  return r.converged ? ok : solver;
}

int cmd_fattened(const Args &a)
{
  const OpenBookSpec spec = load_geometry(a);
  if (a.eps.empty())
  {
    fail(ErrorKind::Config, "--eps is required");
  }
  const double eps = parse_eps(a.eps).front();
  VolumeMeshOptions vo;
  vo.h = a.h > 0.0 ? a.h : vo.h;
  StudyPlan p;
  p.spec = spec;
  p.eps = {eps};
  p.volume.h = vo.h;
  vo.layers = a.layers > 0 ? a.layers : layers_for(p, 0);
  vo.sleeve_intervals = sleeve_intervals_for(p);
  vo.check_overlap = false;
  const SpectrumRung r = fattened_rung(spec, eps, vo, cli_solver(a, a.n));
  emit(a, spectrum_output(a, "fattened", r.values, r.residuals,
                          {{"eps", eps},
                           {"h", vo.h},
                           {"layers", vo.layers},
                           {"dofs", r.dofs},
                           {"converged", r.converged}}));
  return r.converged ? ok : solver;
}

int cmd_oracle(const Args &a)
{
  OracleSpectrum s;
  if (a.kase == "flat-star")
  {
    s = star_graph_spectrum(a.k, a.a, a.n);
  }
  else if (a.kase == "flat-book")
  {
    s = flat_book_spectrum(a.k, a.l, a.a, a.n);
  }
  else if (a.kase == "disk-hemispheres" || a.kase == "two-spheres")
  {
    if (a.geom.empty())
    {
      fail(ErrorKind::Config, "--case " + a.kase + " needs --geom with the fixture geometry");
    }
    s = axisym_spectrum(load_geometry(a), a.n);
  }
  else
  {
    fail(ErrorKind::Config, "--case must be one of flat-star, flat-book, disk-hemispheres, two-spheres");
  }
  const std::vector<double> acc(s.values.size(), s.accuracy);
  emit(a, spectrum_output(a, "oracle", s.values, acc,
                          {{"case", a.kase}, {"method", s.method}, {"accuracy", s.accuracy}}));
  return ok;
}

StudyPlan plan_from_args(const Args &a)
{
  StudyPlan p;
  if (!a.plan.empty())
  {
    p = load_plan(a.plan);
  }
  else
  {
    const OpenBookSpec spec = load_geometry(a);
    p.geometry = a.geom;
    p.spec = spec;
    if (a.eps.empty())
    {
      fail(ErrorKind::Config, "--eps or --plan is required");
    }
  }
  if (!a.eps.empty())
  {
    p.eps = parse_eps(a.eps);
    if (p.volume.layers.size() != p.eps.size())
    {
      p.volume.layers.clear();
    }
  }
  if (a.n > 0)
  {
    p.n_eigs = a.n;
  }
  if (a.h > 0.0)
  {
    p.volume.h = a.h;
  }
  if (a.layers > 0)
  {
    p.volume.layers.assign(p.eps.size(), a.layers);
  }
  if (!a.out.empty())
  {
    p.out_dir = a.out;
  }
  p.seed = a.seed;
  validate_plan(p);
  return p;
}

int cmd_converge(const Args &a)
{
  const StudyPlan p = plan_from_args(a);
  const StudyReport rep = run_convergence(p);
  write_study(p, rep);
  std::cout << gaps_csv(rep).str();
  if (!rep.complete)
  {
    return solver;
  }
  if (rep.audits_run && !rep.audits.pass())
  {
    return audit;
  }
  return ok;
}

int cmd_audit(const Args &a)
{
  StudyPlan p = plan_from_args(a);
  p.ladder = 1;
  p.max_ladder = 1;
  if (p.audits.empty())
  {
    p.audits = {"transfer", "poincare", "binding", "metric"};
  }
  const StudyReport rep = run_convergence(p);
  json out = to_json(rep.audits);
  out["provenance"] = rep.provenance;
  write_file_atomic((fs::path(p.out_dir) / "audit.json").string(), out.dump(2) + "\n");
  int failed = 0;
  for (const auto &r : rep.audits.records)
  {
    failed += r.pass ? 0 : 1;
  }
  for (const auto &s : rep.audits.slopes)
  {
    failed += s.pass ? 0 : 1;
  }
  std::cout << "records " << rep.audits.records.size() << " slopes " << rep.audits.slopes.size()
            << " failed " << failed << "\n";
  if (!rep.complete)
  {
    return solver;
  }
  return rep.audits.pass() ? ok : audit;
}

}  // namespace

int main(int argc, char **argv)
{
  init_logging();
  CLI::App app{"openbook: spectra of fattened open book structures and their limit operator"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  Args a;

  auto add_geom = [&](CLI::App *c) { c->add_option("--geom", a.geom, "Geometry spec (JSON)"); };
  auto add_common = [&](CLI::App *c) {
    c->add_option("--seed", a.seed, "Seed of the eigensolver start block");
    c->add_option("--jobs", a.jobs, "Worker threads (default: available parallelism)");
    c->add_option("--out", a.out, "Output file, or output directory for mesh/converge/audit");
  };
  auto add_format = [&](CLI::App *c) {
    c->add_option("--format", a.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  };

  CLI::App *validate_cmd = app.add_subcommand("validate", "Check a geometry spec and print eps0");
  add_geom(validate_cmd);
  add_common(validate_cmd);
  add_format(validate_cmd);

  CLI::App *mesh_cmd = app.add_subcommand("mesh", "Build the surface mesh, or the volume mesh with --eps");
  add_geom(mesh_cmd);
  mesh_cmd->add_option("--eps", a.eps, "Fattening width (first value of a list)");
  mesh_cmd->add_option("--h", a.h, "Target edge length");
  mesh_cmd->add_option("--layers", a.layers, "Fiber layers of the page slabs");
  add_common(mesh_cmd);

  CLI::App *limit_cmd = app.add_subcommand("limit", "Lowest eigenvalues of the limit operator on M");
  add_geom(limit_cmd);
  limit_cmd->add_option("--h", a.h, "Surface edge length (default 0.05)");
  limit_cmd->add_option("--n", a.n, "Number of eigenvalues");
  add_common(limit_cmd);
  add_format(limit_cmd);

  CLI::App *fat_cmd = app.add_subcommand("fattened", "Lowest Neumann eigenvalues on M_eps");
  add_geom(fat_cmd);
  fat_cmd->add_option("--eps", a.eps, "Fattening width");
  fat_cmd->add_option("--h", a.h, "In-plane edge length (default 0.1)");
  fat_cmd->add_option("--layers", a.layers, "Fiber layers (default max(4, ceil(8 eps / h)))");
  fat_cmd->add_option("--n", a.n, "Number of eigenvalues");
  add_common(fat_cmd);
  add_format(fat_cmd);

  CLI::App *oracle_cmd = app.add_subcommand("oracle", "Semi-analytic reference spectra");
  oracle_cmd->add_option("--case", a.kase, "flat-star | flat-book | disk-hemispheres | two-spheres")
      ->required();
  add_geom(oracle_cmd);
  oracle_cmd->add_option("--k", a.k, "Number of pages or star edges");
  oracle_cmd->add_option("--l", a.l, "Binding length of the flat book");
  oracle_cmd->add_option("--a", a.a, "Page depth or edge length");
  oracle_cmd->add_option("--n", a.n, "Number of eigenvalues");
  add_common(oracle_cmd);
  add_format(oracle_cmd);

  CLI::App *conv_cmd = app.add_subcommand("converge", "Convergence study over an eps sweep");
  add_geom(conv_cmd);
  conv_cmd->add_option("--plan", a.plan, "Study plan (JSON)");
  conv_cmd->add_option("--eps", a.eps, "Comma-separated descending eps list");
  conv_cmd->add_option("--h", a.h, "In-plane edge length of the volume meshes");
  conv_cmd->add_option("--layers", a.layers, "Fiber layers for every eps");
  conv_cmd->add_option("--n", a.n, "Number of eigenvalues");
  add_common(conv_cmd);

  CLI::App *audit_cmd = app.add_subcommand("audit", "Audit the transfer inequalities over an eps sweep");
  add_geom(audit_cmd);
  audit_cmd->add_option("--plan", a.plan, "Study plan (JSON)");
  audit_cmd->add_option("--eps", a.eps, "Comma-separated descending eps list");
  audit_cmd->add_option("--h", a.h, "In-plane edge length of the volume meshes");
  audit_cmd->add_option("--layers", a.layers, "Fiber layers for every eps");
  audit_cmd->add_option("--n", a.n, "Number of eigenvalues");
  add_common(audit_cmd);

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &e)
  {
    const int rc = app.exit(e);
    return rc == 0 ? ok : config;
  }

  try
  {
    if (a.jobs > 0)
    {
      omp_set_num_threads(a.jobs);
    }
    if (*validate_cmd)
    {
      a.format = validate_cmd->count("--format") ? a.format : "text";
      return cmd_validate(a);
    }
    if (*mesh_cmd)
    {
      return cmd_mesh(a);
    }
    if (*limit_cmd)
    {
      return cmd_limit(a);
    }
    if (*fat_cmd)
    {
      return cmd_fattened(a);
    }
    if (*oracle_cmd)
    {
      return cmd_oracle(a);
    }
    if (*conv_cmd)
    {
      if (!conv_cmd->count("--n"))
      {
        a.n = 0;
      }
      return cmd_converge(a);
    }
    if (*audit_cmd)
    {
      if (!audit_cmd->count("--n"))
      {
        a.n = 0;
      }
      return cmd_audit(a);
    }
  }
  catch (const Error &e)
  {
    std::cerr << "openbook: " << to_string(e.kind()) << " error: " << e.what() << "\n";
    return exit_code(e.kind());
  }
  catch (const std::exception &e)
  {
    std::cerr << "openbook: error: " << e.what() << "\n";
    return config;
  }
  return ok;
}
