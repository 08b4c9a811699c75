// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "openbook/eigen.hpp"
#include "openbook/geometry.hpp"
#include "openbook/io.hpp"
#include "openbook/oracle.hpp"
#include "openbook/stats.hpp"
#include "openbook/transfer.hpp"

namespace openbook
{

// Semi-analytic reference attached to the limit spectrum.
struct OracleRequest
{
  std::string kind = "auto";  // auto | none | flat-book | flat-star | axisymmetric
  int k = 0;
  double l = 0.0, a = 0.0;
  AxisymOptions axisym;
};

struct VolumePolicy
{
  double h = 0.1;  // in-plane target edge length
  // Explicit z-layer counts per eps (base level); empty selects
  // max(4, ceil(8 eps / h)) rounded up to even.
  std::vector<int> layers;
  // Sleeve row intervals; 0 selects ceil(2 a_m) so rows are at most eps / 2 apart.
  int sleeve_intervals = 0;
};

struct StudyPlan
{
  std::string geometry;  // path as given
  OpenBookSpec spec;
  std::vector<double> eps;  // descending
  int n_eigs = 6;
  double surface_h = 0.05;
  int ladder = 2;      // refinement rungs 0 .. ladder - 1
  int max_ladder = 2;  // deepest ladder allowed when the study is not valid
  VolumePolicy volume;
  std::vector<std::string> audits;  // transfer | poincare | binding | metric
  std::string out_dir = ".";
  std::string report_file = "study.json";
  std::string gaps_file = "gaps.csv";
  std::uint64_t seed = 1;
  Preconditioner precond = Preconditioner::Factorized;
  double tol = 1e-8;
  int max_iter = 20000;
  OracleRequest oracle;
};

// Strict reader; geometry paths are resolved against base_dir. Throws Config
// on schema violations (JSON pointer in the message).
StudyPlan plan_from_json(const nlohmann::json &doc, const std::string &base_dir = ".");
StudyPlan load_plan(const std::string &path);
nlohmann::json plan_to_json(const StudyPlan &plan);
void validate_plan(const StudyPlan &plan);

int layers_for(const StudyPlan &plan, std::size_t eps_index);
int sleeve_intervals_for(const StudyPlan &plan);
SolverOpts solver_opts(const StudyPlan &plan, int n_eigs);

struct SpectrumRung
{
  int refine = 0;
  double h = 0.0;
  int dofs = 0;
  std::vector<double> values;
  std::vector<double> residuals;
  int iterations = 0;
  bool converged = false;
};

// Limit-operator eigenvalues on the surface mesh at the given refinement.
SpectrumRung limit_rung(const OpenBookSpec &spec, double h, int refine, const SolverOpts &opts,
                        EigenResult *keep = nullptr);

// Neumann eigenvalues on the fattened mesh.
SpectrumRung fattened_rung(const OpenBookSpec &spec, double eps, const VolumeMeshOptions &mesh,
                           const SolverOpts &opts, EigenResult *keep = nullptr);

struct LadderValues
{
  std::vector<double> values;
  std::vector<double> errors;
  bool nested = true;
};

// Richardson over the two finest rungs, index by index.
LadderValues extrapolate(const std::vector<SpectrumRung> &rungs, int n);

struct LimitSpectrum
{
  std::vector<SpectrumRung> rungs;
  LadderValues converged;
  std::optional<OracleSpectrum> oracle;
  double oracle_max_rel = 0.0;  // max relative FEM-oracle deviation over n_eigs values
};

struct FattenedSpectrum
{
  double eps = 0.0;
  int layers = 0;
  int sleeve_intervals = 0;
  std::vector<SpectrumRung> rungs;
  LadderValues converged;
  bool complete = true;
};

struct GapRow
{
  int n = 0;
  double eps = 0.0;
  double lambda_limit = 0.0, lambda_eps = 0.0;
  double gap = 0.0;
  double error = 0.0;  // combined Richardson estimate
  bool refined = true;
};

struct IndexDiagnostics
{
  int n = 0;
  // Gap exactly zero in theory: below the noise floor at every eps.
  bool exact_mode = false;
  // gap(eps_{i+1}) <= gap(eps_i) + combined error estimates.
  bool monotone = true;
  double max_increase = 0.0;
  double final_rel_gap = 0.0;
  bool strict_decrease = true;  // smallest eps below the largest
  std::optional<RateFit> slope;
};

struct StudyReport
{
  nlohmann::json plan;
  LimitSpectrum limit;
  std::vector<FattenedSpectrum> fattened;
  std::vector<GapRow> gaps;
  std::vector<IndexDiagnostics> diagnostics;
  bool valid = true;
  bool complete = true;
  std::vector<std::string> notes;
  AuditReport audits;
  bool audits_run = false;
  nlohmann::json provenance;
};

// Relative floor below which a gap counts as an exactly matched mode.
inline constexpr double exact_mode_floor = 1e-4;
// Relative gap increase attributed to solver roundoff in the monotone test.
inline constexpr double roundoff_floor = 1e-10;

StudyReport run_convergence(const StudyPlan &plan);

// Gap table, diagnostics and validity from filled spectra.
void compute_gaps(const StudyPlan &plan, StudyReport &report);

// Oracle spectrum for the request, when one applies to the spec.
std::optional<OracleSpectrum> oracle_for(const OpenBookSpec &spec, const OracleRequest &req,
                                         int count);

nlohmann::json to_json(const SpectrumRung &rung);
nlohmann::json to_json(const AuditReport &report);
nlohmann::json to_json(const StudyReport &report);
CsvTable gaps_csv(const StudyReport &report);
CsvTable eigen_csv(const std::vector<double> &values, const std::vector<double> &residuals);

// Writes the report JSON and the gaps CSV into plan.out_dir.
void write_study(const StudyPlan &plan, const StudyReport &report);

}  // namespace openbook
