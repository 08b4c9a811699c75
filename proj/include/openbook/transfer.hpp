// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "openbook/eigen.hpp"
#include "openbook/fem.hpp"
#include "openbook/mesh.hpp"

namespace openbook
{

// Row-compressed rectangular map; rows without entries produce 0.
struct SparseMap
{
  int rows = 0, cols = 0;
  std::vector<std::int64_t> row_ptr{0};
  std::vector<int> col;
  std::vector<double> val;

  void push_row(const std::vector<std::pair<int, double>> &entries);
  bool row_empty(int i) const { return row_ptr[i] == row_ptr[i + 1]; }
  double row_sum(int i) const;
  Eigen::VectorXd apply(const Eigen::VectorXd &x) const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd &x) const;
};

// How J was realized at a surface node.
enum class JStencil
{
  Fiber,   // page node with a fiber column
  Blend,   // sleeve node: foliation-line average blended toward P
  Binding  // binding node: P
};

struct TransferOps
{
  double eps = 0.0;
  double c_r = 0.0;  // mollifier radius factor
  SparseMap J;       // volume -> surface
  SparseMap K;       // surface -> volume
  // Unscaled building blocks, all with surface-node rows and volume columns.
  SparseMap N;      // fiber averages (page nodes)
  SparseMap N_fol;  // foliation-line averages (sleeve nodes)
  SparseMap P;      // mollified cross-section averages (binding nodes)
  std::vector<JStencil> stencil;
  std::vector<double> blend;  // w per surface node (0 on pages, 1 on bindings)
};

// Trapezoid fiber average over the column of every page-k node; page = -1
// covers all pages.
SparseMap build_N(const SurfaceMesh &sm, const VolumeMesh &vm, int page = -1);

// Arclength-trapezoid average over the two foliation lines through each sleeve
// trace node.
SparseMap build_N_foliation(const SurfaceMesh &sm, const VolumeMesh &vm);

// Bump-weighted average over cross-section nodes within c_r eps of the
// station center; binding = -1 covers every binding. c_r <= 0 selects half the
// measured inscribed factor.
SparseMap build_P(const VolumeMesh &vm, int binding, double c_r);
double default_c_r(const VolumeMesh &vm);

// Radial mollifier profile exp(1 - 1/(1 - r^2)) on r < 1.
double bump(double r);

// K = (2 eps)^{-1/2} u(foot).
SparseMap build_K(const SurfaceMesh &sm, const VolumeMesh &vm);

// Full operator set.
TransferOps build_transfer(const SurfaceMesh &sm, const VolumeMesh &vm, double c_r = 0.0);

// Identity plus a bump primitive carrying (0, a) onto (a_m eps, a).
struct ShorteningMap
{
  double a = 0.0, a_m = 0.0, eps = 0.0;
  double shift = 0.0;  // a_m eps
  double bump_integral = 0.0;

  double operator()(double t) const;
  double derivative(double t) const;
};

ShorteningMap shortening_map(double a, double a_m, double eps);

struct ShorteningSamples
{
  std::vector<double> t, phi, dphi;
  double max_shift = 0.0;       // max |phi(t) - t|
  double max_slope_dev = 0.0;   // max |phi'(t) - 1|
  double min_slope = 0.0;
};
ShorteningSamples sample_shortening(const ShorteningMap &map, int samples = 513);

// ---------------------------------------------------------------------------
// Audits
// ---------------------------------------------------------------------------

struct AuditRecord
{
  std::string inequality;  // stable name of the audited inequality
  double eps = 0.0;
  int index = -1;          // eigenfunction index or sample id
  double lhs = 0.0, rhs = 0.0;
  double ratio = 0.0;      // lhs / rhs (0 / 0 counts as 0)
  double bound = 0.0;      // pass threshold applied to ratio; 0 = report only
  bool pass = true;
  std::string note;
};

struct AuditSlope
{
  std::string inequality;
  int index = -1;
  double slope = 0.0, width = 0.0;
  int points = 0;
  double min_slope = 0.0, max_slope = 0.0;  // acceptance window
  bool pass = true;
};

struct AuditReport
{
  double h = 0.0;
  int layers = 0;
  std::vector<AuditRecord> records;
  std::vector<AuditSlope> slopes;
  std::vector<std::string> warnings;

  bool pass() const;
  void append(const AuditReport &other);
};

// Inequality names used by the audits.
namespace audit_names
{
inline constexpr const char *j_isometry = "averaging-isometry";
inline constexpr const char *j_energy = "averaging-energy";
inline constexpr const char *k_isometry = "extension-isometry";
inline constexpr const char *k_energy = "extension-energy";
inline constexpr const char *j_rayleigh = "averaging-rayleigh";
inline constexpr const char *k_rayleigh = "extension-rayleigh";
inline constexpr const char *jk_composition = "averaging-extension-composition";
inline constexpr const char *fiber_poincare = "fiber-poincare";
inline constexpr const char *section_poincare = "section-poincare";
inline constexpr const char *binding_l2 = "binding-l2-smallness";
inline constexpr const char *binding_h1 = "binding-h1-smallness";
inline constexpr const char *metric_exact = "metric-perturbation-induced";
inline constexpr const char *metric_stated = "metric-perturbation-linear";
inline constexpr const char *shortening = "shortening-slope";
}  // namespace audit_names

struct TransferAuditOptions
{
  int cap_index = 8;  // Lambda = lambda_{cap_index} of each side
  // Rayleigh factor bound 1 + rayleigh_c eps^{1/2}.
  double rayleigh_c = 3.0;
};

// limit: surface pair on the eps-adapted surface mesh; fat: volume pair.
AuditReport audit_transfer(const FemPair &limit, const FemPair &fat, const TransferOps &ops,
                           const EigenResult &eig_limit, const EigenResult &eig_fat,
                           const TransferAuditOptions &opts = {});

struct PoincareOptions
{
  int random_functions = 100;
  std::uint64_t seed = 7;
  double c_eps = 10.0;
  double c_h = 1.0;
  double h = 0.1;  // in-plane mesh size entering the tolerance
};

// Fiber inequality on every page slab for random vectors and eigenfunctions,
// plus the cross-section check for P on the binding solids.
AuditReport audit_poincare(const VolumeMesh &vm, const FemPair &fat, const TransferOps &ops,
                           const EigenResult &eig_fat, const PoincareOptions &opts = {});

// Ratio of the L2 norm on the binding solids to the H1 norm on M_eps, and its
// H1 analogue, for every returned eigenfunction.
AuditReport audit_binding_smallness(const VolumeMesh &vm, const FemPair &fat,
                                    const EigenResult &eig_fat);

struct MetricSample
{
  double exact = 0.0;   // max_{y,z} |B|_F for the induced metric of X + zN
  double stated = 0.0;  // same for the metric linear in z
  // Max |B_ij| per entry over the samples, induced metric.
  Eigen::Matrix2d exact_entries = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d stated_entries = Eigen::Matrix2d::Zero();
};

// Samples y on an interior grid of the chart and z in [-eps, eps].
MetricSample metric_perturbation(const ParamChart &chart, double eps, int grid = 9, int z_samples = 9);
AuditReport audit_metric(const ParamChart &chart, double eps);

// Appends one "<name>-decrease" record per (inequality, index) series: passes
// when |ratio| never grows as eps decreases (changes below floor ignored).
void check_sweep_decrease(AuditReport &sweep, const std::vector<std::string> &names,
                          double floor = 1e-9);

// Fits every (inequality, index) series of the reports over eps and appends
// slope records; `windows` maps inequality names onto acceptance windows.
struct SlopeWindow
{
  std::string inequality;
  double min_slope = -1e300, max_slope = 1e300;
};
void fit_audit_slopes(AuditReport &sweep, const std::vector<SlopeWindow> &windows);

}  // namespace openbook
