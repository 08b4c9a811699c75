// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "openbook/geometry.hpp"

namespace openbook
{

// ---------------------------------------------------------------------------
// Surface mesh of M
// ---------------------------------------------------------------------------

struct SurfaceMeshOptions
{
  // Target edge length away from the bindings.
  double h = 0.1;
  // When set, rows are packed into the sleeves of width a_m * eps.
  std::optional<double> eps;
  // Row intervals inside each sleeve (base level).
  int sleeve_intervals = 2;
  // Growth ratio of the graded rows between the sleeve and the far field.
  double grading = 1.25;
  // Uniform bisection levels applied after the base grid is built.
  int refine = 0;
  // Lower bound for the station count of closed bindings.
  int min_closed_stations = 12;
};

struct SurfaceNode
{
  Vec3 x;
  int page = -1;
  Vec2 y;
  int binding = -1;  // >= 0 for binding nodes
  int station = -1;  // station along that binding
  // Sleeve membership: nearest binding, its station, metric distance.
  int sleeve_binding = -1;
  int sleeve_station = -1;
  double sleeve_distance = 0.0;
  bool collapsed = false;  // merged pole / disk center
};

struct SurfaceTriangle
{
  std::array<int, 3> v;
  int page = 0;
  std::array<Vec2, 3> y;  // chart coordinates of the three corners
};

struct QuadMetric
{
  Eigen::Matrix2d ginv;
  double sqrt_det = 0.0;
};

struct PageGrid
{
  std::vector<double> u1;        // n_u1 + 1 values (periodic: last equals first + period)
  std::vector<double> u2;        // row parameters
  std::vector<double> distance;  // metric distance of each row from u2_min
  // ids[i][j] for i in [0, n_u1], j in [0, rows); periodic pages repeat column 0.
  std::vector<std::vector<int>> ids;
  bool periodic = false;
  // Row indices bounding the slab region (rows inside [slab_lo, slab_hi]).
  int slab_lo = 0, slab_hi = 0;
};

struct SurfaceMesh
{
  std::vector<SurfaceNode> nodes;
  std::vector<SurfaceTriangle> triangles;
  // Per binding: shared node ids over the stations (closed: n, open: n + 1).
  std::vector<std::vector<int>> binding_nodes;
  std::vector<int> stations;  // station count per binding
  std::vector<char> sleeve_flags;
  // Three quadrature points per triangle.
  std::vector<std::array<QuadMetric, 3>> metric_cache;
  std::vector<PageGrid> grids;
  std::optional<double> eps;
  int sleeve_intervals = 0;

  std::size_t size() const { return nodes.size(); }
};

// Interior 3-point rule in barycentric form.
inline constexpr std::array<std::array<double, 2>, 3> tri_quad_points = {
    {{1.0 / 6.0, 1.0 / 6.0}, {2.0 / 3.0, 1.0 / 6.0}, {1.0 / 6.0, 2.0 / 3.0}}};

SurfaceMesh triangulate_pages(const OpenBookSpec &spec, const SurfaceMeshOptions &opts);

// Fills metric_cache from the charts.
void compute_metric_cache(const OpenBookSpec &spec, SurfaceMesh &mesh);

// Unit normal at y, well defined at collapsed sides.
Vec3 page_normal(const ParamChart &chart, const Vec2 &y);

// Euler characteristic of the node/triangle complex of one page (degenerate
// chart triangles at poles are dropped).
int euler_characteristic(const SurfaceMesh &mesh, int page);

// ---------------------------------------------------------------------------
// Cross-sections and sector foliations
// ---------------------------------------------------------------------------

// Where a cross-section node lives in the global mesh.
enum class SectionNodeKind
{
  Binding,  // the binding point itself
  Trace,    // surface sleeve node of a page (tau = 0)
  Column,   // page fiber-column node on the interface Gamma
  Interior  // node owned by the binding solid
};

struct SectionNode
{
  SectionNodeKind kind = SectionNodeKind::Interior;
  int trace = -1;  // index into CrossSection::traces
  int row = 0;     // sleeve row (Trace) or tau level (Column)
  int side = 0;    // +1 / -1 side of the page (Column)
  int sector = -1;
  Vec3 x;
  Vec2 zeta;  // coordinates in the (e1, e2) frame relative to the binding point
};

struct SectionTrace
{
  IncidenceEntry entry;
  double angle = 0.0;
  std::vector<Vec3> points;   // c(s_r), r = 0..n_s; points[0] is the binding point
  std::vector<Vec3> normals;  // page unit normal at each point (page orientation)
  // +1 when the page normal points toward the next trace counter-clockwise.
  int ccw_sign = 1;
};

struct Sector
{
  int lo = 0, hi = 0;  // trace indices (lo -> hi counter-clockwise)
  double angle = 0.0;
  std::vector<Vec3> inner;  // lo sleeve, binding point (repeated over an arc), hi sleeve
  std::vector<Vec3> outer;  // outer boundary polyline
  std::vector<Vec3> image;  // phi(inner[r])
  // grid[r][q]: local node index of y_r + tau_q (phi(y_r) - y_r).
  std::vector<std::vector<int>> grid;
  // Diagonal choice per quad, row-major over (r, q).
  std::vector<char> diagonals;
  int arc_segments = 0;
};

struct CrossSection
{
  int binding = 0;
  double t = 0.0;
  double eps = 0.0;
  double sleeve_width = 2.0;
  Vec3 center, tangent, e1, e2;
  std::vector<SectionTrace> traces;
  std::vector<Sector> sectors;
  std::vector<SectionNode> nodes;
  std::vector<std::array<int, 3>> triangles;
  // Lumped 2D area per node.
  std::vector<double> node_area;
  // Boundary polygon (counter-clockwise, 2D) and the Gamma segments.
  std::vector<Vec2> boundary;
  std::vector<std::array<Vec2, 2>> gamma;
  double area = 0.0;
  // Star-shape certificate: min signed edge-line distance from the center and
  // max vertex distance, both divided by eps.
  double inscribed_factor = 0.0;
  double circumscribed_factor = 0.0;
};

struct CrossSectionOptions
{
  int sleeve_intervals = 2;  // n_s
  int tau_levels = 2;        // n_tau = layers / 2
  // Row distances inside the sleeve (n_s + 1 values in [0, a_m eps]); uniform
  // when empty.
  std::vector<double> rows;
  // Quad diagonal pattern per sector and quad (0 = (r,q)-(r+1,q+1)); computed
  // from the geometry when empty.
  std::vector<std::vector<char>> diagonals;
  // Arc segment count per sector; from the 15 degree rule when empty.
  std::vector<int> arc_segments;
  // Cyclic page order as (page, side) pairs; angle-sorted when empty.
  std::vector<std::pair<int, Side>> order;
};

CrossSection cross_section(const OpenBookSpec &spec, int m, double t, double eps,
                           const CrossSectionOptions &opts = {});

struct FoliationSample
{
  Vec3 y;
  Vec3 v;  // phi(y) - y
};

struct FoliationMap
{
  int sector = 0;
  std::vector<FoliationSample> samples;
  double max_length_factor = 0.0;    // max |v| / eps
  double max_gradient = 0.0;         // max |v(y_r+1) - v(y_r)| / |y_r+1 - y_r|
  double endpoint_angle = 0.0;       // max angle between v and +-N at the Gamma ends
  bool segment_property = true;      // y + z v stays inside the sector polygon
};

FoliationMap sector_foliation(const CrossSection &cs, int sector, int z_samples = 8);

// True when the 2D point lies in the cross-section polygon (closed).
bool section_contains(const CrossSection &cs, const Vec2 &zeta, double tol = 1e-12);

// ---------------------------------------------------------------------------
// Volume mesh of M_eps
// ---------------------------------------------------------------------------

struct VolumeMeshOptions
{
  double h = 0.1;
  int layers = 4;  // z-layers of the page slabs at the base level (even)
  int sleeve_intervals = 2;
  double grading = 1.25;
  int refine = 0;
  int min_closed_stations = 12;
  bool check_overlap = true;
};

struct FoliationLine
{
  int surface_node = -1;
  int sector = -1;
  std::vector<int> nodes;  // volume node ids for tau = 0..1
};

struct StationSection
{
  int binding = 0;
  int station = 0;
  Vec3 center;
  int surface_node = -1;  // binding node at this station
  std::vector<int> nodes;  // unique volume nodes of the cross-section
  std::vector<Vec2> zeta;
  std::vector<double> area;
  std::vector<FoliationLine> lines;
  double inscribed_factor = 0.0;
  double circumscribed_factor = 0.0;
};

struct VolumeMesh
{
  double eps = 0.0;
  int layers = 0;
  int sleeve_intervals = 0;
  int n_pages = 0;
  std::vector<Vec3> nodes;
  std::vector<std::array<int, 4>> tets;
  std::vector<int> regions;  // page k, or n_pages + m for binding m
  // Surface node -> volume node ids from z = -eps to z = eps (page slab region).
  std::vector<std::vector<int>> fiber_columns;
  // Surface node -> volume node at z = 0 (-1 when the node is not in the mesh).
  std::vector<int> surface_to_volume;
  // Volume node -> surface foot node of the extension.
  std::vector<int> foot;
  // Interface node sets Gamma_{k,m}, keyed by (page, binding).
  std::vector<std::pair<std::array<int, 2>, std::vector<int>>> gamma;
  std::vector<std::vector<StationSection>> sections;  // [binding][station]
  std::vector<int> stations;
  double min_inscribed_factor = 0.0;
  double max_circumscribed_factor = 0.0;
  // Largest gap between the planar cross-section and the ball-union definition
  // of the fattened binding, measured at the stations.
  double section_discrepancy = 0.0;

  std::size_t size() const { return nodes.size(); }
  int region_of_binding(int m) const { return n_pages + m; }
};

struct VolumeBuild
{
  SurfaceMesh surface;
  VolumeMesh volume;
};

// Builds the eps-adapted surface mesh and the conforming volume mesh.
VolumeBuild assemble_volume_mesh(const OpenBookSpec &spec, double eps,
                                 const VolumeMeshOptions &opts);

// Surface options matching a volume build.
SurfaceMeshOptions surface_options_for(const VolumeMeshOptions &opts, double eps);

double tet_signed_volume(const Vec3 &a, const Vec3 &b, const Vec3 &c, const Vec3 &d);
double mesh_volume(const VolumeMesh &mesh, int region = -1);

struct WatertightReport
{
  std::size_t boundary_faces = 0;
  std::size_t nonmanifold_faces = 0;
  std::size_t open_edges = 0;
  bool pass() const { return nonmanifold_faces == 0 && open_edges == 0; }
};
WatertightReport check_watertight(const VolumeMesh &mesh);

// Counts pairs of tets from distinct page regions whose interiors intersect.
std::size_t count_page_overlaps(const VolumeMesh &mesh);

// Splits a triangular prism (bottom a,b,c over top a',b',c') into three tets,
// choosing quad-face diagonals through the smallest global index.
std::array<std::array<int, 4>, 3> split_prism(const std::array<int, 6> &v);

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

// Legacy ASCII VTK. When region >= 0 only cells of that region are written.
void export_vtk(const SurfaceMesh &mesh, const std::string &path);
void export_vtk(const VolumeMesh &mesh, const std::string &path, int region = -1);

struct VtkSummary
{
  std::string header;
  std::size_t points = 0;
  std::size_t cells = 0;
  std::vector<int> cell_types;
  std::vector<int> cell_data;
};
VtkSummary read_vtk_summary(const std::string &path);

}  // namespace openbook
