// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "openbook/mesh.hpp"
#include "openbook/sparse.hpp"

namespace openbook
{

enum class DofTag
{
  PageInterior,
  Binding,
  Volume
};

const char *to_string(DofTag tag);

struct DofInfo
{
  DofTag tag = DofTag::PageInterior;
  int node = -1;    // mesh node
  int region = -1;  // page for surface DOFs, tet region for volume DOFs
};

struct FemPair
{
  SparseSym stiffness;
  SparseSym mass;
  std::vector<DofInfo> dofs;
  // Total area or volume integrated by the assembly.
  double measure = 0.0;

  int size() const { return stiffness.n; }
};

// Metric-weighted P1 Laplace-Beltrami pair from the chart triangles.
FemPair assemble_surface(const SurfaceMesh &mesh);

// Standard P1 pair on the tetrahedra; `region` >= 0 keeps only that region
// (DOFs still span the whole mesh).
FemPair assemble_volume(const VolumeMesh &mesh, int region = -1);

// P1 stiffness and mass of one tetrahedron.
void tet_element(const std::array<Vec3, 4> &x, Eigen::Matrix4d &k, Eigen::Matrix4d &m);

struct PairCertificate
{
  double kernel_residual = 0.0;  // ||K 1|| / ||K||
  double mass_total = 0.0;       // sum of all mass entries
  double mass_defect = 0.0;      // |mass_total - measure| / measure
  double asymmetry = 0.0;          // max |a_ij - a_ji| / ||A||_inf over both matrices
  bool pass() const { return kernel_residual <= 1e-10 && mass_defect <= 1e-8 && asymmetry <= 1e-12; }
};

PairCertificate certify(const FemPair &pair);

// 1D P1 pair on a path graph; used by the star and profile oracles.
FemPair assemble_interval(const std::vector<double> &x);

}  // namespace openbook
