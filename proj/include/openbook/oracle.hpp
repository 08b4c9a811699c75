// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "openbook/geometry.hpp"

namespace openbook
{

struct OracleSpectrum
{
  // Ascending, repeated according to multiplicity.
  std::vector<double> values;
  // Distinct values with their multiplicities.
  std::vector<std::pair<double, int>> groups;
  std::string method;  // secular-equation | separable | axisymmetric-1D
  // Estimated absolute error of the largest returned value.
  double accuracy = 0.0;
};

// Groups a sorted list into (value, multiplicity) runs of relative width rel.
std::vector<std::pair<double, int>> group_values(const std::vector<double> &values,
                                                 double rel = 1e-9);

// -d^2/dt^2 on a star of k edges of length a, Kirchhoff at the center and
// Neumann at the tips. Roots come from bisection on the two secular factors
// and are checked against a dense P1 solve on the star.
OracleSpectrum star_graph_spectrum(int k, double a, int count);

// Dense P1 eigenvalues of the same star with `per_edge` elements on each edge.
std::vector<double> star_graph_fem(int k, double a, int per_edge);

// (m pi / l)^2 + mu_j over longitudinal cosine modes and star modes.
OracleSpectrum flat_book_spectrum(int k, double l, double a, int count);

struct AxisymOptions
{
  int m_max = 8;
  // P1 elements per page profile on the coarse rung; Richardson uses 2x.
  int elements = 1000;
};

// Throws Geometry when the book is not invariant under rotation about a
// common vertical axis.
void check_axisymmetric(const OpenBookSpec &spec);

// Azimuthal Fourier reduction: one coupled 1D Sturm-Liouville system per |m|,
// eigenvalues by inertia counting (bisection) and Richardson over two rungs.
OracleSpectrum axisym_spectrum(const OpenBookSpec &spec, int count, const AxisymOptions &opts = {});

// Lowest `count` eigenvalues of a single azimuthal block at the given
// resolution (no extrapolation).
std::vector<double> axisym_block(const OpenBookSpec &spec, int m, int count, int elements);

}  // namespace openbook
