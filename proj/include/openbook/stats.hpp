// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

namespace openbook
{

struct Extrapolation
{
  double value = 0.0;
  double error = 0.0;
  // False when the two rungs are not ordered as a nested P1 pair would be;
  // value then falls back to the fine rung.
  bool nested = true;
};

// Second-order extrapolation from rungs h and h/2.
Extrapolation richardson(double coarse, double fine);

struct RateFit
{
  double slope = 0.0;
  double width = 0.0;      // standard error of the slope
  double intercept = 0.0;  // log-space
  int points = 0;
  int dropped = 0;         // nonpositive pairs filtered out
};

// Least-squares slope of log(value) against log(x).
RateFit fit_rate(const std::vector<std::pair<double, double>> &series);

}  // namespace openbook
