// SPDX-License-Identifier: Apache-2.0
#include "openbook/stats.hpp"

#include <cmath>

#include "openbook/error.hpp"
#include "openbook/log.hpp"

namespace openbook
{

Extrapolation richardson(double coarse, double fine)
{
  Extrapolation e;
  const double d = fine - coarse;
  // P1 eigenvalues decrease under nested refinement.
  if (d > 1e-10 * std::max(1.0, std::abs(fine)))
  {
    log_warn("richardson: fine value exceeds coarse value (not nested); using the fine value");
    e.value = fine;
    e.error = std::abs(d);
    e.nested = false;
    return e;
  }
  e.value = fine + d / 3.0;
  e.error = std::abs(d) / 3.0;
  return e;
}

RateFit fit_rate(const std::vector<std::pair<double, double>> &series)
{
  RateFit f;
  std::vector<std::pair<double, double>> pts;
  for (const auto &[x, y] : series)
  {
    if (x > 0.0 && y > 0.0 && std::isfinite(x) && std::isfinite(y))
    {
      pts.emplace_back(std::log(x), std::log(y));
    }
    else
    {
      ++f.dropped;
    }
  }
  if (f.dropped > 0)
  {
    log_warn("fit_rate: dropped " + std::to_string(f.dropped) + " nonpositive pairs");
  }
  f.points = static_cast<int>(pts.size());
  if (f.points < 3)
  {
    fail(ErrorKind::Size, "fit_rate needs at least 3 positive pairs (have " +
                              std::to_string(f.points) + ")");
  }
  double mx = 0.0, my = 0.0;
  for (const auto &[x, y] : pts)
  {
    mx += x;
    my += y;
  }
  mx /= f.points;
  my /= f.points;
  double sxx = 0.0, sxy = 0.0;
  for (const auto &[x, y] : pts)
  {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (!(sxx > 0.0))
  {
    fail(ErrorKind::Size, "fit_rate needs at least two distinct abscissae");
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (const auto &[x, y] : pts)
  {
    const double r = y - (f.intercept + f.slope * x);
    ss += r * r;
  }
  f.width = f.points > 2 ? std::sqrt(ss / (f.points - 2) / sxx) : 0.0;
  return f;
}

}  // namespace openbook
