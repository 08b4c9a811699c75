// SPDX-License-Identifier: Apache-2.0
#include "openbook/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "openbook/eigen.hpp"
#include "openbook/error.hpp"

namespace openbook
{

namespace
{

constexpr double pi = std::numbers::pi;

// Root of f in [lo, hi] given a sign change.
template <class F>
double bisect(F f, double lo, double hi)
{
  double flo = f(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it)
  {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm <= 0.0) == (flo <= 0.0))
    {
      lo = mid;
      flo = fm;
    }
    else
    {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

OracleSpectrum finish(std::vector<double> values, int count, std::string method, double accuracy)
{
  std::sort(values.begin(), values.end());
  if (static_cast<int>(values.size()) < count)
  {
    fail(ErrorKind::Size, method + " oracle produced fewer than " + std::to_string(count) + " values");
  }
  values.resize(count);
  OracleSpectrum s;
  s.values = std::move(values);
  s.groups = group_values(s.values);
  s.method = std::move(method);
  s.accuracy = accuracy;
  return s;
}

}  // namespace

std::vector<std::pair<double, int>> group_values(const std::vector<double> &values, double rel)
{
  std::vector<std::pair<double, int>> g;
  for (double v : values)
  {
    if (!g.empty() && std::abs(v - g.back().first) <= rel * std::max(1.0, std::abs(v)))
    {
      ++g.back().second;
    }
    else
    {
      g.emplace_back(v, 1);
    }
  }
  return g;
}

std::vector<double> star_graph_fem(int k, double a, int per_edge)
{
  const int n = k * per_edge + 1;
  const double h = a / per_edge;
  std::vector<Triplet> kt, mt;
  auto node = [&](int edge, int j) { return j == 0 ? 0 : 1 + edge * per_edge + (j - 1); };
  for (int e = 0; e < k; ++e)
  {
    for (int j = 0; j < per_edge; ++j)
    {
      const int p = node(e, j), q = node(e, j + 1);
      kt.insert(kt.end(), {{p, p, 1 / h}, {p, q, -1 / h}, {q, p, -1 / h}, {q, q, 1 / h}});
      mt.insert(mt.end(), {{p, p, h / 3}, {p, q, h / 6}, {q, p, h / 6}, {q, q, h / 3}});
    }
  }
  FemPair pair;
  pair.stiffness = sparse_from_triplets(n, std::move(kt));
  pair.mass = sparse_from_triplets(n, std::move(mt));
  pair.measure = k * a;
  return dense_oracle(pair).values;
}

OracleSpectrum star_graph_spectrum(int k, double a, int count)
{
  if (k < 1 || !(a > 0.0) || count < 1)
  {
    fail(ErrorKind::Config, "star graph needs k >= 1, a > 0 and count >= 1");
  }
  // Equal constants on all edges: sin(s a) = 0, simple.
  // Zero at the center with zero-sum amplitudes: cos(s a) = 0, multiplicity k - 1.
  std::vector<double> mu;
  const auto f_sin = [a](double s) { return std::sin(s * a); };
  const auto f_cos = [a](double s) { return std::cos(s * a); };
  mu.push_back(0.0);
  for (int n = 1; static_cast<int>(mu.size()) < count + k; ++n)
  {
    const double s = bisect(f_sin, (n - 0.5) * pi / a, (n + 0.5) * pi / a);
    if (std::abs(f_sin(s)) > 1e-12)
    {
      fail(ErrorKind::Audit, "star secular root failed its residual check");
    }
    mu.push_back(s * s);
    if (k >= 2)
    {
      const double c = bisect(f_cos, (n - 1) * pi / a, n * pi / a);
      if (std::abs(f_cos(c)) > 1e-12)
      {
        fail(ErrorKind::Audit, "star secular root failed its residual check");
      }
      for (int r = 0; r < k - 1; ++r)
      {
        mu.push_back(c * c);
      }
    }
  }
  std::sort(mu.begin(), mu.end());
  mu.resize(count);

  // Independent check: Richardson-extrapolated dense P1 on the star.
  const int fine = std::max(64, std::min(400, 1200 / k));
  const auto coarse_v = star_graph_fem(k, a, fine / 2);
  const auto fine_v = star_graph_fem(k, a, fine);
  double dev = 0.0;
  for (int i = 0; i < count && i < static_cast<int>(fine_v.size()); ++i)
  {
    const double ext = fine_v[i] + (fine_v[i] - coarse_v[i]) / 3.0;
    dev = std::max(dev, std::abs(ext - mu[i]));
    if (std::abs(ext - mu[i]) > 1e-5 * std::max(1.0, mu[i]))
    {
      std::ostringstream os;
      os << "star oracle disagrees with its FEM check at index " << i << ": " << mu[i] << " vs "
         << ext;
      fail(ErrorKind::Audit, os.str());
    }
  }
  return finish(mu, count, "secular-equation", dev);
}

OracleSpectrum flat_book_spectrum(int k, double l, double a, int count)
{
  if (!(l > 0.0))
  {
    fail(ErrorKind::Config, "flat book needs a positive binding length");
  }
  const OracleSpectrum star = star_graph_spectrum(k, a, count);
  std::vector<double> values;
  for (int m = 0; m < count; ++m)
  {
    const double longi = (m * pi / l) * (m * pi / l);
    for (double mu : star.values)
    {
      values.push_back(longi + mu);
    }
  }
  return finish(values, count, "separable", star.accuracy);
}

// ---------------------------------------------------------------------------
// Axisymmetric reduction
// ---------------------------------------------------------------------------

namespace
{

bool is_revolution(ChartKind kind)
{
  return kind != ChartKind::FlatRectangle;
}

struct Profile
{
  int n = 0;
  struct Element
  {
    int a, b, page;
    double lo, hi;
  };
  std::vector<Element> elements;
  std::vector<char> pole;
};

Profile build_profile(const OpenBookSpec &spec, int elements)
{
  Profile pr;
  std::map<std::pair<int, int>, int> attached;  // (page, side) -> binding
  for (const auto &inc : spec.incidences)
  {
    for (const auto &e : inc.entries)
    {
      attached[{e.page, static_cast<int>(e.side)}] = inc.binding;
    }
  }
  std::vector<int> binding_node(spec.bindings.size(), -1);
  for (std::size_t m = 0; m < spec.bindings.size(); ++m)
  {
    binding_node[m] = pr.n++;
    pr.pole.push_back(0);
  }
  for (int k = 0; k < static_cast<int>(spec.pages.size()); ++k)
  {
    const ParamChart &chart = spec.pages[k];
    auto end_node = [&](Side side) {
      const auto it = attached.find({k, static_cast<int>(side)});
      if (it != attached.end())
      {
        return binding_node[it->second];
      }
      pr.pole.push_back(chart.collapsed(side) ? 1 : 0);
      return pr.n++;
    };
    const int first = end_node(Side::U2Min);
    std::vector<int> ids(elements + 1);
    ids[0] = first;
    for (int j = 1; j < elements; ++j)
    {
      ids[j] = pr.n++;
      pr.pole.push_back(0);
    }
    ids[elements] = end_node(Side::U2Max);
    const double lo = chart.domain.u2_min, hi = chart.domain.u2_max;
    for (int j = 0; j < elements; ++j)
    {
      pr.elements.push_back({ids[j], ids[j + 1], k, lo + (hi - lo) * j / elements,
                             lo + (hi - lo) * (j + 1) / elements});
    }
  }
  return pr;
}

using SpMat = Eigen::SparseMatrix<double>;

struct Block
{
  SpMat k, m;
  int n = 0;
};

Block assemble_block(const OpenBookSpec &spec, const Profile &pr, int az)
{
  // Poles carry a zero condition for |m| >= 1.
  std::vector<int> dof(pr.n, -1);
  int n = 0;
  for (int i = 0; i < pr.n; ++i)
  {
    if (!(az != 0 && pr.pole[i]))
    {
      dof[i] = n++;
    }
  }
  static const double gx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                               0.8611363115940526};
  static const double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                               0.3478548451374538};
  std::vector<Eigen::Triplet<double>> kt, mt;
  for (const auto &el : pr.elements)
  {
    const ParamChart &chart = spec.pages[el.page];
    const double h = el.hi - el.lo;
    Eigen::Matrix2d ke = Eigen::Matrix2d::Zero(), me = Eigen::Matrix2d::Zero();
    for (int q = 0; q < 4; ++q)
    {
      const double u = el.lo + 0.5 * h * (1.0 + gx[q]);
      const ChartEval ev = eval_chart(chart, Vec2(chart.domain.u1_min, u));
      const double r = ev.jacobian.col(0).norm();
      const double g = ev.jacobian.col(1).squaredNorm();
      const double w = 0.5 * h * gw[q] * r * std::sqrt(g);
      const Eigen::Vector2d phi((el.hi - u) / h, (u - el.lo) / h);
      const Eigen::Vector2d dphi(-1.0 / h, 1.0 / h);
      ke += w * (dphi * dphi.transpose() / g);
      if (az != 0)
      {
        ke += w * (static_cast<double>(az) * az / (r * r)) * phi * phi.transpose();
      }
      me += w * phi * phi.transpose();
    }
    const int ids[2] = {dof[el.a], dof[el.b]};
    for (int i = 0; i < 2; ++i)
    {
      for (int j = 0; j < 2; ++j)
      {
        if (ids[i] >= 0 && ids[j] >= 0)
        {
          kt.emplace_back(ids[i], ids[j], ke(i, j));
          mt.emplace_back(ids[i], ids[j], me(i, j));
        }
      }
    }
  }
  Block b;
  b.n = n;
  b.k.resize(n, n);
  b.m.resize(n, n);
  b.k.setFromTriplets(kt.begin(), kt.end());
  b.m.setFromTriplets(mt.begin(), mt.end());
  return b;
}

// Sturm-type counter: number of eigenvalues below sigma from the inertia of
// the LDL^T factors of K - sigma M.
class InertiaCounter
{
public:
  explicit InertiaCounter(const Block &b) : b_(b)
  {
    pattern_ = b.k - 1.0 * b.m;
    ldlt_.analyzePattern(pattern_);
  }

  int below(double sigma)
  {
    const SpMat a = b_.k - sigma * b_.m;
    ldlt_.factorize(a);
    const auto &d = ldlt_.vectorD();
    int neg = 0;
    for (int i = 0; i < d.size(); ++i)
    {
      neg += d[i] < 0.0 ? 1 : 0;
    }
    return neg;
  }

private:
  const Block &b_;
  SpMat pattern_;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
};

std::vector<double> block_eigenvalues(const Block &b, int count)
{
  InertiaCounter counter(b);
  std::vector<double> out;
  double hi = 1.0;
  while (counter.below(hi) < count)
  {
    hi *= 2.0;
    if (hi > 1e12)
    {
      fail(ErrorKind::Solver, "axisymmetric block has too few eigenvalues");
    }
  }
  double lo = -1.0;
  for (int i = 0; i < count; ++i)
  {
    double a = lo, c = hi;
    while (c - a > 1e-13 * std::max(1.0, std::abs(c)))
    {
      const double mid = 0.5 * (a + c);
      if (counter.below(mid) > i)
      {
        c = mid;
      }
      else
      {
        a = mid;
      }
    }
    out.push_back(0.5 * (a + c));
    lo = a;
  }
  return out;
}

}  // namespace

void check_axisymmetric(const OpenBookSpec &spec)
{
  if (spec.pages.empty())
  {
    fail(ErrorKind::Geometry, "axisymmetric oracle needs at least one page");
  }
  const Vec3 &o = spec.pages[0].origin;
  auto on_axis = [&](const Vec3 &p) {
    return std::abs(p.x() - o.x()) <= 1e-12 && std::abs(p.y() - o.y()) <= 1e-12;
  };
  for (std::size_t k = 0; k < spec.pages.size(); ++k)
  {
    const ParamChart &c = spec.pages[k];
    if (!is_revolution(c.kind) || !c.domain.periodic_u1 || !on_axis(c.origin))
    {
      fail(ErrorKind::Geometry, "symmetry error: page " + std::to_string(k) +
                                    " is not a full surface of revolution about the common axis");
    }
  }
  for (std::size_t m = 0; m < spec.bindings.size(); ++m)
  {
    const BindingCurve &b = spec.bindings[m];
    if (b.kind() != CurveKind::Circle || !on_axis(b.center()))
    {
      fail(ErrorKind::Geometry, "symmetry error: binding " + std::to_string(m) +
                                    " is not a circle centred on the common axis");
    }
  }
}

std::vector<double> axisym_block(const OpenBookSpec &spec, int m, int count, int elements)
{
  check_axisymmetric(spec);
  const Profile pr = build_profile(spec, elements);
  const Block b = assemble_block(spec, pr, m);
  return block_eigenvalues(b, count);
}

OracleSpectrum axisym_spectrum(const OpenBookSpec &spec, int count, const AxisymOptions &opts)
{
  check_axisymmetric(spec);
  if (opts.m_max < 0 || opts.elements < 2 || count < 1)
  {
    fail(ErrorKind::Config, "axisymmetric oracle needs m_max >= 0, elements >= 2, count >= 1");
  }
  const int blocks = opts.m_max + 2;  // the last block is the cutoff guard
  std::vector<std::vector<double>> ext(blocks), err(blocks);
  const Profile coarse = build_profile(spec, opts.elements);
  const Profile fine = build_profile(spec, 2 * opts.elements);
  std::vector<std::string> errors(blocks);
#pragma omp parallel for schedule(dynamic)
  for (int m = 0; m < blocks; ++m)
  {
    try
    {
      const int want = m == blocks - 1 ? 1 : count;
      const auto vc = block_eigenvalues(assemble_block(spec, coarse, m), want);
      const auto vf = block_eigenvalues(assemble_block(spec, fine, m), want);
      for (int i = 0; i < want; ++i)
      {
        const double d = vf[i] - vc[i];
        ext[m].push_back(d >= 0.0 ? vf[i] - d / 3.0 : vf[i]);
        err[m].push_back(std::abs(d) / 3.0);
      }
    }
    catch (const Error &e)
    {
      errors[m] = e.what();
    }
  }
  for (const auto &e : errors)
  {
    if (!e.empty())
    {
      fail(ErrorKind::Solver, e);
    }
  }
  std::vector<std::pair<double, double>> pool;  // (value, error estimate)
  for (int m = 0; m + 1 < blocks; ++m)
  {
    for (std::size_t i = 0; i < ext[m].size(); ++i)
    {
      pool.emplace_back(ext[m][i], err[m][i]);
      if (m > 0)
      {
        pool.emplace_back(ext[m][i], err[m][i]);
      }
    }
  }
  std::sort(pool.begin(), pool.end());
  const double guard = ext[blocks - 1].front();
  if (static_cast<int>(pool.size()) < count || pool[count - 1].first >= guard)
  {
    std::ostringstream os;
    os << "azimuthal cutoff m_max = " << opts.m_max << " is too low for " << count
       << " eigenvalues (block " << blocks - 1 << " starts at " << guard << ")";
    fail(ErrorKind::Size, os.str());
  }
  std::vector<double> values;
  double accuracy = 0.0;
  for (int i = 0; i < count; ++i)
  {
    values.push_back(pool[i].first);
    accuracy = std::max(accuracy, pool[i].second);
  }
  return finish(values, count, "axisymmetric-1D", accuracy);
}

}  // namespace openbook
