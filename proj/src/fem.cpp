// SPDX-License-Identifier: Apache-2.0
#include "openbook/fem.hpp"

#include <cmath>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "openbook/error.hpp"

namespace openbook
{

const char *to_string(DofTag tag)
{
  switch (tag)
  {
    case DofTag::PageInterior:
      return "page";
    case DofTag::Binding:
      return "binding";
    case DofTag::Volume:
      return "volume";
  }
  return "?";
}

namespace
{

constexpr double min_measure = 1e-14;

// Runs `element(e, ktrip, mtrip)` over [0, count) with one triplet list per
// thread; static chunks concatenated in thread order keep element order.
template <class F>
void element_loop(std::size_t count, std::vector<Triplet> &k, std::vector<Triplet> &m, F element)
{
  int workers = 1;
#ifdef _OPENMP
  workers = omp_get_max_threads();
#endif
  std::vector<std::vector<Triplet>> kp(workers), mp(workers);
  std::vector<std::string> errors(workers);
#pragma omp parallel num_threads(workers)
  {
    int w = 0;
#ifdef _OPENMP
    w = omp_get_thread_num();
#endif
    const std::size_t lo = count * w / workers, hi = count * (w + 1) / workers;
    try
    {
      for (std::size_t e = lo; e < hi; ++e)
      {
        element(e, kp[w], mp[w]);
      }
    }
    catch (const Error &err)
    {
      errors[w] = err.what();
    }
  }
  for (int w = 0; w < workers; ++w)
  {
    if (!errors[w].empty())
    {
      fail(ErrorKind::Assembly, errors[w]);
    }
  }
  for (int w = 0; w < workers; ++w)
  {
    k.insert(k.end(), kp[w].begin(), kp[w].end());
    m.insert(m.end(), mp[w].begin(), mp[w].end());
  }
}

}  // namespace

FemPair assemble_surface(const SurfaceMesh &mesh)
{
  if (mesh.metric_cache.size() != mesh.triangles.size())
  {
    fail(ErrorKind::Assembly, "surface mesh has no metric cache");
  }
  FemPair pair;
  const int n = static_cast<int>(mesh.nodes.size());
  pair.dofs.resize(n);
  for (int i = 0; i < n; ++i)
  {
    const auto &node = mesh.nodes[i];
    pair.dofs[i] = {node.binding >= 0 ? DofTag::Binding : DofTag::PageInterior, i, node.page};
  }
  std::vector<double> area(mesh.triangles.size(), 0.0);
  std::vector<Triplet> kt, mt;
  element_loop(mesh.triangles.size(), kt, mt,
               [&](std::size_t e, std::vector<Triplet> &kl, std::vector<Triplet> &ml) {
                 const SurfaceTriangle &tri = mesh.triangles[e];
                 Eigen::Matrix2d b;
                 b.col(0) = tri.y[1] - tri.y[0];
                 b.col(1) = tri.y[2] - tri.y[0];
                 const double detb = std::abs(b.determinant());
                 if (!(detb > 0.0))
                 {
                   fail(ErrorKind::Assembly, "surface triangle " + std::to_string(e) +
                                                 " has zero chart area");
                 }
                 // Chart gradients of the barycentric functions (columns).
                 const Eigen::Matrix2d binv_t = b.inverse().transpose();
                 Eigen::Matrix<double, 2, 3> grad;
                 grad.col(1) = binv_t.col(0);
                 grad.col(2) = binv_t.col(1);
                 grad.col(0) = -grad.col(1) - grad.col(2);
                 Eigen::Matrix3d ke = Eigen::Matrix3d::Zero(), me = Eigen::Matrix3d::Zero();
                 double a = 0.0;
                 for (int q = 0; q < 3; ++q)
                 {
                   const QuadMetric &g = mesh.metric_cache[e][q];
                   const double w = detb / 6.0 * g.sqrt_det;
                   const double l1 = tri_quad_points[q][0], l2 = tri_quad_points[q][1];
                   const Eigen::Vector3d phi(1.0 - l1 - l2, l1, l2);
                   ke.noalias() += w * grad.transpose() * g.ginv * grad;
                   me.noalias() += w * phi * phi.transpose();
                   a += w;
                 }
                 if (a < min_measure)
                 {
                   std::ostringstream os;
                   os << "surface triangle " << e << " has area " << a << " (sliver)";
                   fail(ErrorKind::Assembly, os.str());
                 }
                 area[e] = a;
                 for (int i = 0; i < 3; ++i)
                 {
                   for (int j = 0; j < 3; ++j)
                   {
                     kl.push_back({tri.v[i], tri.v[j], ke(i, j)});
                     ml.push_back({tri.v[i], tri.v[j], me(i, j)});
                   }
                 }
               });
  for (double a : area)
  {
    pair.measure += a;
  }
  pair.stiffness = sparse_from_triplets(n, std::move(kt));
  pair.mass = sparse_from_triplets(n, std::move(mt));
  return pair;
}

void tet_element(const std::array<Vec3, 4> &x, Eigen::Matrix4d &k, Eigen::Matrix4d &m)
{
  Eigen::Matrix3d b;
  b.col(0) = x[1] - x[0];
  b.col(1) = x[2] - x[0];
  b.col(2) = x[3] - x[0];
  const double det = b.determinant();
  const double vol = det / 6.0;
  const Eigen::Matrix3d binv_t = b.inverse().transpose();
  Eigen::Matrix<double, 3, 4> grad;
  grad.block<3, 3>(0, 1) = binv_t;
  grad.col(0) = -binv_t.rowwise().sum();
  k = vol * grad.transpose() * grad;
  m = Eigen::Matrix4d::Constant(vol / 20.0);
  m.diagonal().setConstant(vol / 10.0);
}

FemPair assemble_volume(const VolumeMesh &mesh, int region)
{
  FemPair pair;
  const int n = static_cast<int>(mesh.nodes.size());
  pair.dofs.resize(n);
  for (int i = 0; i < n; ++i)
  {
    pair.dofs[i] = {DofTag::Volume, i, -1};
  }
  for (std::size_t t = 0; t < mesh.tets.size(); ++t)
  {
    for (int v : mesh.tets[t])
    {
      int &r = pair.dofs[v].region;
      r = r < 0 ? mesh.regions[t] : std::min(r, mesh.regions[t]);
    }
  }
  std::vector<double> vols(mesh.tets.size(), 0.0);
  std::vector<Triplet> kt, mt;
  element_loop(mesh.tets.size(), kt, mt,
               [&](std::size_t t, std::vector<Triplet> &kl, std::vector<Triplet> &ml) {
                 if (region >= 0 && mesh.regions[t] != region)
                 {
                   return;
                 }
                 const auto &c = mesh.tets[t];
                 const std::array<Vec3, 4> x = {mesh.nodes[c[0]], mesh.nodes[c[1]], mesh.nodes[c[2]],
                                                mesh.nodes[c[3]]};
                 const double vol = tet_signed_volume(x[0], x[1], x[2], x[3]);
                 if (vol < 0.0)
                 {
                   std::ostringstream os;
                   os << "inverted tetrahedron " << t << " (volume " << vol << ")";
                   fail(ErrorKind::Assembly, os.str());
                 }
                 if (vol < min_measure)
                 {
                   std::ostringstream os;
                   os << "tetrahedron " << t << " has volume " << vol << " (sliver)";
                   fail(ErrorKind::Assembly, os.str());
                 }
                 vols[t] = vol;
                 Eigen::Matrix4d ke, me;
                 tet_element(x, ke, me);
                 for (int i = 0; i < 4; ++i)
                 {
                   for (int j = 0; j < 4; ++j)
                   {
                     kl.push_back({c[i], c[j], ke(i, j)});
                     ml.push_back({c[i], c[j], me(i, j)});
                   }
                 }
               });
  for (double v : vols)
  {
    pair.measure += v;
  }
  pair.stiffness = sparse_from_triplets(n, std::move(kt));
  pair.mass = sparse_from_triplets(n, std::move(mt));
  return pair;
}

PairCertificate certify(const FemPair &pair)
{
  PairCertificate c;
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(pair.size());
  Eigen::VectorXd k1;
  spmv(pair.stiffness, one, k1);
  const double knorm = pair.stiffness.norm_inf();
  c.kernel_residual = knorm > 0.0 ? k1.lpNorm<Eigen::Infinity>() / knorm : 0.0;
  c.mass_total = pair.mass.sum();
  c.mass_defect = pair.measure > 0.0 ? std::abs(c.mass_total - pair.measure) / pair.measure : 0.0;
  const double mnorm = pair.mass.norm_inf();
  c.asymmetry = std::max(knorm > 0.0 ? pair.stiffness.asymmetry / knorm : 0.0,
                         mnorm > 0.0 ? pair.mass.asymmetry / mnorm : 0.0);
  return c;
}

FemPair assemble_interval(const std::vector<double> &x)
{
  FemPair pair;
  const int n = static_cast<int>(x.size());
  std::vector<Triplet> kt, mt;
  for (int e = 0; e + 1 < n; ++e)
  {
    const double len = x[e + 1] - x[e];
    if (!(len > 0.0))
    {
      fail(ErrorKind::Assembly, "interval nodes must increase");
    }
    const int a = e, b = e + 1;
    kt.insert(kt.end(), {{a, a, 1.0 / len}, {a, b, -1.0 / len}, {b, a, -1.0 / len}, {b, b, 1.0 / len}});
    mt.insert(mt.end(), {{a, a, len / 3.0}, {a, b, len / 6.0}, {b, a, len / 6.0}, {b, b, len / 3.0}});
    pair.measure += len;
  }
  pair.stiffness = sparse_from_triplets(n, std::move(kt));
  pair.mass = sparse_from_triplets(n, std::move(mt));
  pair.dofs.resize(n);
  for (int i = 0; i < n; ++i)
  {
    pair.dofs[i] = {DofTag::PageInterior, i, 0};
  }
  return pair;
}

}  // namespace openbook
