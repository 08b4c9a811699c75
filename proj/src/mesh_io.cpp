// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <sstream>

#include "openbook/io.hpp"
#include "openbook/mesh.hpp"

namespace openbook
{

namespace
{

void write_points(std::ostream &os, const std::vector<Vec3> &pts)
{
  os << "POINTS " << pts.size() << " double\n";
  for (const auto &p : pts)
  {
    os << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
}

}  // namespace

void export_vtk(const SurfaceMesh &mesh, const std::string &path)
{
  std::ostringstream os;
  os.precision(17);
  os << "# vtk DataFile Version 3.0\nopenbook surface mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  std::vector<Vec3> pts;
  for (const auto &n : mesh.nodes)
  {
    pts.push_back(n.x);
  }
  write_points(os, pts);
  std::vector<const SurfaceTriangle *> cells;
  for (const auto &t : mesh.triangles)
  {
    if (t.v[0] != t.v[1] && t.v[1] != t.v[2] && t.v[0] != t.v[2])
    {
      cells.push_back(&t);
    }
  }
  os << "CELLS " << cells.size() << ' ' << 4 * cells.size() << '\n';
  for (const auto *t : cells)
  {
    os << "3 " << t->v[0] << ' ' << t->v[1] << ' ' << t->v[2] << '\n';
  }
  os << "CELL_TYPES " << cells.size() << '\n';
  for (std::size_t i = 0; i < cells.size(); ++i)
  {
    os << "5\n";
  }
  os << "CELL_DATA " << cells.size() << "\nSCALARS region int 1\nLOOKUP_TABLE default\n";
  for (const auto *t : cells)
  {
    os << t->page << '\n';
  }
  write_file_atomic(path, os.str());
}

void export_vtk(const VolumeMesh &mesh, const std::string &path, int region)
{
  std::ostringstream os;
  os.precision(17);
  os << "# vtk DataFile Version 3.0\nopenbook volume mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  write_points(os, mesh.nodes);
  std::vector<std::size_t> cells;
  for (std::size_t t = 0; t < mesh.tets.size(); ++t)
  {
    if (region < 0 || mesh.regions[t] == region)
    {
      cells.push_back(t);
    }
  }
  os << "CELLS " << cells.size() << ' ' << 5 * cells.size() << '\n';
  for (std::size_t t : cells)
  {
    const auto &c = mesh.tets[t];
    os << "4 " << c[0] << ' ' << c[1] << ' ' << c[2] << ' ' << c[3] << '\n';
  }
  os << "CELL_TYPES " << cells.size() << '\n';
  for (std::size_t i = 0; i < cells.size(); ++i)
  {
    os << "10\n";
  }
  os << "CELL_DATA " << cells.size() << "\nSCALARS region int 1\nLOOKUP_TABLE default\n";
  for (std::size_t t : cells)
  {
    os << mesh.regions[t] << '\n';
  }
  write_file_atomic(path, os.str());
}

VtkSummary read_vtk_summary(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    fail(ErrorKind::Io, "cannot open '" + path + "'");
  }
  VtkSummary s;
  std::getline(in, s.header);
  std::string word;
  while (in >> word)
  {
    if (word == "POINTS")
    {
      std::string type;
      in >> s.points >> type;
      double x;
      for (std::size_t i = 0; i < 3 * s.points; ++i)
      {
        in >> x;
      }
    }
    else if (word == "CELLS")
    {
      std::size_t total;
      in >> s.cells >> total;
      int x;
      for (std::size_t i = 0; i < total; ++i)
      {
        in >> x;
      }
    }
    else if (word == "CELL_TYPES")
    {
      std::size_t n;
      in >> n;
      s.cell_types.resize(n);
      for (auto &t : s.cell_types)
      {
        in >> t;
      }
    }
    else if (word == "LOOKUP_TABLE")
    {
      in >> word;
      s.cell_data.resize(s.cells);
      for (auto &v : s.cell_data)
      {
        in >> v;
      }
    }
  }
  return s;
}

nlohmann::json mesh_to_json(const VolumeMesh &mesh)
{
  nlohmann::json j;
  j["eps"] = mesh.eps;
  j["layers"] = mesh.layers;
  j["nodes"] = nlohmann::json::array();
  for (const auto &p : mesh.nodes)
  {
    j["nodes"].push_back({p.x(), p.y(), p.z()});
  }
  j["cells"] = mesh.tets;
  j["tags"] = mesh.regions;
  return j;
}

nlohmann::json mesh_to_json(const SurfaceMesh &mesh)
{
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const auto &n : mesh.nodes)
  {
    j["nodes"].push_back({n.x.x(), n.x.y(), n.x.z()});
  }
  j["cells"] = nlohmann::json::array();
  j["tags"] = nlohmann::json::array();
  for (const auto &t : mesh.triangles)
  {
    j["cells"].push_back(t.v);
    j["tags"].push_back(t.page);
  }
  j["binding_nodes"] = mesh.binding_nodes;
  return j;
}

}  // namespace openbook
