// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace openbook
{

struct SurfaceMesh;
struct VolumeMesh;

// Writes `content` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::string &path, const std::string &content);

// Frozen CSV layouts; the first line of every file is "# <schema> v<version>".
struct CsvTable
{
  std::string schema;
  int version = 1;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
  std::string str() const;
};

std::string format_double(double v);

// Stable 64-bit FNV-1a hash of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json &config);
std::string utc_timestamp();

// Provenance block: config echo with defaults, hash, seed, timestamp.
nlohmann::json provenance(const nlohmann::json &config, unsigned long long seed);

nlohmann::json mesh_to_json(const SurfaceMesh &mesh);
nlohmann::json mesh_to_json(const VolumeMesh &mesh);

}  // namespace openbook
