// SPDX-License-Identifier: Apache-2.0
#include "openbook/io.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "openbook/error.hpp"

namespace openbook
{

void write_file_atomic(const std::string &path, const std::string &content)
{
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path())
  {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec)
    {
      fail(ErrorKind::Io, "cannot create directory for '" + path + "': " + ec.message());
    }
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
    {
      fail(ErrorKind::Io, "cannot write '" + path + "'");
    }
    out << content;
    out.flush();
    if (!out)
    {
      fail(ErrorKind::Io, "short write to '" + tmp + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec)
  {
    std::remove(tmp.c_str());
    fail(ErrorKind::Io, "cannot rename onto '" + path + "': " + ec.message());
  }
}

void CsvTable::add(std::vector<std::string> row)
{
  if (row.size() != columns.size())
  {
    fail(ErrorKind::Io, "CSV row width does not match schema " + schema);
  }
  rows.push_back(std::move(row));
}

std::string CsvTable::str() const
{
  std::ostringstream os;
  os << "# " << schema << " v" << version << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i)
  {
    os << (i ? "," : "") << columns[i];
  }
  os << "\n";
  for (const auto &r : rows)
  {
    for (std::size_t i = 0; i < r.size(); ++i)
    {
      os << (i ? "," : "") << r[i];
    }
    os << "\n";
  }
  return os.str();
}

std::string format_double(double v)
{
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string config_hash(const nlohmann::json &config)
{
  const std::string s = config.dump();
  unsigned long long h = 1469598103934665603ull;
  for (unsigned char c : s)
  {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string utc_timestamp()
{
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

nlohmann::json provenance(const nlohmann::json &config, unsigned long long seed)
{
  return {{"config", config},
          {"config_hash", config_hash(config)},
          {"seed", seed},
          {"timestamp", utc_timestamp()}};
}

}  // namespace openbook
