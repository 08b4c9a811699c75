// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "openbook/io.hpp"
#include "openbook/spec_io.hpp"
#include "openbook/study.hpp"

using namespace openbook;
using nlohmann::json;
namespace fs = std::filesystem;

namespace
{

std::string slurp(const fs::path &p)
{
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct Run
{
  int code = -1;
  std::string out;
};

Run cli(const std::string &args)
{
  const fs::path out = fs::temp_directory_path() / "openbook_cli_out.txt";
  const std::string cmd = std::string(OPENBOOK_CLI) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  fs::remove(out);
  return r;
}

}  // namespace

TEST_CASE("atomic writes replace the target")
{
  const fs::path p = fs::temp_directory_path() / "openbook_atomic.txt";
  write_file_atomic(p.string(), "one");
  write_file_atomic(p.string(), "two");
  CHECK(slurp(p) == "two");
  for (const auto &e : fs::directory_iterator(fs::temp_directory_path()))
  {
    const std::string name = e.path().filename().string();
    CHECK_FALSE((name.find("openbook_atomic.txt") != std::string::npos && name != "openbook_atomic.txt"));
  }
  // A regular file cannot serve as the parent directory.
  CHECK_THROWS_AS(write_file_atomic((p / "x.txt").string(), "x"), Error);
  fs::remove(p);
}

TEST_CASE("csv layout and number formatting")
{
  CsvTable t;
  t.schema = "demo";
  t.columns = {"a", "b"};
  t.add({"1", format_double(0.1)});
  CHECK(t.str() == "# demo v1\na,b\n1," + format_double(0.1) + "\n");
  CHECK(std::stod(format_double(0.1)) == 0.1);
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("config hash and provenance")
{
  const json a = {{"x", 1}, {"y", {1, 2}}};
  const json b = json::parse(R"({"y":[1,2],"x":1})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) != config_hash(json{{"x", 2}, {"y", {1, 2}}}));
  const json p = provenance(a, 9);
  CHECK(p["seed"] == 9);
  CHECK(p["config"] == a);
  CHECK(p["config_hash"] == config_hash(a));
  CHECK(std::regex_match(p["timestamp"].get<std::string>(),
                         std::regex(R"(\d{4}-\d\d-\d\dT\d\d:\d\d:\d\dZ)")));
}

TEST_CASE("cli exit codes")
{
  CHECK(cli("validate --geom " + fixture("flat3.json")).code == 0);
  CHECK(cli("validate --geom /nonexistent.json").code == 2);
  CHECK(cli("oracle --case nope").code == 2);
  CHECK(cli("limit --bogus-flag").code == 2);
  CHECK(cli("").code == 2);

  // Two coincident pages: not transverse.
  json doc = read_json_file(fixture("flat3.json"));
  doc["pages"][1]["v_axis"] = doc["pages"][0]["v_axis"];
  const fs::path bad = fs::temp_directory_path() / "openbook_bad_geom.json";
  write_file_atomic(bad.string(), doc.dump());
  const Run v = cli("validate --geom " + bad.string());
  CHECK(v.code == 3);
  CHECK(v.out.find("FAIL") != std::string::npos);
  CHECK(cli("limit --geom " + bad.string()).code == 3);
  fs::remove(bad);

  // eps above the fattening bound.
  CHECK(cli("converge --geom " + fixture("flat3.json") + " --eps 0.5,0.1").code == 2);
}

TEST_CASE("cli outputs")
{
  const Run o = cli("oracle --case flat-book --k 3 --l 3.141592653589793 --a 1 --n 7");
  REQUIRE(o.code == 0);
  std::istringstream in(o.out);
  std::string l1, l2, l3, l4;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  std::getline(in, l4);
  CHECK(l1 == "# openbook-eigenvalues v1");
  CHECK(l2.rfind("# provenance ", 0) == 0);
  CHECK(l3 == "index,lambda,residual");
  CHECK(l4.rfind("0,0,", 0) == 0);

  const Run j = cli("oracle --case flat-star --k 3 --a 1 --n 4 --format json");
  REQUIRE(j.code == 0);
  const json doc = json::parse(j.out);
  CHECK(doc["values"].size() == 4);
  CHECK(doc["method"] == "secular-equation");
  CHECK(doc["provenance"].contains("config_hash"));

  const fs::path dir = fs::temp_directory_path() / "openbook_cli_mesh";
  fs::create_directories(dir);
  const Run m = cli("mesh --geom " + fixture("flat3.json") + " --eps 0.1 --h 0.2 --layers 4 --out " +
                    dir.string());
  CHECK(m.code == 0);
  CHECK(fs::exists(dir / "volume.vtk"));
  CHECK(fs::exists(dir / "mesh.json"));
  const json summary = json::parse(slurp(dir / "mesh.json"));
  CHECK(summary["watertight"] == true);
  fs::remove_all(dir);
}

TEST_CASE("README documents every subcommand and flag")
{
  const std::string readme = slurp(OPENBOOK_README);
  REQUIRE_FALSE(readme.empty());
  const Run top = cli("--help");
  std::set<std::string> commands;
  const std::regex cmd_re(R"(^\s{2}(\w+)\s{2,})");
  std::istringstream in(top.out);
  std::string line;
  bool in_subs = false;
  while (std::getline(in, line))
  {
    if (line.rfind("Subcommands:", 0) == 0)
    {
      in_subs = true;
      continue;
    }
    std::smatch m;
    if (in_subs && std::regex_search(line, m, cmd_re))
    {
      commands.insert(m[1]);
    }
  }
  CHECK(commands.size() == 7);
  std::set<std::string> flags;
  for (const auto &c : commands)
  {
    CHECK_MESSAGE(readme.find("openbook " + c) != std::string::npos, "subcommand ", c);
    const std::string help = cli(c + " --help").out;
    const std::regex flag_re(R"(--[a-z][a-z-]*)");
    for (auto it = std::sregex_iterator(help.begin(), help.end(), flag_re); it != std::sregex_iterator(); ++it)
    {
      flags.insert(it->str());
    }
  }
  CHECK(flags.size() > 10);
  for (const auto &f : flags)
  {
    CHECK_MESSAGE(readme.find("`" + f) != std::string::npos, "flag ", f);
  }
}

TEST_CASE("README plan example parses")
{
  const std::string readme = slurp(OPENBOOK_README);
  const std::size_t start = readme.find("```json\n");
  REQUIRE(start != std::string::npos);
  const std::size_t body = start + 8;
  const json doc = json::parse(readme.substr(body, readme.find("```", body) - body));
  const StudyPlan p = plan_from_json(doc, OPENBOOK_FIXTURE_DIR);
  CHECK(p.eps.size() == 4);
  CHECK(layers_for(p, 0) == 32);
  CHECK(p.audits.size() == 4);
}
