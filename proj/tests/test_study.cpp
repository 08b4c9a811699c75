// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fixtures.hpp"
#include "openbook/spec_io.hpp"
#include "openbook/study.hpp"

using namespace openbook;
using nlohmann::json;
using std::numbers::pi;

namespace
{

json square_plan()
{
  return {{"geometry", "unit_square.json"},
          {"eps", {0.2, 0.1}},
          {"n_eigs", 4},
          {"surface", {{"h", 0.1}}},
          {"volume", {{"h", 0.1}}},
          {"seed", 3}};
}

std::string config_error(const json &doc)
{
  try
  {
    plan_from_json(doc, OPENBOOK_FIXTURE_DIR);
  }
  catch (const Error &e)
  {
    return e.kind() == ErrorKind::Config ? e.what() : "wrong kind";
  }
  return "";
}

}  // namespace

TEST_CASE("richardson on nested rungs")
{
  // lambda_h = lambda + c h^2: coarse 1 + 4c, fine 1 + c.
  const Extrapolation e = richardson(1.04, 1.01);
  CHECK(e.value == doctest::Approx(1.0));
  CHECK(e.error == doctest::Approx(0.01));
  CHECK(e.nested);
  const Extrapolation bad = richardson(1.0, 1.1);
  CHECK_FALSE(bad.nested);
  CHECK(bad.value == 1.1);
}

TEST_CASE("rate fit")
{
  std::vector<std::pair<double, double>> s;
  for (double x : {0.2, 0.1, 0.05, 0.025})
  {
    s.emplace_back(x, 3.0 * x * x);
  }
  const RateFit f = fit_rate(s);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.width < 1e-12);
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0));
  s.emplace_back(0.01, 0.0);
  CHECK(fit_rate(s).dropped == 1);
  CHECK_THROWS_AS(fit_rate({{1.0, 1.0}, {2.0, 0.0}, {3.0, -1.0}}), Error);
}

TEST_CASE("plan reader")
{
  const StudyPlan p = plan_from_json(square_plan(), OPENBOOK_FIXTURE_DIR);
  CHECK(p.eps == std::vector<double>{0.2, 0.1});
  CHECK(p.n_eigs == 4);
  CHECK(p.seed == 3);
  CHECK(p.ladder == 2);
  CHECK(layers_for(p, 0) == 16);
  CHECK(layers_for(p, 1) == 8);
  CHECK(sleeve_intervals_for(p) >= 2);
  const json echo = plan_to_json(p);
  CHECK(echo["volume"]["layers"] == json({16, 8}));
  CHECK(echo["solver"]["preconditioner"] == "factorized");

  json d = square_plan();
  d["eps"] = {0.1, 0.2};
  CHECK(config_error(d).find("descending") != std::string::npos);
  d = square_plan();
  d["eps"] = {0.6, 0.1};
  CHECK(config_error(d).find("eps0") != std::string::npos);
  d = square_plan();
  d["volume"]["layers"] = {4};
  CHECK(config_error(d).find("/volume/layers") != std::string::npos);
  d = square_plan();
  d["volume"]["layers"] = {4, 5};
  CHECK(config_error(d).find("even") != std::string::npos);
  d = square_plan();
  d["colour"] = 1;
  CHECK_FALSE(config_error(d).empty());
  d = square_plan();
  d["audits"] = {"everything"};
  CHECK(config_error(d).find("/audits/0") != std::string::npos);
  d = square_plan();
  d["volume"]["layers"] = 6;
  CHECK(config_error(d).empty());
}

TEST_CASE("oracle selection")
{
  OpenBookSpec flat = load_spec(fixture("flat3.json"));
  flat.finalize();
  const auto o = oracle_for(flat, {}, 6);
  REQUIRE(o.has_value());
  CHECK(o->values[1] == doctest::Approx(1.0));
  OracleRequest none;
  none.kind = "none";
  CHECK_FALSE(oracle_for(flat, none, 6).has_value());
  OpenBookSpec disk = load_spec(fixture("disk_hemispheres.json"));
  disk.finalize();
  OracleRequest ax;
  ax.axisym.elements = 200;
  const auto od = oracle_for(disk, ax, 4);
  REQUIRE(od.has_value());
  CHECK(od->method == "axisymmetric-1D");
}

TEST_CASE("gap diagnostics on synthetic spectra")
{
  StudyPlan p = plan_from_json(square_plan(), OPENBOOK_FIXTURE_DIR);
  p.n_eigs = 3;
  StudyReport rep;
  rep.limit.converged = {{0.0, 1.0, 2.0}, {0.0, 1e-6, 1e-6}, true};
  const std::vector<std::vector<double>> fat = {{0.0, 1.2, 2.0}, {0.0, 1.1, 2.0}};
  for (std::size_t i = 0; i < fat.size(); ++i)
  {
    FattenedSpectrum f;
    f.eps = p.eps[i];
    f.rungs.resize(2);
    f.converged = {fat[i], {0.0, 1e-6, 1e-6}, true};
    rep.fattened.push_back(f);
  }
  compute_gaps(p, rep);
  REQUIRE(rep.diagnostics.size() == 3);
  CHECK(rep.diagnostics[0].exact_mode);
  CHECK(rep.diagnostics[2].exact_mode);
  CHECK_FALSE(rep.diagnostics[1].exact_mode);
  CHECK(rep.diagnostics[1].monotone);
  CHECK(rep.diagnostics[1].final_rel_gap == doctest::Approx(0.1));
  CHECK(rep.valid);
  CHECK(rep.gaps.size() == 6);

  // Growing gap breaks monotonicity.
  rep.fattened[1].converged.values[1] = 1.3;
  rep.gaps.clear();
  rep.diagnostics.clear();
  compute_gaps(p, rep);
  CHECK_FALSE(rep.diagnostics[1].monotone);

  const std::string csv = gaps_csv(rep).str();
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# openbook-gaps v1");
  std::getline(in, line);
  CHECK(line == "n,eps,lambda_limit,lambda_eps,gap");
}

TEST_CASE("slab study end to end")
{
  StudyPlan p = plan_from_json(square_plan(), OPENBOOK_FIXTURE_DIR);
  const auto dir = std::filesystem::temp_directory_path() / "openbook_study_test";
  std::filesystem::remove_all(dir);
  p.out_dir = dir.string();
  const StudyReport rep = run_convergence(p);
  CHECK(rep.complete);
  REQUIRE(rep.limit.converged.values.size() == 4);
  CHECK(rep.limit.converged.values[1] == doctest::Approx(pi * pi).epsilon(2e-3));
  CHECK(rep.limit.converged.values[3] == doctest::Approx(2 * pi * pi).epsilon(2e-3));
  CHECK(rep.limit.oracle_max_rel < 2e-3);
  // The slab is a product: the fattened spectrum has the square's low modes.
  for (const auto &g : rep.gaps)
  {
    CHECK(g.gap <= 2e-3 * std::max(1.0, g.lambda_limit));
  }
  write_study(p, rep);
  CHECK(std::filesystem::exists(dir / "study.json"));
  CHECK(std::filesystem::exists(dir / "gaps.csv"));
  std::ifstream f(dir / "study.json");
  const json doc = json::parse(f);
  CHECK(doc.contains("provenance"));
  CHECK(doc["provenance"].contains("config_hash"));
  CHECK(doc["gaps"].size() == rep.gaps.size());
  std::filesystem::remove_all(dir);

  // Same seed, same numbers.
  const StudyReport again = run_convergence(p);
  CHECK(again.limit.converged.values == rep.limit.converged.values);
  CHECK(again.fattened[0].converged.values == rep.fattened[0].converged.values);
}
