#include "ncw/scenario.hpp"

#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace ncw;

namespace {

// two-point instance at p=0.25, q=0.4, theta=pi/3 with coordinates {e22, flip}
const char* kPairDoc = R"({
  "id": "pair",
  "task": "dist",
  "params": { "p": 0.25, "q": 0.4 },
  "systems": {
    "A": {
      "state": [[[{"param":"p"}, 0], [0, 0]], [[0, 0], [{"param":"p","scale":-1,"offset":1}, 0]]],
      "dynamics": [{ "unitary_angle": 1.0471975511965976 }]
    },
    "B": {
      "state": [[[{"param":"q"}, 0], [0, 0]], [[0, 0], [{"param":"q","scale":-1,"offset":1}, 0]]],
      "dynamics": [{ "unitary_angle": 1.0471975511965976 }]
    }
  },
  "pair": ["A", "B"],
  "cost": { "coordinates": [
    [[[0,0],[0,0]],[[0,0],[1,0]]],
    [[[0,0],[1,0]],[[1,0],[0,0]]]
  ]}
})";

Json pair_doc() { return Json::parse(kPairDoc); }

}  // namespace

TEST_CASE("parameter nodes resolve to numbers") {
  Json doc = Json::parse(R"({"a": {"param": "x"}, "b": [{"param": "x", "scale": 2, "offset": 1}]})");
  Json r = resolve_params(doc, {{"x", 0.25}});
  CHECK(r["a"].get<double>() == 0.25);
  CHECK(r["b"][0].get<double>() == 1.5);

  CHECK_THROWS_AS(resolve_params(doc, {{"y", 1.0}}), ScenarioError);
}

TEST_CASE("scenario parse resolves systems, cost, and options") {
  Json doc = pair_doc();
  doc["solver"] = {{"tol", 1e-7}, {"max_iter", 500}};
  doc["variant"] = "modular";
  Scenario sc = parse_scenario(resolve_params(doc, scenario_defaults(doc)));
  CHECK(sc.id == "pair");
  CHECK(sc.task == Task::Dist);
  CHECK(sc.variant == Variant::Modular);
  CHECK(sc.solver.tol == 1e-7);
  CHECK(sc.solver.max_iter == 500);
  REQUIRE(sc.systems.size() == 2);
  const ScenarioSystem& a = find_system(sc, "A", "$");
  CHECK(a.built.state.dim == 2);
  CHECK(std::abs(a.built.state.density(0, 0) - Complex(0.25, 0.0)) < 1e-15);
  REQUIRE(sc.cost.has_value());
  CHECK(sc.cost->dim() == 2);
  CHECK(sc.cost->star_closed);
}

TEST_CASE("validation errors carry the field path") {
  Json doc = pair_doc();
  doc["systems"]["B"]["state"][0][0][0] = 0.9;  // trace 1.05
  try {
    parse_scenario(resolve_params(doc, scenario_defaults(doc)));
    FAIL("expected a ScenarioError");
  } catch (const ScenarioError& e) {
    CHECK(std::string(e.what()).find("$.systems.B.state") == 0);
  }

  Json missing = pair_doc();
  missing.erase("cost");
  CHECK_THROWS_AS(parse_scenario(resolve_params(missing, scenario_defaults(missing))),
                  ScenarioError);

  Json ragged = pair_doc();
  ragged["cost"]["coordinates"][0][0] = Json::array();  // empty first row
  CHECK_THROWS_AS(parse_scenario(resolve_params(ragged, scenario_defaults(ragged))),
                  ScenarioError);
}

TEST_CASE("dist task reproduces the pinned two-point value") {
  TaskResult res = run_dist(pair_doc());
  CHECK(res.exit_code == 0);
  CHECK(res.out.find("status              ok") != std::string::npos);
  // extract the reported cost line
  auto pos = res.out.find("optimal_cost");
  REQUIRE(pos != std::string::npos);
  double cost = std::stod(res.out.substr(pos + 12));
  CHECK(std::abs(cost - 0.5688611699158102) < 1e-5);

  RunOverrides ov;
  ov.variant = Variant::Modular;
  TaskResult mod = run_dist(pair_doc(), ov);
  pos = mod.out.find("optimal_cost");
  REQUIRE(pos != std::string::npos);
  CHECK(std::abs(std::stod(mod.out.substr(pos + 12)) - 2.15) < 1e-5);
}

TEST_CASE("dist task rejects documents without a pair") {
  Json doc = Json::parse(R"({"id": "v", "task": "verify"})");
  CHECK_THROWS_AS(run_dist(doc), ScenarioError);
}

TEST_CASE("sweep grid is row-major with the first parameter slowest") {
  std::vector<SweepParameter> params = {{"a", {1, 2}}, {"b", {10, 20, 30}}};
  std::vector<GridPoint> grid = sweep_grid(params);
  REQUIRE(grid.size() == 6);
  CHECK(grid[0].values[0].second == 1);
  CHECK(grid[0].values[1].second == 10);
  CHECK(grid[2].values[0].second == 1);
  CHECK(grid[2].values[1].second == 30);
  CHECK(grid[3].values[0].second == 2);
  CHECK(grid[3].values[1].second == 10);

  CHECK(sweep_grid({{"a", {}}}).empty());
}

TEST_CASE("sweep emits one CSV row per grid point in grid order") {
  Json doc = pair_doc();
  doc["task"] = "sweep";
  doc["sweep"] = {{"parameters", Json::array({{{"name", "q"}, {"values", {0.25, 0.3, 0.4}}}})}};
  TaskResult res = run_sweep(doc);
  CHECK(res.exit_code == 0);
  std::vector<std::string> lines;
  for (size_t at = 0; at < res.out.size();) {
    size_t nl = res.out.find('\n', at);
    lines.push_back(res.out.substr(at, nl - at));
    at = nl + 1;
  }
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] ==
        "id,q,variant,optimal_cost,distance,primal_residual,dual_residual,constraint_residual,"
        "iterations,status");
  CHECK(lines[1].find("pair,0.25,plain,") == 0);
  CHECK(lines[2].find("pair,0.3,plain,") == 0);
  CHECK(lines[3].find("pair,0.4,plain,") == 0);
  // q = p row sits at distance zero
  CHECK(lines[1].find(",ok") != std::string::npos);

  // byte-identical across repeats and worker counts
  TaskResult again = run_sweep(doc);
  CHECK(again.out == res.out);
  RunOverrides ov;
  ov.jobs = 3;
  TaskResult par = run_sweep(doc, ov);
  CHECK(par.out == res.out);
}

TEST_CASE("sweep records per-row failures and keeps going") {
  Json doc = pair_doc();
  doc["task"] = "sweep";
  // q = 1 makes B's density singular; the row fails, the others survive
  doc["sweep"] = {{"parameters", Json::array({{{"name", "q"}, {"values", {0.3, 1.0}}}})}};
  TaskResult res = run_sweep(doc);
  CHECK(res.exit_code == 3);
  CHECK(res.out.find("pair,0.3,plain,") != std::string::npos);
  CHECK(res.out.find("pair,1,,nan,nan,nan,nan,nan,0,error") != std::string::npos);
  CHECK(res.log.find("$.systems.B.state") != std::string::npos);
}

TEST_CASE("empty sweep range yields only the header") {
  Json doc = pair_doc();
  doc["task"] = "sweep";
  doc["sweep"] = {{"parameters", Json::array({{{"name", "q"}, {"values", Json::array()}}})}};
  TaskResult res = run_sweep(doc);
  CHECK(res.exit_code == 0);
  CHECK(res.out ==
        "id,q,variant,optimal_cost,distance,primal_residual,dual_residual,constraint_residual,"
        "iterations,status\n");
}

TEST_CASE("composite systems build reduced and augmented variants") {
  Json doc = Json::parse(R"({
    "id": "red",
    "task": "reduce",
    "system": "A",
    "systems": {
      "A": {
        "composite": {
          "state_r": [[[0.3, 0], [0, 0]], [[0, 0], [0.7, 0]]],
          "state_s": [[[0.25, 0], [0, 0]], [[0, 0], [0.75, 0]]],
          "dynamics": [{ "hamiltonian": [
            [[2,0],[0,0],[0,0],[0,0]],
            [[0,0],[4,0],[0,0],[0,0]],
            [[0,0],[0,0],[0,0],[0,0]],
            [[0,0],[0,0],[0,0],[3,0]]
          ]}]
        },
        "mode": "reduced"
      }
    }
  })");
  Scenario sc = parse_scenario(doc);
  const ScenarioSystem& a = find_system(sc, "A", "$");
  REQUIRE(a.composite.has_value());
  CHECK(a.built.state.dim == 2);
  CHECK(a.built.dynamics.entries[0].sampled.size() == default_times().size());

  TaskResult res = run_reduce(doc);
  CHECK(res.exit_code == 0);
  CHECK(res.out.find("semigroup defect") != std::string::npos);
  CHECK(res.out.find("state preservation defect") != std::string::npos);

  doc["systems"]["A"]["mode"] = "augmented";
  Scenario aug = parse_scenario(doc);
  CHECK(find_system(aug, "A", "$").built.state.dim == 4);
  CHECK(find_system(aug, "A", "$").built.dynamics.entries.back().label == "cond-exp");
}

TEST_CASE("verify task runs the named suites") {
  Json doc = Json::parse(
      R"({"id": "v", "task": "verify", "suites": ["torus-moments"], "cases": 10, "seed": 7})");
  TaskResult res = run_verify_scenario(doc);
  CHECK(res.exit_code == 0);
  CHECK(res.out.find("suite torus-moments: PASS cases=10") != std::string::npos);
  CHECK(res.out.find("verify: all suites passed") != std::string::npos);

  CHECK_THROWS_AS(run_verify({"no-such-suite"}, 1, 1), std::invalid_argument);
}
