// Command-line front end: dist, sweep, verify, and reduce over JSON
// scenario files. Exit codes: 0 success, 1 verification failure, 2 input
// validation failure, 3 solver non-convergence.

#include "ncw/ncw.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

int log_level() {
  const char* v = std::getenv("NCW_LOG");
  if (!v) return 0;
  const std::string s(v);
  if (s.empty() || s == "0" || s == "quiet") return 0;
  return 1;
}

ncw::Json load_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ncw::ScenarioError(path, "cannot open file");
  try {
    return ncw::Json::parse(in);
  } catch (const std::exception& e) {
    throw ncw::ScenarioError(path, e.what());
  }
}

int emit(const ncw::TaskResult& res, const std::string& out_path) {
  if (log_level() >= 1 && !res.log.empty()) std::cerr << res.log;
  if (out_path.empty()) {
    std::cout << res.out;
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
      std::cerr << "cannot write '" << out_path << "'\n";
      return 2;
    }
    out << res.out;
  }
  return res.exit_code;
}

struct Flags {
  std::string scenario;
  std::string out;
  std::string variant;
  double tol = 0.0;
  int max_iter = 0;
  std::uint64_t seed = 0;
  int jobs = 1;
};

ncw::RunOverrides overrides(const CLI::App* cmd, const Flags& f) {
  auto given = [cmd](const std::string& name) {
    const CLI::Option* o = cmd->get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
  };
  ncw::RunOverrides ov;
  if (given("--variant"))
    ov.variant = f.variant == "modular" ? ncw::Variant::Modular : ncw::Variant::Plain;
  if (given("--tol")) ov.tol = f.tol;
  if (given("--max-iter")) ov.max_iter = f.max_iter;
  if (given("--seed")) ov.seed = f.seed;
  ov.jobs = f.jobs;
  return ov;
}

void add_solver_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--variant", f.variant, "constraint variant: plain or modular")
      ->check(CLI::IsMember({"plain", "modular"}));
  cmd->add_option("--tol", f.tol, "solver residual tolerance")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", f.max_iter, "solver iteration cap")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transport distances between finite-dimensional dynamical systems"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* dist = app.add_subcommand("dist", "distance between a scenario's system pair");
  dist->add_option("scenario", f.scenario, "scenario file")->required();
  add_solver_flags(dist, f);
  dist->add_option("--seed", f.seed, "suite seed (recorded, unused by the solver)");
  dist->add_option("--out", f.out, "write the report to a file");

  CLI::App* sweep = app.add_subcommand("sweep", "distance over a parameter grid, CSV output");
  sweep->add_option("scenario", f.scenario, "scenario file")->required();
  add_solver_flags(sweep, f);
  sweep->add_option("--seed", f.seed, "suite seed (recorded, unused by the solver)");
  sweep->add_option("--jobs", f.jobs, "worker threads for grid points")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--out", f.out, "write the CSV to a file");

  CLI::App* verify =
      app.add_subcommand("verify", "run randomized invariant suites or a verify scenario");
  std::string target;
  verify->add_option("target", target, "suite name or scenario file (default: every suite)");
  verify->add_option("--seed", f.seed, "suite seed");
  verify->add_option("--out", f.out, "write the report to a file");

  CLI::App* reduce = app.add_subcommand("reduce", "reduced dynamics of a composite system");
  reduce->add_option("scenario", f.scenario, "scenario file")->required();
  reduce->add_option("--out", f.out, "write the report to a file");

  CLI11_PARSE(app, argc, argv);

  try {
    ncw::TaskResult res;
    if (dist->parsed()) {
      res = ncw::run_dist(load_document(f.scenario), overrides(dist, f));
    } else if (sweep->parsed()) {
      res = ncw::run_sweep(load_document(f.scenario), overrides(sweep, f));
    } else if (reduce->parsed()) {
      res = ncw::run_reduce(load_document(f.scenario), overrides(reduce, f));
    } else {
      std::uint64_t seed = verify->count("--seed") ? f.seed : ncw::kDefaultSeed;
      if (target.empty()) {
        res = ncw::run_verify({}, seed);
      } else if (std::filesystem::exists(target)) {
        res = ncw::run_verify_scenario(load_document(target), overrides(verify, f));
      } else {
        res = ncw::run_verify({target}, seed);
      }
    }
    return emit(res, f.out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
