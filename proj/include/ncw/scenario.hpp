#pragma once

// Scenario documents drive the command-line front end: JSON descriptions of
// systems, cost coordinates, and solver settings, expanded over sweep grids
// and emitted as text reports or CSV. Validation errors carry the path of
// the offending field.
//
// Document layout (all matrices are nested arrays of [re, im] pairs):
//   id       name echoed into reports and CSV rows
//   task     "dist" | "sweep" | "verify" | "reduce"
//   variant  "plain" | "modular" (default "plain")
//   params   { name: number, ... } default parameter values
//   systems  { name: system, ... }
//   pair     [name, name] for dist and sweep
//   system   name for reduce (must describe a composite)
//   cost     { "coordinates": [matrix, ...] }
//   solver   { "tol", "max_iter", "rho", "adaptive_rho" }
//   sweep    { "parameters": [ { "name", "values": [...] }, ... ] }
//   suites   [suite name, ...] for verify (default: every registered suite)
//   cases    per-suite case count for verify (default: suite defaults)
//   seed     suite seed for verify
//
// A system is either direct,
//   { "state": matrix, "dynamics": [item, ...] }
// or built from a composite,
//   { "composite": { "state_r": m, "state_s": m, "dynamics": [...] },
//     "mode": "reduced" | "augmented", "times": [...] }
// where dynamics items are
//   { "unitary_angle": t }                   phase gate diag(1, e^{it}), tag 1
//   { "hamiltonian": m, "times": [...] }     e^{itm} conjugation per time
//   { "choi": m, "time": t }                 explicit channel, tag t
//   { "modular": bool }                      toggle the modular balance slot
// Any number may instead be { "param": name, "scale": s, "offset": o },
// resolved as o + s * value before parsing; sweep grids overlay `params`.

#include "ncw/solver.hpp"
#include "ncw/verify.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace ncw {

using Json = nlohmann::json;

constexpr std::uint64_t kDefaultSeed = 20260816;

struct ScenarioError : std::runtime_error {
  ScenarioError(const std::string& field, const std::string& message)
      : std::runtime_error(field + ": " + message) {}
};

// ---- leaf parsing ----

namespace scenario_detail {

inline const Json& member(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw ScenarioError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ScenarioError(path + "." + key, "missing");
  return *it;
}

inline double number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ScenarioError(path, "expected a number");
  return j.get<double>();
}

inline std::string text(const Json& j, const std::string& path) {
  if (!j.is_string()) throw ScenarioError(path, "expected a string");
  return j.get<std::string>();
}

inline std::vector<double> number_list(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ScenarioError(path, "expected an array of numbers");
  std::vector<double> out;
  for (size_t i = 0; i < j.size(); ++i)
    out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline Matrix matrix(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty())
    throw ScenarioError(path, "expected a non-empty array of rows");
  const size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty())
    throw ScenarioError(path + "[0]", "expected a non-empty row");
  const size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    const std::string rpath = path + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || j[r].size() != cols)
      throw ScenarioError(rpath, "rows have unequal lengths");
    for (size_t c = 0; c < cols; ++c) {
      const Json& e = j[r][c];
      const std::string epath = rpath + "[" + std::to_string(c) + "]";
      if (!e.is_array() || e.size() != 2)
        throw ScenarioError(epath, "expected an entry of the form [re, im]");
      m(static_cast<Index>(r), static_cast<Index>(c)) =
          Complex(number(e[0], epath + "[0]"), number(e[1], epath + "[1]"));
    }
  }
  return m;
}

}  // namespace scenario_detail

// ---- parameter substitution ----

// Replaces every { "param": name, "scale": s, "offset": o } node by the
// number o + s * value(name), scale defaulting to 1 and offset to 0.
inline Json resolve_params(const Json& doc, const std::map<std::string, double>& values,
                           const std::string& path = "$") {
  using scenario_detail::number;
  if (doc.is_object()) {
    if (doc.contains("param")) {
      const std::string name = scenario_detail::text(doc["param"], path + ".param");
      auto it = values.find(name);
      if (it == values.end()) throw ScenarioError(path, "parameter '" + name + "' has no value");
      double scale = doc.contains("scale") ? number(doc["scale"], path + ".scale") : 1.0;
      double offset = doc.contains("offset") ? number(doc["offset"], path + ".offset") : 0.0;
      return Json(offset + scale * it->second);
    }
    Json out = Json::object();
    for (const auto& [key, value] : doc.items())
      out[key] = resolve_params(value, values, path + "." + key);
    return out;
  }
  if (doc.is_array()) {
    Json out = Json::array();
    for (size_t i = 0; i < doc.size(); ++i)
      out.push_back(resolve_params(doc[i], values, path + "[" + std::to_string(i) + "]"));
    return out;
  }
  return doc;
}

// Default parameter values from the document's "params" object.
inline std::map<std::string, double> scenario_defaults(const Json& doc) {
  std::map<std::string, double> out;
  if (!doc.is_object() || !doc.contains("params")) return out;
  const Json& p = doc["params"];
  if (!p.is_object()) throw ScenarioError("$.params", "expected an object of numbers");
  for (const auto& [key, value] : p.items())
    out[key] = scenario_detail::number(value, "$.params." + key);
  return out;
}

// ---- systems ----

struct ScenarioSystem {
  GenSystem built;
  std::optional<CompositeSystem> composite;  // kept when described as one
  std::vector<double> reduce_times;          // explicit reduction grid, may be empty
};

namespace scenario_detail {

struct DynParse {
  std::vector<DynamicsEntry> entries;
  bool include_modular = true;
};

inline DynParse dynamics(const Json& j, Index dim, const std::string& path) {
  if (!j.is_array() || j.empty())
    throw ScenarioError(path, "expected a non-empty array of dynamics items");
  DynParse out;
  for (size_t i = 0; i < j.size(); ++i) {
    const Json& item = j[i];
    const std::string p = path + "[" + std::to_string(i) + "]";
    if (!item.is_object()) throw ScenarioError(p, "expected an object");
    std::string label = item.contains("label") ? text(item["label"], p + ".label") : "";
    if (item.contains("unitary_angle")) {
      if (dim != 2) throw ScenarioError(p + ".unitary_angle", "needs a 2x2 system");
      double angle = number(item["unitary_angle"], p + ".unitary_angle");
      Matrix u = Matrix::Zero(2, 2);
      u(0, 0) = 1.0;
      u(1, 1) = std::exp(Complex(0.0, angle));
      out.entries.push_back(DynamicsEntry{label.empty() ? "unitary" : label,
                                          {{1.0, unitary_channel(u)}},
                                          std::nullopt});
    } else if (item.contains("hamiltonian")) {
      Matrix h = matrix(item["hamiltonian"], p + ".hamiltonian");
      if (h.rows() != dim || h.cols() != dim)
        throw ScenarioError(p + ".hamiltonian", "expected a " + std::to_string(dim) + "x" +
                                                    std::to_string(dim) + " matrix");
      if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + h.cwiseAbs().maxCoeff()))
        throw ScenarioError(p + ".hamiltonian", "expected a Hermitian matrix");
      std::vector<double> times = item.contains("times")
                                      ? number_list(item["times"], p + ".times")
                                      : default_times();
      // "group": false drops the generator, leaving only the sampled grid
      bool group = true;
      if (item.contains("group")) {
        if (!item["group"].is_boolean())
          throw ScenarioError(p + ".group", "expected a boolean");
        group = item["group"].get<bool>();
      }
      DynamicsEntry e{label.empty() ? "evolution" : label, {},
                      group ? std::optional<Matrix>(h) : std::nullopt};
      for (double t : times) e.sampled.emplace_back(t, evolution_map(h, t));
      out.entries.push_back(std::move(e));
    } else if (item.contains("choi")) {
      Matrix c = matrix(item["choi"], p + ".choi");
      double tag = item.contains("time") ? number(item["time"], p + ".time") : 1.0;
      UcpMap m;
      try {
        m = ucp_verified(c, dim, dim);
      } catch (const std::exception& e) {
        throw ScenarioError(p + ".choi", e.what());
      }
      out.entries.push_back(
          DynamicsEntry{label.empty() ? "channel" : label, {{tag, std::move(m)}}, std::nullopt});
    } else if (item.contains("modular")) {
      if (!item["modular"].is_boolean())
        throw ScenarioError(p + ".modular", "expected a boolean");
      out.include_modular = item["modular"].get<bool>();
    } else {
      throw ScenarioError(p, "expected one of unitary_angle, hamiltonian, choi, modular");
    }
  }
  return out;
}

inline FaithfulState state(const Json& j, const std::string& path) {
  Matrix d = matrix(j, path);
  if (d.rows() != d.cols()) throw ScenarioError(path, "expected a square density matrix");
  try {
    return make_state(d);
  } catch (const std::exception& e) {
    throw ScenarioError(path, e.what());
  }
}

inline ScenarioSystem system(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ScenarioError(path, "expected an object");
  if (j.contains("composite")) {
    const Json& cj = j["composite"];
    const std::string cpath = path + ".composite";
    FaithfulState r = state(member(cj, "state_r", cpath), cpath + ".state_r");
    FaithfulState s = state(member(cj, "state_s", cpath), cpath + ".state_s");
    DynParse dp = dynamics(member(cj, "dynamics", cpath), r.dim * s.dim, cpath + ".dynamics");
    CompositeSystem comp{std::move(r), std::move(s), {std::move(dp.entries)}};

    std::string mode = j.contains("mode") ? text(j["mode"], path + ".mode") : "reduced";
    if (mode != "reduced" && mode != "augmented")
      throw ScenarioError(path + ".mode", "expected \"reduced\" or \"augmented\"");
    ScenarioSystem out;
    out.reduce_times =
        j.contains("times") ? number_list(j["times"], path + ".times") : std::vector<double>{};
    try {
      if (mode == "augmented")
        out.built = augment(comp);
      else
        out.built = out.reduce_times.empty() ? reduce_system(comp)
                                             : reduce_system(comp, out.reduce_times);
    } catch (const std::exception& e) {
      throw ScenarioError(path, e.what());
    }
    out.built.include_modular = dp.include_modular;
    out.composite = std::move(comp);
    return out;
  }
  FaithfulState st = state(member(j, "state", path), path + ".state");
  DynParse dp = dynamics(member(j, "dynamics", path), st.dim, path + ".dynamics");
  GenSystem g{std::move(st), {std::move(dp.entries)}, dp.include_modular};
  try {
    validate_system(g, "scenario");
  } catch (const std::exception& e) {
    throw ScenarioError(path, e.what());
  }
  return ScenarioSystem{std::move(g), std::nullopt, {}};
}

}  // namespace scenario_detail

// ---- scenario ----

enum class Task { Dist, Sweep, Verify, Reduce };

struct SweepParameter {
  std::string name;
  std::vector<double> values;
};

struct Scenario {
  std::string id;
  Task task = Task::Dist;
  Variant variant = Variant::Plain;
  std::vector<std::pair<std::string, ScenarioSystem>> systems;
  std::array<std::string, 2> pair{};  // dist and sweep
  std::string target;                 // reduce
  std::optional<CostSpec> cost;
  SolveOptions solver;
  std::vector<SweepParameter> sweep;
  std::vector<std::string> suites;  // verify; empty means every suite
  int cases = 0;                    // verify; 0 means suite defaults
  std::uint64_t seed = kDefaultSeed;
};

inline const ScenarioSystem& find_system(const Scenario& sc, const std::string& name,
                                         const std::string& path) {
  for (const auto& [key, sys] : sc.systems)
    if (key == name) return sys;
  throw ScenarioError(path, "unknown system '" + name + "'");
}

// Reads the sweep grid axes; usable on an unresolved document since the
// parameter lists themselves must be literal numbers.
inline std::vector<SweepParameter> parse_sweep_params(const Json& doc) {
  using namespace scenario_detail;
  const Json& sw = member(doc, "sweep", "$");
  const Json& ps = member(sw, "parameters", "$.sweep");
  if (!ps.is_array() || ps.empty())
    throw ScenarioError("$.sweep.parameters", "expected a non-empty array");
  std::vector<SweepParameter> out;
  for (size_t i = 0; i < ps.size(); ++i) {
    const std::string p = "$.sweep.parameters[" + std::to_string(i) + "]";
    SweepParameter sp;
    sp.name = text(member(ps[i], "name", p), p + ".name");
    sp.values = number_list(member(ps[i], "values", p), p + ".values");
    out.push_back(std::move(sp));
  }
  return out;
}

// Parses a fully resolved document (no parameter placeholders left).
inline Scenario parse_scenario(const Json& doc) {
  using namespace scenario_detail;
  if (!doc.is_object()) throw ScenarioError("$", "expected a JSON object");
  Scenario sc;
  sc.id = text(member(doc, "id", "$"), "$.id");

  const std::string task = text(member(doc, "task", "$"), "$.task");
  if (task == "dist")
    sc.task = Task::Dist;
  else if (task == "sweep")
    sc.task = Task::Sweep;
  else if (task == "verify")
    sc.task = Task::Verify;
  else if (task == "reduce")
    sc.task = Task::Reduce;
  else
    throw ScenarioError("$.task", "expected one of dist, sweep, verify, reduce");

  if (doc.contains("variant")) {
    const std::string v = text(doc["variant"], "$.variant");
    if (v == "plain")
      sc.variant = Variant::Plain;
    else if (v == "modular")
      sc.variant = Variant::Modular;
    else
      throw ScenarioError("$.variant", "expected \"plain\" or \"modular\"");
  }

  if (doc.contains("seed")) {
    const Json& s = doc["seed"];
    if (!s.is_number_integer() || s.get<std::int64_t>() < 0)
      throw ScenarioError("$.seed", "expected a non-negative integer");
    sc.seed = s.get<std::uint64_t>();
  }
  if (doc.contains("cases")) {
    const Json& c = doc["cases"];
    if (!c.is_number_integer() || c.get<std::int64_t>() < 0)
      throw ScenarioError("$.cases", "expected a non-negative integer");
    sc.cases = c.get<int>();
  }

  if (doc.contains("systems")) {
    const Json& sys = doc["systems"];
    if (!sys.is_object()) throw ScenarioError("$.systems", "expected an object");
    for (const auto& [name, body] : sys.items())
      sc.systems.emplace_back(name, system(body, "$.systems." + name));
  }

  if (doc.contains("cost")) {
    const Json& coords = member(doc["cost"], "coordinates", "$.cost");
    if (!coords.is_array() || coords.empty())
      throw ScenarioError("$.cost.coordinates", "expected a non-empty array of matrices");
    std::vector<Matrix> k;
    for (size_t i = 0; i < coords.size(); ++i)
      k.push_back(matrix(coords[i], "$.cost.coordinates[" + std::to_string(i) + "]"));
    try {
      sc.cost = make_cost_spec(std::move(k));
    } catch (const std::exception& e) {
      throw ScenarioError("$.cost.coordinates", e.what());
    }
  }

  if (doc.contains("solver")) {
    const Json& so = doc["solver"];
    if (!so.is_object()) throw ScenarioError("$.solver", "expected an object");
    if (so.contains("tol")) {
      sc.solver.tol = number(so["tol"], "$.solver.tol");
      if (sc.solver.tol <= 0.0) throw ScenarioError("$.solver.tol", "expected a positive number");
    }
    if (so.contains("max_iter")) {
      if (!so["max_iter"].is_number_integer() || so["max_iter"].get<std::int64_t>() <= 0)
        throw ScenarioError("$.solver.max_iter", "expected a positive integer");
      sc.solver.max_iter = so["max_iter"].get<int>();
    }
    if (so.contains("rho")) {
      sc.solver.rho = number(so["rho"], "$.solver.rho");
      if (sc.solver.rho <= 0.0) throw ScenarioError("$.solver.rho", "expected a positive number");
    }
    if (so.contains("adaptive_rho")) {
      if (!so["adaptive_rho"].is_boolean())
        throw ScenarioError("$.solver.adaptive_rho", "expected a boolean");
      sc.solver.adaptive_rho = so["adaptive_rho"].get<bool>();
    }
  }

  if (sc.task == Task::Dist || sc.task == Task::Sweep) {
    const Json& pair = member(doc, "pair", "$");
    if (!pair.is_array() || pair.size() != 2)
      throw ScenarioError("$.pair", "expected two system names");
    sc.pair[0] = text(pair[0], "$.pair[0]");
    sc.pair[1] = text(pair[1], "$.pair[1]");
    const ScenarioSystem& a = find_system(sc, sc.pair[0], "$.pair[0]");
    const ScenarioSystem& b = find_system(sc, sc.pair[1], "$.pair[1]");
    if (a.built.state.dim != b.built.state.dim)
      throw ScenarioError("$.pair", "systems live on algebras of different dimension");
    if (!sc.cost) throw ScenarioError("$.cost", "missing");
    if (sc.cost->dim() != a.built.state.dim)
      throw ScenarioError("$.cost.coordinates",
                          "coordinates live on a different algebra than the pair");
  }
  if (sc.task == Task::Sweep) sc.sweep = parse_sweep_params(doc);
  if (sc.task == Task::Reduce) {
    sc.target = text(member(doc, "system", "$"), "$.system");
    const ScenarioSystem& s = find_system(sc, sc.target, "$.system");
    if (!s.composite) throw ScenarioError("$.system", "'" + sc.target + "' is not a composite");
  }
  if (sc.task == Task::Verify && doc.contains("suites")) {
    const Json& su = doc["suites"];
    if (!su.is_array()) throw ScenarioError("$.suites", "expected an array of suite names");
    for (size_t i = 0; i < su.size(); ++i)
      sc.suites.push_back(text(su[i], "$.suites[" + std::to_string(i) + "]"));
  }
  return sc;
}

// ---- grid expansion ----

struct GridPoint {
  std::vector<std::pair<std::string, double>> values;
};

// Cartesian product in row-major order: the first parameter varies slowest.
inline std::vector<GridPoint> sweep_grid(const std::vector<SweepParameter>& params) {
  std::size_t total = 1;
  for (const SweepParameter& p : params) total *= p.values.size();
  std::vector<GridPoint> grid;
  if (total == 0) return grid;
  grid.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    GridPoint pt;
    std::size_t rest = idx;
    for (auto it = params.rbegin(); it != params.rend(); ++it) {
      pt.values.emplace_back(it->name, it->values[rest % it->values.size()]);
      rest /= it->values.size();
    }
    std::reverse(pt.values.begin(), pt.values.end());
    grid.push_back(std::move(pt));
  }
  return grid;
}

// ---- emission ----

inline std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string fmt_complex(const Complex& z) {
  std::string s = fmt_num(z.real());
  s += (z.imag() < 0.0 || std::signbit(z.imag())) ? "-" : "+";
  s += fmt_num(std::abs(z.imag()));
  s += "i";
  return s;
}

// Row counts per constraint label, in first-appearance order.
inline std::vector<std::pair<std::string, int>> label_counts(const ConstraintSet& cs) {
  std::vector<std::pair<std::string, int>> out;
  for (const std::string& label : cs.row_labels) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const auto& e) { return e.first == label; });
    if (it == out.end())
      out.emplace_back(label, 1);
    else
      ++it->second;
  }
  return out;
}

struct TaskResult {
  int exit_code = 0;
  std::string out;  // report text or CSV
  std::string log;  // progress notes, printed only in verbose mode
};

// Flag overrides applied on top of the parsed scenario.
struct RunOverrides {
  std::optional<Variant> variant;
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

inline void apply_overrides(Scenario& sc, const RunOverrides& ov) {
  if (ov.variant) sc.variant = *ov.variant;
  if (ov.tol) sc.solver.tol = *ov.tol;
  if (ov.max_iter) sc.solver.max_iter = *ov.max_iter;
  if (ov.seed) sc.seed = *ov.seed;
}

// ---- tasks ----

inline TaskResult run_dist(const Json& doc, const RunOverrides& ov = {}) {
  Scenario sc = parse_scenario(resolve_params(doc, scenario_defaults(doc)));
  if (sc.task != Task::Dist && sc.task != Task::Sweep)
    throw ScenarioError("$.task", "this document does not describe a system pair");
  apply_overrides(sc, ov);
  const ScenarioSystem& a = find_system(sc, sc.pair[0], "$.pair[0]");
  const ScenarioSystem& b = find_system(sc, sc.pair[1], "$.pair[1]");
  SdpProblem problem = make_problem(a.built, b.built, *sc.cost, sc.variant);
  SolveReport r = solve(problem, sc.solver);

  std::string out;
  out += "scenario " + sc.id + ": dist " + sc.pair[0] + " -> " + sc.pair[1] + " (" +
         variant_name(sc.variant) + ")\n";
  out += "optimal_cost        " + fmt_num(r.optimal_cost) + "\n";
  out += "distance            " + fmt_num(r.distance) + "\n";
  out += "primal_residual     " + fmt_num(r.primal_residual) + "\n";
  out += "dual_residual       " + fmt_num(r.dual_residual) + "\n";
  out += "constraint_residual " + fmt_num(r.constraint_residual) + "\n";
  out += "iterations          " + std::to_string(r.iterations) + "\n";
  out += std::string("status              ") + (r.converged ? "ok" : "nonconverged") + "\n";
  out += "constraints         " + std::to_string(problem.constraints.a.rows()) + " rows on a " +
         std::to_string(problem.constraints.choi_dim) + "x" +
         std::to_string(problem.constraints.choi_dim) + " Choi\n";
  for (const auto& [label, count] : label_counts(problem.constraints))
    out += "  " + label + ": " + std::to_string(count) + "\n";

  TaskResult res;
  res.out = std::move(out);
  res.exit_code = r.converged ? 0 : 3;
  return res;
}

inline std::string csv_header(const std::vector<SweepParameter>& params) {
  std::string h = "id";
  for (const SweepParameter& p : params) h += "," + p.name;
  h += ",variant,optimal_cost,distance,primal_residual,dual_residual,constraint_residual,"
       "iterations,status";
  return h;
}

inline TaskResult run_sweep(const Json& doc, const RunOverrides& ov = {}) {
  const std::map<std::string, double> defaults = scenario_defaults(doc);
  const std::vector<SweepParameter> params = parse_sweep_params(doc);
  const std::vector<GridPoint> grid = sweep_grid(params);
  const std::string id = scenario_detail::text(scenario_detail::member(doc, "id", "$"), "$.id");

  struct Row {
    std::vector<double> values;
    std::string variant = "";
    SolveReport report;
    std::string status = "error";
    std::string note;
  };
  std::vector<Row> rows(grid.size());

  auto solve_row = [&](std::size_t i) {
    Row& row = rows[i];
    for (const auto& [name, value] : grid[i].values) row.values.push_back(value);
    try {
      std::map<std::string, double> values = defaults;
      for (const auto& [name, value] : grid[i].values) values[name] = value;
      Scenario sc = parse_scenario(resolve_params(doc, values));
      apply_overrides(sc, ov);
      row.variant = variant_name(sc.variant);
      const ScenarioSystem& a = find_system(sc, sc.pair[0], "$.pair[0]");
      const ScenarioSystem& b = find_system(sc, sc.pair[1], "$.pair[1]");
      row.report = solve(make_problem(a.built, b.built, *sc.cost, sc.variant), sc.solver);
      row.status = row.report.converged ? "ok" : "nonconverged";
    } catch (const std::exception& e) {
      row.status = "error";
      row.note = e.what();
    }
  };

  const int jobs = std::max(1, ov.jobs);
  if (jobs == 1 || grid.size() <= 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) solve_row(i);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next.fetch_add(1); i < grid.size(); i = next.fetch_add(1))
        solve_row(i);
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
  }

  TaskResult res;
  res.out = csv_header(params) + "\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& row = rows[i];
    std::string line = id;
    for (double v : row.values) line += "," + fmt_num(v);
    const bool failed = row.status == "error";
    line += "," + row.variant;
    line += "," + fmt_num(failed ? nan : row.report.optimal_cost);
    line += "," + fmt_num(failed ? nan : row.report.distance);
    line += "," + fmt_num(failed ? nan : row.report.primal_residual);
    line += "," + fmt_num(failed ? nan : row.report.dual_residual);
    line += "," + fmt_num(failed ? nan : row.report.constraint_residual);
    line += "," + std::to_string(failed ? 0 : row.report.iterations);
    line += "," + row.status;
    res.out += line + "\n";
    if (!row.note.empty())
      res.log += "row " + std::to_string(i) + ": " + row.note + "\n";
    if (res.exit_code == 0 && row.status != "ok") res.exit_code = 3;
  }
  return res;
}

inline TaskResult run_verify(const std::vector<std::string>& names, std::uint64_t seed,
                             int cases = 0) {
  std::vector<std::string> todo = names;
  if (todo.empty())
    for (const SuiteSpec& s : verify_suites()) todo.push_back(s.name);

  TaskResult res;
  int failed = 0;
  for (const std::string& name : todo) {
    SuiteResult r = run_suite(name, seed, cases);
    res.out += "suite " + r.name + ": " + (r.pass ? "PASS" : "FAIL") + " cases=" +
               std::to_string(r.cases) + " failures=" + std::to_string(r.failures) +
               " max_err=" + fmt_num(r.max_err) + " tol=" + fmt_num(r.tolerance) + "\n";
    if (!r.pass) {
      ++failed;
      if (!r.detail.empty()) res.out += "  " + r.detail + "\n";
    }
  }
  res.out += failed == 0 ? "verify: all suites passed\n"
                         : "verify: " + std::to_string(failed) + " suite(s) failed\n";
  res.exit_code = failed == 0 ? 0 : 1;
  return res;
}

inline TaskResult run_verify_scenario(const Json& doc, const RunOverrides& ov = {}) {
  Scenario sc = parse_scenario(resolve_params(doc, scenario_defaults(doc)));
  if (sc.task != Task::Verify)
    throw ScenarioError("$.task", "expected a verify document");
  apply_overrides(sc, ov);
  return run_verify(sc.suites, sc.seed, sc.cases);
}

inline TaskResult run_reduce(const Json& doc, const RunOverrides& ov = {}) {
  Scenario sc = parse_scenario(resolve_params(doc, scenario_defaults(doc)));
  if (sc.task != Task::Reduce)
    throw ScenarioError("$.system", "missing (document task is not reduce)");
  apply_overrides(sc, ov);
  const ScenarioSystem& s = find_system(sc, sc.target, "$.system");
  const CompositeSystem& c = *s.composite;
  GenSystem red = s.reduce_times.empty() ? reduce_system(c) : reduce_system(c, s.reduce_times);
  const Index n = red.state.dim;

  std::string out;
  out += "scenario " + sc.id + ": reduce " + sc.target + " (" + std::to_string(c.state_r.dim) +
         "x" + std::to_string(c.state_r.dim) + " environment traced out)\n";
  out += "reduced state:\n";
  for (Index i = 0; i < n; ++i) {
    out += " ";
    for (Index j = 0; j < n; ++j) out += " " + fmt_complex(red.state.density(i, j));
    out += "\n";
  }
  for (const DynamicsEntry& e : red.dynamics.entries) {
    for (const auto& [t, map] : e.sampled) {
      out += e.label + " at t=" + fmt_num(t) + ", Choi:\n";
      for (Index i = 0; i < map.choi.rows(); ++i) {
        out += " ";
        for (Index j = 0; j < map.choi.cols(); ++j) out += " " + fmt_complex(map.choi(i, j));
        out += "\n";
      }
      Matrix pulled = unvec(choi_to_super(map.choi, n, n).adjoint() * vec(red.state.density), n, n);
      out += "  state preservation defect " +
             fmt_num((pulled - red.state.density).cwiseAbs().maxCoeff()) + "\n";
    }
  }

  // with a generator the reduced family can be probed for the semigroup law
  for (const DynamicsEntry& e : c.evolution.entries) {
    if (!e.generator || red.dynamics.entries.empty()) continue;
    const auto& sampled = red.dynamics.entries.front().sampled;
    if (sampled.size() < 2) continue;
    double t1 = sampled[0].first, t2 = sampled[1].first;
    UcpMap direct = reduce_channel(evolution_map(*e.generator, t1 + t2), c.state_r, c.state_s.dim);
    UcpMap chained = compose(sampled[0].second, sampled[1].second);
    double defect = (direct.choi - chained.choi).cwiseAbs().maxCoeff();
    out += "semigroup defect |r(t1+t2) - r(t1) r(t2)| = " + fmt_num(defect) + " at t1=" +
           fmt_num(t1) + ", t2=" + fmt_num(t2) + "\n";
    break;
  }

  TaskResult res;
  res.out = std::move(out);
  return res;
}

// Dispatch on the document's task field.
inline TaskResult run_scenario(const Json& doc, const RunOverrides& ov = {}) {
  const std::string task =
      scenario_detail::text(scenario_detail::member(doc, "task", "$"), "$.task");
  if (task == "dist") return run_dist(doc, ov);
  if (task == "sweep") return run_sweep(doc, ov);
  if (task == "verify") return run_verify_scenario(doc, ov);
  if (task == "reduce") return run_reduce(doc, ov);
  throw ScenarioError("$.task", "expected one of dist, sweep, verify, reduce");
}

}  // namespace ncw
