#pragma once

#include "ncw/coupling.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <vector>

namespace ncw {

// Default sampling grid for one-parameter evolutions.
inline std::vector<double> default_times() {
  return {1.0, std::sqrt(2.0), std::acos(0.0)};  // 1, sqrt(2), pi/2
}

// One labelled dynamics slot: a list of sampled state-preserving u.c.p. maps
// indexed by a time tag, and optionally the Hermitian generator h of the
// one-parameter group t -> Ad(e^{iht}) it came from. When the generator is
// present, covariance constraints are imposed at generator level (exact for
// the whole group) instead of per sample.
struct DynamicsEntry {
  std::string label;
  std::vector<std::pair<double, UcpMap>> sampled;
  std::optional<Matrix> generator;
};

struct DynamicsFamily {
  std::vector<DynamicsEntry> entries;
};

// A state together with its labelled dynamics.
struct GenSystem {
  FaithfulState state;
  DynamicsFamily dynamics;
  bool include_modular = true;  // whether the modular flow joins modular balance
};

// Bipartite system R (x) S in a product state, evolving on the full algebra.
struct CompositeSystem {
  FaithfulState state_r;
  FaithfulState state_s;
  DynamicsFamily evolution;
};

// ---- validation helpers ----

inline void validate_system(const GenSystem& s, const char* who) {
  for (const auto& entry : s.dynamics.entries) {
    if (entry.generator) {
      const Matrix& h = *entry.generator;
      if (h.rows() != s.state.dim || h.cols() != s.state.dim)
        throw std::invalid_argument(std::string(who) + ": generator dimension mismatch");
      if (herm_defect(h) > kHermTol)
        throw std::invalid_argument(std::string(who) + ": generator is not Hermitian");
    }
    for (const auto& [tag, map] : entry.sampled) {
      (void)tag;
      if (map.dim_in != s.state.dim || map.dim_out != s.state.dim)
        throw std::invalid_argument(std::string(who) + ": dynamics map dimension mismatch");
    }
  }
}

// ---- constructions ----

// Two-point algebra with the unitary diag(1, e^{i angle}); the single sampled
// map generates the whole Z-action.
inline GenSystem unitary_angle_system(double angle, const FaithfulState& state) {
  if (state.dim != 2)
    throw std::invalid_argument("unitary_angle_system: state must live on the two-point algebra");
  Matrix u = Matrix::Zero(2, 2);
  u(0, 0) = 1.0;
  u(1, 1) = std::exp(Complex(0.0, angle));
  GenSystem s{state, {{DynamicsEntry{"unitary", {{1.0, unitary_channel(u)}}, std::nullopt}}}, true};
  validate_system(s, "unitary_angle_system");
  return s;
}

inline Matrix evolution_unitary(const Matrix& h, double t) {
  return mat_func(h, [t](double x) { return std::exp(Complex(0.0, t * x)); });
}

inline UcpMap evolution_map(const Matrix& h, double t) {
  return unitary_channel(evolution_unitary(h, t));
}

// Hamiltonian h = theta (x) 1 + 1 (x) phi + lambda u (x) v on two qubits,
// all pieces diagonal, sampled on the given time grid.
inline CompositeSystem two_qubit_composite(const Matrix& theta, const Matrix& phi,
                                           const Matrix& u, const Matrix& v, double lambda,
                                           const FaithfulState& state_r,
                                           const FaithfulState& state_s,
                                           const std::vector<double>& times = default_times()) {
  auto check_diag2 = [](const Matrix& m, const char* name) {
    if (m.rows() != 2 || m.cols() != 2)
      throw std::invalid_argument(std::string("two_qubit_composite: ") + name + " must be 2x2");
    if (std::abs(m(0, 1)) > 0 || std::abs(m(1, 0)) > 0 ||
        std::abs(m(0, 0).imag()) > 0 || std::abs(m(1, 1).imag()) > 0)
      throw std::invalid_argument(std::string("two_qubit_composite: ") + name +
                                  " must be real diagonal");
  };
  check_diag2(theta, "theta");
  check_diag2(phi, "phi");
  check_diag2(u, "u");
  check_diag2(v, "v");
  if (state_r.dim != 2 || state_s.dim != 2)
    throw std::invalid_argument("two_qubit_composite: states must be qubit states");

  Matrix id = Matrix::Identity(2, 2);
  Matrix h = kron(theta, id) + kron(id, phi) + lambda * kron(u, v);
  DynamicsEntry entry{"evolution", {}, h};
  for (double t : times) entry.sampled.emplace_back(t, evolution_map(h, t));
  return {state_r, state_s, {{entry}}};
}

// Closed form of the off-diagonal multiplier of the reduced two-qubit
// dynamics; independent of theta and of the system state.
inline Complex xi_closed_form(const FaithfulState& state_r, const Matrix& phi, const Matrix& u,
                              const Matrix& v, double lambda, double t) {
  double d1 = state_r.density(0, 0).real();
  double d2 = state_r.density(1, 1).real();
  double dv = (v(0, 0) - v(1, 1)).real();
  double phase = (phi(0, 0) - phi(1, 1)).real();
  Complex a = std::exp(Complex(0.0, lambda * u(0, 0).real() * dv * t));
  Complex b = std::exp(Complex(0.0, lambda * u(1, 1).real() * dv * t));
  return (d1 * a + d2 * b) * std::exp(Complex(0.0, phase * t));
}

// ---- system-level operations ----

// KMS dual of every dynamics map (with respect to the system's own state);
// Hamiltonian generators dualize to their negatives.
inline GenSystem kms_dual_system(const GenSystem& s, double tol = 1e-8) {
  GenSystem d{s.state, {}, s.include_modular};
  for (const auto& entry : s.dynamics.entries) {
    DynamicsEntry de{entry.label, {}, std::nullopt};
    if (entry.generator) de.generator = Matrix(-*entry.generator);
    for (const auto& [tag, map] : entry.sampled)
      de.sampled.emplace_back(tag, kms_dual(intertwined(map, s.state, s.state, tol), tol).map);
    d.dynamics.entries.push_back(std::move(de));
  }
  return d;
}

// Augmented system on the full algebra: the evolution family plus the
// conditional expectation onto the system factor as an extra dynamics slot.
inline GenSystem augment(const CompositeSystem& c) {
  FaithfulState full = make_state(kron(c.state_r.density, c.state_s.density));
  GenSystem g{full, c.evolution, true};
  DynamicsEntry cond{"cond-exp",
                     {{0.0, cond_expectation_onto_second(c.state_r, c.state_s.dim)}},
                     std::nullopt};
  g.dynamics.entries.push_back(std::move(cond));
  validate_system(g, "augment");
  return g;
}

// Reduced system on the system factor: the evolution at each grid time is
// compressed by P_S compose alpha compose embed. Generators do not survive
// reduction (the reduced family need not be a semigroup), so only sampled
// maps are carried.
inline GenSystem reduce_system(const CompositeSystem& c, const std::vector<double>& time_grid) {
  if (time_grid.empty()) throw std::invalid_argument("reduce_system: empty time grid");
  GenSystem r{c.state_s, {}, true};
  for (const auto& entry : c.evolution.entries) {
    DynamicsEntry re{entry.label, {}, std::nullopt};
    for (double t : time_grid) {
      UcpMap big;
      if (entry.generator) {
        big = evolution_map(*entry.generator, t);
      } else {
        auto it = std::find_if(entry.sampled.begin(), entry.sampled.end(),
                               [t](const auto& s) { return std::abs(s.first - t) <= 1e-12; });
        if (it == entry.sampled.end())
          throw std::invalid_argument("reduce_system: time not sampled for label '" +
                                      entry.label + "' and no generator present");
        big = it->second;
      }
      re.sampled.emplace_back(t, reduce_channel(big, c.state_r, c.state_s.dim));
    }
    r.dynamics.entries.push_back(std::move(re));
  }
  validate_system(r, "reduce_system");
  return r;
}

// Grid defaults to the tags already sampled on the first evolution entry.
inline GenSystem reduce_system(const CompositeSystem& c) {
  std::vector<double> grid;
  if (!c.evolution.entries.empty())
    for (const auto& [tag, map] : c.evolution.entries.front().sampled) grid.push_back(tag);
  return reduce_system(c, grid);
}

// Max deviation between two systems: state densities and sampled dynamics
// (Choi matrices), entrywise. Infinity when shapes differ.
inline double system_distance(const GenSystem& a, const GenSystem& b) {
  if (a.state.dim != b.state.dim) return std::numeric_limits<double>::infinity();
  if (a.dynamics.entries.size() != b.dynamics.entries.size())
    return std::numeric_limits<double>::infinity();
  double worst = (a.state.density - b.state.density).cwiseAbs().maxCoeff();
  for (size_t i = 0; i < a.dynamics.entries.size(); ++i) {
    const auto& ea = a.dynamics.entries[i];
    const auto& eb = b.dynamics.entries[i];
    if (ea.label != eb.label || ea.sampled.size() != eb.sampled.size() ||
        ea.generator.has_value() != eb.generator.has_value())
      return std::numeric_limits<double>::infinity();
    if (ea.generator)
      worst = std::max(worst, (*ea.generator - *eb.generator).cwiseAbs().maxCoeff());
    for (size_t j = 0; j < ea.sampled.size(); ++j) {
      if (std::abs(ea.sampled[j].first - eb.sampled[j].first) > 1e-12)
        return std::numeric_limits<double>::infinity();
      worst = std::max(worst,
                       (ea.sampled[j].second.choi - eb.sampled[j].second.choi).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

}  // namespace ncw
