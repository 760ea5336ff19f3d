#pragma once

#include "ncw/systems.hpp"

#include <algorithm>
#include <functional>

namespace ncw {

// Rank tolerance for row reduction and row-space comparisons.
constexpr double kRankTol = 1e-10;

enum class Variant { Plain, Modular };

inline const char* variant_name(Variant v) { return v == Variant::Plain ? "plain" : "modular"; }

// Real affine system over the Hermitian Choi variable in hvec coordinates.
struct ConstraintSet {
  Index choi_dim = 0;  // Choi matrices are choi_dim x choi_dim
  RealMatrix a;        // rows x choi_dim^2
  RealVector b;
  std::vector<std::string> row_labels;  // provenance, one entry per row
};

// ---- row assembly ----

namespace detail {

// Collects real rows pinning complex-linear conditions map(C) == rhs, where C
// ranges over Hermitian matrices of size choi_dim. Every matrix entry of the
// condition contributes a real and an imaginary row.
class ConstraintAssembler {
 public:
  explicit ConstraintAssembler(Index choi_dim) : n_(choi_dim) {}

  void add_condition(const std::function<Matrix(const Matrix&)>& map, const Matrix& rhs,
                     const std::string& label) {
    const Index dim = n_ * n_;
    const Index k = rhs.rows();
    RealMatrix block = RealMatrix::Zero(2 * k * k, dim);
    RealVector unit_x = RealVector::Zero(dim);
    for (Index d = 0; d < dim; ++d) {
      unit_x(d) = 1.0;
      Matrix image = map(hunvec(unit_x, n_));
      unit_x(d) = 0.0;
      if (image.rows() != k || image.cols() != k)
        throw std::logic_error("ConstraintAssembler: condition image has inconsistent shape");
      for (Index r = 0; r < k; ++r)
        for (Index c = 0; c < k; ++c) {
          block(2 * (r * k + c), d) = image(r, c).real();
          block(2 * (r * k + c) + 1, d) = image(r, c).imag();
        }
    }
    RealVector beta(2 * k * k);
    for (Index r = 0; r < k; ++r)
      for (Index c = 0; c < k; ++c) {
        beta(2 * (r * k + c)) = rhs(r, c).real();
        beta(2 * (r * k + c) + 1) = rhs(r, c).imag();
      }
    blocks_.push_back(std::move(block));
    rhs_.push_back(std::move(beta));
    for (Index i = 0; i < 2 * k * k; ++i) labels_.push_back(label);
  }

  ConstraintSet finish() {
    Index rows = 0;
    for (const auto& b : blocks_) rows += b.rows();
    ConstraintSet cs;
    cs.choi_dim = n_;
    cs.a = RealMatrix(rows, n_ * n_);
    cs.b = RealVector(rows);
    Index at = 0;
    for (size_t i = 0; i < blocks_.size(); ++i) {
      cs.a.middleRows(at, blocks_[i].rows()) = blocks_[i];
      cs.b.segment(at, rhs_[i].size()) = rhs_[i];
      at += blocks_[i].rows();
    }
    cs.row_labels = std::move(labels_);
    return cs;
  }

 private:
  Index n_;
  std::vector<RealMatrix> blocks_;
  std::vector<RealVector> rhs_;
  std::vector<std::string> labels_;
};

}  // namespace detail

// One covariance condition E compose L == R compose E, stored as transfer
// matrices of the two dynamics maps; evaluated on a Choi variable C as
// super_to_choi(S_C L - R S_C) == 0.
struct BalanceCondition {
  std::string label;
  Matrix left;   // transfer matrix applied on the source side
  Matrix right;  // transfer matrix applied on the target side
};

// ad(h) as a transfer matrix, a -> h a - a h.
inline Matrix commutator_super(const Matrix& h) {
  Matrix id = Matrix::Identity(h.rows(), h.cols());
  return kron(h, id) - kron(id, h.transpose());
}

// Enumerates the covariance conditions between two systems for a variant:
// plain balance per dynamics slot; for the modular variant additionally the
// KMS-dual balance of every slot and the modular-generator balance.
inline std::vector<BalanceCondition> balance_conditions(const GenSystem& a, const GenSystem& b,
                                                        Variant variant) {
  if (a.state.dim != b.state.dim)
    throw std::invalid_argument("balance_conditions: systems live on different algebras");
  validate_system(a, "balance_conditions");
  validate_system(b, "balance_conditions");
  if (a.dynamics.entries.size() != b.dynamics.entries.size())
    throw std::invalid_argument("balance_conditions: dynamics label sets differ");

  std::vector<BalanceCondition> out;
  auto add_entry_pair = [&](const DynamicsEntry& ea, const DynamicsEntry& eb) {
    if (ea.label != eb.label)
      throw std::invalid_argument("balance_conditions: dynamics label mismatch ('" + ea.label +
                                  "' vs '" + eb.label + "')");
    if (ea.generator.has_value() != eb.generator.has_value())
      throw std::invalid_argument("balance_conditions: generator presence differs for label '" +
                                  ea.label + "'");
    if (ea.generator) {
      // generator rows cover the whole one-parameter group; sampled maps of
      // this slot are implied and not emitted
      out.push_back({"balance-gen[" + ea.label + "]", commutator_super(*ea.generator),
                     commutator_super(*eb.generator)});
      return;
    }
    if (ea.sampled.size() != eb.sampled.size())
      throw std::invalid_argument("balance_conditions: sample counts differ for label '" +
                                  ea.label + "'");
    auto sorted = [](const DynamicsEntry& e) {
      auto s = e.sampled;
      std::sort(s.begin(), s.end(),
                [](const auto& x, const auto& y) { return x.first < y.first; });
      return s;
    };
    auto sa = sorted(ea), sb = sorted(eb);
    for (size_t i = 0; i < sa.size(); ++i) {
      if (std::abs(sa[i].first - sb[i].first) > 1e-12)
        throw std::invalid_argument("balance_conditions: time tags differ for label '" +
                                    ea.label + "'");
      out.push_back({"balance[" + ea.label + "@" + std::to_string(sa[i].first) + "]",
                     to_super(sa[i].second).mat, to_super(sb[i].second).mat});
    }
  };

  for (size_t i = 0; i < a.dynamics.entries.size(); ++i)
    add_entry_pair(a.dynamics.entries[i], b.dynamics.entries[i]);

  if (variant == Variant::Modular) {
    auto check_commutes = [](const Matrix& h, const FaithfulState& st, const std::string& label) {
      double defect = (h * st.density - st.density * h).cwiseAbs().maxCoeff();
      if (defect > 1e-9 * (1.0 + h.cwiseAbs().maxCoeff()))
        throw std::invalid_argument(
            "balance_conditions: generator '" + label +
            "' does not commute with the state, its dual group is not the negated generator");
    };
    auto sorted = [](const DynamicsEntry& e) {
      auto s = e.sampled;
      std::sort(s.begin(), s.end(),
                [](const auto& x, const auto& y) { return x.first < y.first; });
      return s;
    };
    for (size_t i = 0; i < a.dynamics.entries.size(); ++i) {
      const auto& ea = a.dynamics.entries[i];
      const auto& eb = b.dynamics.entries[i];
      if (ea.generator) {
        check_commutes(*ea.generator, a.state, ea.label);
        check_commutes(*eb.generator, b.state, eb.label);
        out.push_back({"balance-dual-gen[" + ea.label + "]",
                       commutator_super(Matrix(-*ea.generator)),
                       commutator_super(Matrix(-*eb.generator))});
        continue;
      }
      auto sa = sorted(ea), sb = sorted(eb);
      for (size_t j = 0; j < sa.size(); ++j) {
        UcpMap da = kms_dual(intertwined(sa[j].second, a.state, a.state, 1e-8), 1e-8).map;
        UcpMap db = kms_dual(intertwined(sb[j].second, b.state, b.state, 1e-8), 1e-8).map;
        out.push_back({"balance-dual[" + ea.label + "@" + std::to_string(sa[j].first) + "]",
                       to_super(da).mat, to_super(db).mat});
      }
    }
    if (a.include_modular && b.include_modular)
      out.push_back({"modular", modular_generator(a.state), modular_generator(b.state)});
  }
  return out;
}

// ---- constraint assembly ----

// Rows for the marginal conditions alone: unitality and intertwining.
inline ConstraintSet marginal_constraints(const FaithfulState& mu, const FaithfulState& nu) {
  const Index n = mu.dim, m = nu.dim;
  detail::ConstraintAssembler asmb(n * m);
  asmb.add_condition(
      [n, m](const Matrix& c) { return partial_trace(c, Side::First, n, m); },
      Matrix::Identity(m, m), "unital");
  asmb.add_condition(
      [n, m, eta = nu.density](const Matrix& c) {
        return unvec(choi_to_super(c, n, m).adjoint() * vec(eta), n, n);
      },
      mu.density, "intertwine");
  return asmb.finish();
}

// Full affine system for the transport feasible set of a pair of systems.
inline ConstraintSet assemble(const GenSystem& a, const GenSystem& b, Variant variant) {
  const Index n = a.state.dim;
  std::vector<BalanceCondition> conds = balance_conditions(a, b, variant);

  detail::ConstraintAssembler asmb(n * n);
  asmb.add_condition(
      [n](const Matrix& c) { return partial_trace(c, Side::First, n, n); },
      Matrix::Identity(n, n), "unital");
  asmb.add_condition(
      [n, eta = b.state.density](const Matrix& c) {
        return unvec(choi_to_super(c, n, n).adjoint() * vec(eta), n, n);
      },
      a.state.density, "intertwine");
  for (const auto& cond : conds)
    asmb.add_condition(
        [n, &cond](const Matrix& c) {
          Matrix s = choi_to_super(c, n, n);
          return super_to_choi(s * cond.left - cond.right * s, n, n);
        },
        Matrix::Zero(n * n, n * n), cond.label);
  return asmb.finish();
}

// ---- diagnostics ----

struct BalanceReport {
  std::vector<std::pair<std::string, double>> residuals;
  double max_residual = 0.0;
};

// Per-condition covariance residuals of a plan's channel.
inline BalanceReport check(const TransportPlan& w, const GenSystem& a, const GenSystem& b,
                           Variant variant) {
  const Index n = a.state.dim;
  if (w.pair.map.dim_in != n || w.pair.map.dim_out != n)
    throw std::invalid_argument("check: plan does not act on the systems' algebra");
  Matrix s = to_super(w.pair.map).mat;
  BalanceReport report;
  for (const auto& cond : balance_conditions(a, b, variant)) {
    double r = super_to_choi(s * cond.left - cond.right * s, n, n).cwiseAbs().maxCoeff();
    report.residuals.emplace_back(cond.label, r);
    report.max_residual = std::max(report.max_residual, r);
  }
  return report;
}

// ---- row reduction ----

// Modified Gram-Schmidt over the rows, right-hand sides carried along; keeps
// an orthonormal generating set of the row space. Dropping a row whose
// coefficient part vanishes but whose right-hand side does not would change
// the solution set, so that case throws.
inline ConstraintSet reduce_rows(const ConstraintSet& cs, double tol = kRankTol) {
  std::vector<RealVector> rows;
  std::vector<double> rhs;
  std::vector<std::string> labels;
  for (Index i = 0; i < cs.a.rows(); ++i) {
    RealVector v = cs.a.row(i).transpose();
    double beta = cs.b(i);
    const double norm0 = v.norm();
    for (int pass = 0; pass < 2; ++pass)
      for (size_t k = 0; k < rows.size(); ++k) {
        double c = rows[k].dot(v);
        v -= c * rows[k];
        beta -= c * rhs[k];
      }
    if (v.norm() <= tol * (1.0 + norm0)) {
      if (std::abs(beta) > 1e-8 * (1.0 + norm0))
        throw std::runtime_error("reduce_rows: inconsistent affine system (row '" +
                                 cs.row_labels[static_cast<size_t>(i)] + "')");
      continue;
    }
    double inv = 1.0 / v.norm();
    rows.push_back(v * inv);
    rhs.push_back(beta * inv);
    labels.push_back(cs.row_labels[static_cast<size_t>(i)]);
  }
  ConstraintSet out;
  out.choi_dim = cs.choi_dim;
  out.a = RealMatrix(static_cast<Index>(rows.size()), cs.a.cols());
  out.b = RealVector(static_cast<Index>(rows.size()));
  for (size_t k = 0; k < rows.size(); ++k) {
    out.a.row(static_cast<Index>(k)) = rows[k].transpose();
    out.b(static_cast<Index>(k)) = rhs[k];
  }
  out.row_labels = std::move(labels);
  return out;
}

namespace detail {

inline RealMatrix orthonormal_rows(const RealMatrix& m, double tol = kRankTol) {
  std::vector<RealVector> rows;
  for (Index i = 0; i < m.rows(); ++i) {
    RealVector v = m.row(i).transpose();
    const double norm0 = v.norm();
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& r : rows) v -= r.dot(v) * r;
    if (v.norm() > tol * (1.0 + norm0)) rows.push_back(v / v.norm());
  }
  RealMatrix out(static_cast<Index>(rows.size()), m.cols());
  for (size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = rows[k].transpose();
  return out;
}

inline bool span_contains(const RealMatrix& q, const RealMatrix& rows, double tol) {
  for (Index i = 0; i < rows.rows(); ++i) {
    RealVector v = rows.row(i).transpose();
    RealVector res = v - q.transpose() * (q * v);
    if (res.norm() > tol * (1.0 + v.norm())) return false;
  }
  return true;
}

}  // namespace detail

// True iff the two affine systems cut out the same feasible set: the row
// spaces of the augmented systems [a | b] coincide (for consistent systems
// that is exactly equality of solution sets).
inline bool same_feasible_set(const ConstraintSet& c1, const ConstraintSet& c2,
                              double tol = 1e-8) {
  if (c1.choi_dim != c2.choi_dim) return false;
  ConstraintSet r1 = reduce_rows(c1);
  ConstraintSet r2 = reduce_rows(c2);
  auto augmented = [](const ConstraintSet& c) {
    RealMatrix m(c.a.rows(), c.a.cols() + 1);
    m.leftCols(c.a.cols()) = c.a;
    m.col(c.a.cols()) = c.b;
    return m;
  };
  RealMatrix m1 = augmented(r1), m2 = augmented(r2);
  RealMatrix q1 = detail::orthonormal_rows(m1), q2 = detail::orthonormal_rows(m2);
  return detail::span_contains(q1, m2, tol) && detail::span_contains(q2, m1, tol);
}

// ---- forced-entry analysis of the coupling density ----

// Entry (r, c) of kappa is an affine functional of the Choi variable; on the
// affine feasible set it is forced to a constant iff that functional lies in
// the row space, and forced to zero iff the constant vanishes too.
struct KappaPattern {
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> forced_zero;
};

inline KappaPattern kappa_forced_zero_pattern(const ConstraintSet& cs, const FaithfulState& mu,
                                              const FaithfulState& nu, double tol = 1e-8) {
  const Index n = mu.dim, m = nu.dim;
  if (cs.choi_dim != n * m)
    throw std::invalid_argument("kappa_forced_zero_pattern: constraint set has the wrong size");
  ConstraintSet red = reduce_rows(cs);
  const Index dim = cs.choi_dim * cs.choi_dim;
  RealVector x0 = red.a.transpose() * red.b;  // min-norm feasible point

  // complex linear map hvec(C) -> vec(kappa), column per coordinate
  Matrix kmap(n * m * n * m, dim);
  RealVector unit = RealVector::Zero(dim);
  for (Index d = 0; d < dim; ++d) {
    unit(d) = 1.0;
    kmap.col(d) = vec(kappa_from_choi(hunvec(unit, cs.choi_dim), n, m, nu));
    unit(d) = 0.0;
  }
  Vector at_x0 = kmap * x0;

  KappaPattern pat;
  pat.forced_zero.resize(n * m, n * m);
  for (Index r = 0; r < n * m; ++r)
    for (Index c = 0; c < n * m; ++c) {
      RealVector fre = kmap.row(r * n * m + c).real().transpose();
      RealVector fim = kmap.row(r * n * m + c).imag().transpose();
      auto in_rowspace = [&](const RealVector& f) {
        RealVector res = f - red.a.transpose() * (red.a * f);
        return res.norm() <= tol * (1.0 + f.norm());
      };
      bool forced = in_rowspace(fre) && in_rowspace(fim);
      pat.forced_zero(r, c) = forced && std::abs(at_x0(r * n * m + c)) <= tol;
    }
  return pat;
}

}  // namespace ncw
