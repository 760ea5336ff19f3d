#include "ncw/balance.hpp"

#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace ncw;
using testutil::max_abs;

namespace {

constexpr double kPi = 3.141592653589793238462643;

GenSystem sys(double angle, double weight) {
  return unitary_angle_system(angle, qubit_state(weight));
}

double feasibility(const ConstraintSet& cs, const Matrix& choi) {
  return (cs.a * hvec(choi) - cs.b).cwiseAbs().maxCoeff();
}

Matrix product_choi(const FaithfulState& mu, Index m) {
  return kron(mu.density.transpose(), Matrix::Identity(m, m));
}

// Forced-zero pattern of the 4x4 coupling density for two-point unitary
// systems: four entry classes, each pinned when its phase (or, for the
// modular variant, weight-ratio) condition fails to be an equality.
Eigen::Array<bool, 4, 4> expected_pattern(double phi, double theta, bool modular, double p,
                                          double q) {
  auto differ = [](Complex x, Complex y) { return std::abs(x - y) > 1e-9; };
  Complex ephi = std::exp(Complex(0.0, phi));
  Complex etheta = std::exp(Complex(0.0, theta));
  bool za = differ(ephi, 1.0);
  bool zb = differ(etheta, 1.0);
  bool zc = differ(ephi, etheta);
  bool zd = differ(ephi, std::conj(etheta));
  if (modular) {
    double x = (1.0 - p) / p, y = (1.0 - q) / q;
    za = za || differ(x, 1.0);
    zb = zb || differ(y, 1.0);
    zc = zc || differ(x, y);
    zd = zd || differ(x, 1.0 / y);
  }
  Eigen::Array<bool, 4, 4> out;
  out.setConstant(false);
  auto pin = [&out](Index r, Index c, bool v) { out(r, c) = out(c, r) = v; };
  pin(0, 2, za);
  pin(1, 3, za);
  pin(0, 1, zb);
  pin(2, 3, zb);
  pin(0, 3, zc);
  pin(1, 2, zd);
  return out;
}

bool patterns_equal(const KappaPattern& got, const Eigen::Array<bool, 4, 4>& want) {
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 4; ++c)
      if (got.forced_zero(r, c) != want(r, c)) return false;
  return true;
}

}  // namespace

TEST_CASE("commutator_super implements ad(h)") {
  std::mt19937_64 rng(61);
  Matrix h = testutil::random_hermitian(rng, 3);
  Matrix a = testutil::random_matrix(rng, 3, 3);
  SuperOp ad{3, 3, commutator_super(h)};
  CHECK(max_abs(apply(ad, a) - Matrix(h * a - a * h)) < 1e-12);
}

TEST_CASE("marginal_constraints pin unitality and intertwining") {
  FaithfulState mu = qubit_state(0.25), nu = qubit_state(0.4);
  ConstraintSet cs = marginal_constraints(mu, nu);
  CHECK(cs.choi_dim == 4);
  CHECK(feasibility(cs, product_choi(mu, 2)) < 1e-12);
  CHECK(feasibility(cs, identity_channel(2).choi) > 1e-3);  // unital but wrong states

  // a state-preserving rotation is feasible for equal marginals
  ConstraintSet same = marginal_constraints(mu, mu);
  Matrix u = Matrix::Identity(2, 2);
  u(1, 1) = std::exp(Complex(0.0, 0.8));
  CHECK(feasibility(same, unitary_channel(u).choi) < 1e-12);
}

TEST_CASE("assemble keeps the product channel feasible") {
  GenSystem a = sys(kPi / 3, 0.25), b = sys(kPi / 3, 0.4);
  for (Variant v : {Variant::Plain, Variant::Modular}) {
    ConstraintSet cs = assemble(a, b, v);
    CHECK(feasibility(cs, product_choi(a.state, 2)) < 1e-12);
    ConstraintSet red = reduce_rows(cs);
    CHECK(red.a.rows() < cs.a.rows());
    CHECK(feasibility(red, product_choi(a.state, 2)) < 1e-11);
    CHECK(max_abs(RealMatrix(red.a * red.a.transpose() -
                             RealMatrix::Identity(red.a.rows(), red.a.rows()))) < 1e-10);
  }
}

TEST_CASE("modular assembly emits dual and modular rows") {
  GenSystem a = sys(kPi / 3, 0.25), b = sys(kPi / 3, 0.4);
  auto has_label = [](const ConstraintSet& cs, const std::string& what) {
    for (const auto& l : cs.row_labels)
      if (l.find(what) != std::string::npos) return true;
    return false;
  };
  ConstraintSet plain = assemble(a, b, Variant::Plain);
  CHECK(has_label(plain, "balance[unitary@"));
  CHECK_FALSE(has_label(plain, "balance-dual"));
  CHECK_FALSE(has_label(plain, "modular"));
  ConstraintSet mod = assemble(a, b, Variant::Modular);
  CHECK(has_label(mod, "balance-dual[unitary@"));
  CHECK(has_label(mod, "modular"));
}

TEST_CASE("check reports covariance residuals of a plan") {
  GenSystem a = sys(kPi / 3, 0.25), b = sys(kPi / 3, 0.4);
  TransportPlan prod = product_plan(a.state, b.state);
  for (Variant v : {Variant::Plain, Variant::Modular}) {
    BalanceReport rep = check(prod, a, b, v);
    CHECK(rep.max_residual < 1e-12);
    CHECK_FALSE(rep.residuals.empty());
  }

  GenSystem c = sys(kPi / 2, 0.25);
  TransportPlan id = identity_plan(a.state);
  CHECK(check(id, a, a, Variant::Plain).max_residual < 1e-12);
  CHECK(check(id, a, c, Variant::Plain).max_residual > 1e-2);
}

TEST_CASE("balance_conditions validates the pairing of dynamics") {
  GenSystem a = sys(1.0, 0.25), b = sys(1.0, 0.4);
  GenSystem renamed = b;
  renamed.dynamics.entries[0].label = "other";
  CHECK_THROWS_AS(balance_conditions(a, renamed, Variant::Plain), std::invalid_argument);

  GenSystem retagged = b;
  retagged.dynamics.entries[0].sampled[0].first = 2.0;
  CHECK_THROWS_AS(balance_conditions(a, retagged, Variant::Plain), std::invalid_argument);

  GenSystem bigger{diag_state({0.2, 0.3, 0.5}), b.dynamics, true};
  CHECK_THROWS_AS(balance_conditions(a, bigger, Variant::Plain), std::invalid_argument);

  // generator slots must pair with generator slots
  GenSystem gen = a;
  gen.dynamics.entries[0].generator = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(balance_conditions(gen, b, Variant::Plain), std::invalid_argument);

  // modular variant refuses generators whose dual is not the negated group
  Matrix flip = Matrix::Zero(2, 2);
  flip(0, 1) = flip(1, 0) = 1.0;
  GenSystem ga = a, gb = b;
  ga.dynamics.entries[0] = {"ham", {}, flip};
  gb.dynamics.entries[0] = {"ham", {}, flip};
  CHECK(balance_conditions(ga, gb, Variant::Plain).size() == 1);
  CHECK_THROWS_AS(balance_conditions(ga, gb, Variant::Modular), std::invalid_argument);
}

TEST_CASE("reduce_rows drops redundancy and flags inconsistency") {
  GenSystem a = sys(kPi / 3, 0.25), b = sys(kPi / 3, 0.4);
  ConstraintSet cs = assemble(a, b, Variant::Plain);

  ConstraintSet doubled = cs;
  doubled.a.conservativeResize(2 * cs.a.rows(), cs.a.cols());
  doubled.a.bottomRows(cs.a.rows()) = cs.a;
  doubled.b.conservativeResize(2 * cs.b.size());
  doubled.b.tail(cs.b.size()) = cs.b;
  doubled.row_labels.insert(doubled.row_labels.end(), cs.row_labels.begin(),
                            cs.row_labels.end());
  CHECK(reduce_rows(doubled).a.rows() == reduce_rows(cs).a.rows());
  CHECK(same_feasible_set(doubled, cs));

  ConstraintSet bad;
  bad.choi_dim = 2;
  bad.a = RealMatrix::Zero(2, 4);
  bad.a(0, 0) = 1.0;
  bad.a(1, 0) = 1.0;
  bad.b = RealVector::Zero(2);
  bad.b(1) = 0.5;  // same row, different right-hand side
  bad.row_labels = {"r0", "r1"};
  CHECK_THROWS_AS(reduce_rows(bad), std::runtime_error);
}

TEST_CASE("same_feasible_set tracks the phase regime, not the phase value") {
  double p = 0.25, q = 0.4;
  // regime: both phases nontrivial, equal to each other, not mutually inverse
  ConstraintSet c1 = assemble(sys(kPi / 3, p), sys(kPi / 3, q), Variant::Plain);
  ConstraintSet c2 = assemble(sys(kPi / 2, p), sys(kPi / 2, q), Variant::Plain);
  CHECK(same_feasible_set(c1, c2));

  // crossing into another regime changes the feasible set
  ConstraintSet c3 = assemble(sys(kPi / 3, p), sys(-kPi / 3, q), Variant::Plain);
  CHECK_FALSE(same_feasible_set(c1, c3));
  ConstraintSet c4 = assemble(sys(0.0, p), sys(0.0, q), Variant::Plain);
  CHECK_FALSE(same_feasible_set(c1, c4));
}

TEST_CASE("modular rows are redundant exactly when the states agree") {
  double phi = kPi / 3;
  ConstraintSet plain_eq = assemble(sys(phi, 0.3), sys(phi, 0.3), Variant::Plain);
  ConstraintSet mod_eq = assemble(sys(phi, 0.3), sys(phi, 0.3), Variant::Modular);
  CHECK(same_feasible_set(plain_eq, mod_eq));

  ConstraintSet plain_ne = assemble(sys(phi, 0.25), sys(phi, 0.4), Variant::Plain);
  ConstraintSet mod_ne = assemble(sys(phi, 0.25), sys(phi, 0.4), Variant::Modular);
  CHECK_FALSE(same_feasible_set(plain_ne, mod_ne));
}

TEST_CASE("forced-zero pattern of the coupling density") {
  double p = 0.25, q = 0.4;
  FaithfulState mu = qubit_state(p), nu = qubit_state(q);

  struct Point {
    double phi, theta;
  };
  for (const Point& pt : {Point{0.0, 0.0}, Point{kPi / 3, 0.0}, Point{0.0, kPi / 3},
                          Point{kPi / 3, kPi / 3}, Point{kPi / 3, -kPi / 3}, Point{kPi, kPi},
                          Point{kPi / 2, kPi}}) {
    for (Variant v : {Variant::Plain, Variant::Modular}) {
      ConstraintSet cs = assemble(sys(pt.phi, p), sys(pt.theta, q), v);
      KappaPattern got = kappa_forced_zero_pattern(cs, mu, nu);
      auto want = expected_pattern(pt.phi, pt.theta, v == Variant::Modular, p, q);
      INFO("phi=" << pt.phi << " theta=" << pt.theta << " variant=" << variant_name(v));
      CHECK(patterns_equal(got, want));
      for (Index d = 0; d < 4; ++d) CHECK_FALSE(got.forced_zero(d, d));
    }
  }

  // weight-ratio equalities keep entries open for the modular variant
  ConstraintSet eq = assemble(sys(kPi / 3, 0.3), sys(kPi / 3, 0.3), Variant::Modular);
  KappaPattern pat_eq = kappa_forced_zero_pattern(eq, qubit_state(0.3), qubit_state(0.3));
  CHECK_FALSE(pat_eq.forced_zero(0, 3));  // equal ratios leave the corner free

  // complementary weights p + q = 1 match the inverse-ratio equality
  ConstraintSet inv =
      assemble(sys(kPi / 3, 0.3), sys(-kPi / 3, 0.7), Variant::Modular);
  KappaPattern pat_inv = kappa_forced_zero_pattern(inv, qubit_state(0.3), qubit_state(0.7));
  CHECK_FALSE(pat_inv.forced_zero(1, 2));
  CHECK(pat_inv.forced_zero(0, 3));
}
