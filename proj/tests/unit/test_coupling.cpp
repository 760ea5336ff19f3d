#include "ncw/coupling.hpp"

#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace ncw;
using testutil::max_abs;

namespace {

Matrix angle_unitary(double theta) {
  Matrix u = Matrix::Identity(2, 2);
  u(1, 1) = std::exp(Complex(0.0, theta));
  return u;
}

TransportPlan rotation_plan(const FaithfulState& s, double theta) {
  return from_channel(intertwined(unitary_channel(angle_unitary(theta)), s, s));
}

}  // namespace

TEST_CASE("identity plan density is the standard purification") {
  FaithfulState s = qubit_state(0.3);
  TransportPlan w = identity_plan(s);
  Vector lambda = standard_vector(s);
  CHECK(max_abs(w.kappa - Matrix(lambda * lambda.adjoint())) < 1e-12);
}

TEST_CASE("product plan density is the state product") {
  FaithfulState mu = qubit_state(0.25), nu = qubit_state(0.4);
  TransportPlan w = product_plan(mu, nu);
  CHECK(max_abs(w.kappa - kron(mu.density, nu.density.transpose())) < 1e-12);
  CHECK(max_abs(w.pair.map.choi -
                kron(mu.density.transpose(), Matrix::Identity(2, 2))) < 1e-12);
}

TEST_CASE("coupling density marginals follow the convention") {
  FaithfulState s = diag_state({0.25, 0.75});
  TransportPlan w = rotation_plan(s, 0.9);
  CHECK(max_abs(partial_trace(w.kappa, Side::Second, 2, 2) - s.density) < 1e-12);
  CHECK(max_abs(partial_trace(w.kappa, Side::First, 2, 2) -
                Matrix(s.density.transpose())) < 1e-12);
  CHECK(herm_eig(w.kappa).eigenvalues.minCoeff() > -1e-12);
  CHECK(std::abs(w.kappa.trace().real() - 1.0) < 1e-12);
}

TEST_CASE("coupling density pairs like the channel") {
  std::mt19937_64 rng(41);
  FaithfulState s = diag_state({0.25, 0.75});
  TransportPlan w = rotation_plan(s, 1.1);
  for (int rep = 0; rep < 10; ++rep) {
    Matrix a = testutil::random_matrix(rng, 2, 2);
    Matrix c = testutil::random_matrix(rng, 2, 2);
    Complex lhs = (w.kappa * kron(a, c)).trace();
    Matrix ea = apply(w.pair.map, a);
    Complex rhs =
        (s.sqrt_density * ea * s.sqrt_density * c.transpose()).trace();
    CHECK(std::abs(lhs - rhs) < 1e-12);
  }
}

TEST_CASE("density round trip recovers the channel") {
  FaithfulState mu = qubit_state(0.25), nu = qubit_state(0.4);
  TransportPlan w = product_plan(mu, nu);
  TransportPlan back = from_density(w.kappa, mu, nu);
  CHECK(max_abs(back.pair.map.choi - w.pair.map.choi) < 1e-10);

  FaithfulState s = diag_state({0.3, 0.7});
  TransportPlan rot = rotation_plan(s, 0.5);
  TransportPlan rot_back = from_density(rot.kappa, s, s);
  CHECK(max_abs(rot_back.pair.map.choi - rot.pair.map.choi) < 1e-10);
}

TEST_CASE("validate_coupling_density rejects broken densities") {
  FaithfulState mu = qubit_state(0.25), nu = qubit_state(0.4);
  Matrix good = product_plan(mu, nu).kappa;
  CHECK_THROWS_AS(validate_coupling_density(Matrix(2.0 * good), mu, nu, 1e-9),
                  InvalidCoupling);
  CHECK_THROWS_AS(validate_coupling_density(good, nu, mu, 1e-9), InvalidCoupling);

  Matrix skew = good;
  skew(0, 1) += Complex(0.0, 1e-3);
  CHECK_THROWS_AS(validate_coupling_density(skew, mu, nu, 1e-9), InvalidCoupling);

  // unit trace and correct marginals but an eigenvalue pushed negative
  Matrix shifted = 1.5 * identity_plan(mu).kappa - 0.5 * product_plan(mu, mu).kappa;
  CHECK_THROWS_AS(validate_coupling_density(shifted, mu, mu, 1e-9), InvalidCoupling);
}

TEST_CASE("compose glues plans through the intermediate state") {
  FaithfulState s = diag_state({0.25, 0.75});
  TransportPlan w1 = rotation_plan(s, 0.4), w2 = rotation_plan(s, 0.8);
  TransportPlan both = compose(w1, w2);
  CHECK(max_abs(both.pair.map.choi - rotation_plan(s, 1.2).pair.map.choi) < 1e-10);
  CHECK(max_abs(compose(w1, identity_plan(s)).pair.map.choi - w1.pair.map.choi) < 1e-12);

  FaithfulState other = qubit_state(0.4);
  CHECK_THROWS_AS(compose(w1, product_plan(other, s)), InvalidCoupling);
}

TEST_CASE("kms_reverse swaps marginals and is an involution") {
  FaithfulState mu = qubit_state(0.25), nu = qubit_state(0.4);
  TransportPlan w = product_plan(mu, nu);
  TransportPlan rev = kms_reverse(w);
  CHECK(max_abs(rev.pair.source.density - nu.density) < 1e-12);
  CHECK(max_abs(rev.pair.target.density - mu.density) < 1e-12);
  CHECK(max_abs(rev.pair.map.choi - product_plan(nu, mu).pair.map.choi) < 1e-10);
  CHECK(max_abs(kms_reverse(rev).kappa - w.kappa) < 1e-10);

  FaithfulState s = diag_state({0.3, 0.7});
  TransportPlan rot = rotation_plan(s, 0.7);
  CHECK(max_abs(kms_reverse(rot).pair.map.choi - rotation_plan(s, -0.7).pair.map.choi) <
        1e-10);
}

TEST_CASE("reduce_plan projects a product plan onto the system factor") {
  FaithfulState r = diag_state({0.3, 0.7});
  FaithfulState s = qubit_state(0.25);
  FaithfulState full = make_state(kron(r.density, s.density));

  Matrix u_r = Matrix::Identity(2, 2);
  u_r(0, 0) = std::exp(Complex(0.0, 0.4));
  Matrix u = kron(u_r, angle_unitary(1.3));
  TransportPlan big = from_channel(intertwined(unitary_channel(u), full, full));
  TransportPlan small = reduce_plan(big, r, r);
  CHECK(max_abs(small.pair.map.choi - rotation_plan(s, 1.3).pair.map.choi) < 1e-10);
  CHECK(max_abs(small.pair.source.density - s.density) < 1e-12);

  // swapping the factors breaks the conditional-expectation balance
  FaithfulState sym = make_state(kron(s.density, s.density));
  Matrix swap = Matrix::Zero(4, 4);
  swap(0, 0) = swap(1, 2) = swap(2, 1) = swap(3, 3) = 1.0;
  TransportPlan flip = from_channel(intertwined(unitary_channel(swap), sym, sym));
  CHECK_THROWS_AS(reduce_plan(flip, s, s), BalanceViolated);

  CHECK_THROWS_AS(reduce_plan(big, diag_state({0.2, 0.3, 0.5}), r), std::invalid_argument);
}
