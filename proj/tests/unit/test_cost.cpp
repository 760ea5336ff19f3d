#include "ncw/cost.hpp"

#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace ncw;
using testutil::max_abs;

namespace {

// coordinates used by the two-point examples: diag(0, 1) and the flip
CostSpec example_spec() {
  Matrix k1 = Matrix::Zero(2, 2), k2 = Matrix::Zero(2, 2);
  k1(1, 1) = 1.0;
  k2(0, 1) = k2(1, 0) = 1.0;
  return make_cost_spec({k1, k2});
}

Matrix flip() {
  Matrix f = Matrix::Zero(2, 2);
  f(0, 1) = f(1, 0) = 1.0;
  return f;
}

TransportPlan rotation_plan(const FaithfulState& s, double theta) {
  Matrix u = Matrix::Identity(2, 2);
  u(1, 1) = std::exp(Complex(0.0, theta));
  return from_channel(intertwined(unitary_channel(u), s, s));
}

}  // namespace

TEST_CASE("is_star_closed") {
  Matrix e12 = Matrix::Zero(2, 2), e21 = Matrix::Zero(2, 2);
  e12(0, 1) = 1.0;
  e21(1, 0) = 1.0;
  CHECK(is_star_closed({e12, e21}));
  CHECK(is_star_closed({flip()}));
  CHECK_FALSE(is_star_closed({e12}));
  CHECK_FALSE(is_star_closed({e12, e12}));  // multiset: two adjoints needed
  CHECK(is_star_closed({e12, e12, e21, e21}));
}

TEST_CASE("generates_algebra") {
  CHECK(example_spec().generating);
  CHECK(example_spec().star_closed);

  Matrix k1 = Matrix::Zero(2, 2);
  k1(1, 1) = 1.0;
  CHECK_FALSE(make_cost_spec({k1}).generating);          // diagonal words only
  CHECK_FALSE(make_cost_spec({flip()}).generating);      // flip squares to 1
  Matrix e12 = Matrix::Zero(2, 2);
  e12(0, 1) = 1.0;
  CHECK(make_cost_spec({e12}).generating);               // e12 e21 and e21 e12 split
  CHECK_FALSE(make_cost_spec({Matrix::Identity(2, 2)}).generating);

  CHECK(generating_check(example_spec(), 2));
  CHECK_FALSE(generating_check(example_spec(), 4));
}

TEST_CASE("make_cost_spec validation") {
  CHECK_THROWS_AS(make_cost_spec({}), std::invalid_argument);
  CHECK_THROWS_AS(make_cost_spec({Matrix::Identity(2, 2), Matrix::Identity(3, 3)}),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_cost_spec({Matrix::Identity(2, 3)}), std::invalid_argument);
}

TEST_CASE("transport cost of the extreme plans") {
  CostSpec spec = example_spec();
  FaithfulState mu = qubit_state(0.25), nu = qubit_state(0.4);

  CHECK(std::abs(transport_cost(identity_plan(mu), spec)) < 1e-12);

  // product coupling: 4 - p - q - 2(1-p)(1-q) at p = 0.25, q = 0.4
  double want = 2.45;
  CHECK(std::abs(transport_cost(product_plan(mu, nu), spec) - want) < 1e-12);
  CHECK(std::abs(product_cost(spec, mu, nu) - want) < 1e-12);

  CHECK_THROWS_AS(transport_cost(identity_plan(diag_state({0.2, 0.3, 0.5})), spec),
                  std::invalid_argument);
}

TEST_CASE("three cost routes agree") {
  CostSpec spec = example_spec();
  std::mt19937_64 rng(71);
  std::vector<TransportPlan> plans;
  FaithfulState mu = qubit_state(0.25), nu = qubit_state(0.4);
  plans.push_back(product_plan(mu, nu));
  plans.push_back(identity_plan(mu));
  plans.push_back(rotation_plan(diag_state({0.3, 0.7}), 0.9));
  // full-density states exercise the conjugations in the pairing route
  FaithfulState ra = make_state(testutil::random_density(rng, 2));
  FaithfulState rb = make_state(testutil::random_density(rng, 2));
  plans.push_back(product_plan(ra, rb));

  for (const auto& w : plans) {
    double direct = transport_cost(w, spec);
    double paired = pairing_cost(w.kappa, spec, w.pair.source, w.pair.target);
    CostCoefficients c = cost_coefficients(spec, w.pair.source, w.pair.target);
    double affine = c.constant + c.linear.dot(hvec(w.pair.map.choi));
    CHECK(std::abs(direct - paired) < 1e-10);
    CHECK(std::abs(direct - affine) < 1e-10);
    CHECK(direct >= -1e-12);
  }
}

TEST_CASE("product cost from abstract moments") {
  // translation coordinates on a torus: unitaries with vanishing first moments
  std::vector<MomentRow> torus(4);
  for (auto& r : torus) {
    r.mu_kk = 1.0;
    r.nu_kk = 1.0;
    r.mu_k = 0.0;
    r.nu_k = 0.0;
  }
  CHECK(product_cost_from_moments(torus) == 8.0);

  MomentRow bad;
  bad.mu_kk = 0.1;
  bad.nu_kk = 1.0;
  bad.mu_k = 1.0;
  CHECK_THROWS_AS(product_cost_from_moments({bad}), std::invalid_argument);
}

TEST_CASE("product cost is nonnegative") {
  std::mt19937_64 rng(72);
  for (int rep = 0; rep < 20; ++rep) {
    Index n = 2 + static_cast<Index>(rep % 3);
    FaithfulState mu = make_state(testutil::random_density(rng, n));
    FaithfulState nu = make_state(testutil::random_density(rng, n));
    CostSpec spec = make_cost_spec({testutil::random_matrix(rng, n, n),
                                    testutil::random_matrix(rng, n, n)});
    CHECK(product_cost(spec, mu, nu) >= -1e-9);
  }
}

TEST_CASE("moment rows match direct expectations") {
  FaithfulState mu = qubit_state(0.25), nu = qubit_state(0.4);
  CostSpec spec = example_spec();
  auto rows = moment_rows(spec, mu, nu);
  REQUIRE(rows.size() == 2);
  CHECK(std::abs(rows[0].mu_kk - 0.75) < 1e-12);
  CHECK(std::abs(rows[0].nu_kk - 0.6) < 1e-12);
  CHECK(std::abs(rows[0].mu_k - Complex(0.75, 0.0)) < 1e-12);
  CHECK(std::abs(rows[1].mu_kk - 1.0) < 1e-12);
  CHECK(std::abs(rows[1].nu_k) < 1e-12);
}
