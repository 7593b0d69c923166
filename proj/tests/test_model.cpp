#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "geoldp/errors.hpp"
#include "geoldp/model.hpp"
#include "geoldp/rng.hpp"

using namespace geoldp;

namespace {

Eigen::MatrixXd random_generator(SplitMix64& rng, int n) {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      Q(i, j) = 0.05 + 2.0 * rng.uniform01();
      total += Q(i, j);
    }
    Q(i, i) = -total;
  }
  return Q;
}

}  // namespace

TEST_CASE("generator validation accepts conservative matrices") {
  Eigen::MatrixXd ok(2, 2);
  ok << -1.0, 1.0, 2.0, -2.0;
  CHECK_NOTHROW(validate_generator(ok));

  Eigen::MatrixXd bad_row(2, 2);
  bad_row << -1.0, 0.5, 2.0, -2.0;
  CHECK_THROWS_AS(validate_generator(bad_row), InvalidGeneratorError);

  CHECK_THROWS_AS(validate_generator(Eigen::MatrixXd::Zero(2, 3)), InvalidGeneratorError);
}

TEST_CASE("generator validation detects every perturbation above 1e-8") {
  SplitMix64 rng(70);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 2 + static_cast<int>(rng.uniform01() * 3.0);
    Eigen::MatrixXd Q = random_generator(rng, n);
    CHECK_NOTHROW(validate_generator(Q));

    int i = static_cast<int>(rng.uniform01() * n);
    int j = static_cast<int>(rng.uniform01() * n);
    double eps = (rng.uniform01() < 0.5 ? 1.0 : -1.0) * (1e-8 + rng.uniform01());

    // breaking one entry breaks its row sum
    Eigen::MatrixXd broken = Q;
    broken(i, j) += eps;
    CHECK_THROWS_AS(validate_generator(broken), InvalidGeneratorError);

    // sign violation with the row sum repaired on the diagonal
    if (i != j) {
      Eigen::MatrixXd negative = Q;
      double delta = Q(i, j) + 1e-8;
      negative(i, j) -= delta;
      negative(i, i) += delta;
      CHECK_THROWS_AS(validate_generator(negative), InvalidGeneratorError);
    }
  }
}

TEST_CASE("irreducibility is strong connectivity of the rate digraph") {
  Eigen::MatrixXd cycle(3, 3);
  cycle << -1, 1, 0, 0, -1, 1, 1, 0, -1;
  CHECK(is_irreducible(cycle));

  Eigen::MatrixXd blocks(3, 3);
  blocks << -1, 1, 0, 1, -1, 0, 0, 0, 0;
  CHECK(!is_irreducible(blocks));

  // one-way chain: 0 -> 1 reachable, 1 -> 0 not
  Eigen::MatrixXd chain(2, 2);
  chain << -1, 1, 0, 0;
  CHECK(!is_irreducible(chain));

  CHECK(is_irreducible(Eigen::MatrixXd::Zero(1, 1)));
}

TEST_CASE("builtin rate families produce the advertised generators") {
  auto man = Manifold::euclidean(1);
  Point x0(man, Eigen::VectorXd::Zero(1));

  RateMatrixField single = parse_rates("single", man);
  CHECK(single.n_states == 1);
  CHECK(single(x0)(0, 0) == 0.0);

  RateMatrixField two = parse_rates("twostate{a=2}", man);
  CHECK(two.n_states == 2);
  CHECK(two.constant_in_x);
  CHECK(two.max_total_rate == 2.0);
  Eigen::MatrixXd Q = two(x0);
  CHECK(Q(0, 1) == 2.0);
  CHECK(Q(1, 0) == 2.0);
  CHECK_NOTHROW(validate_generator(Q));

  RateMatrixField cyc = parse_rates("cycle3{rate=1.5}", man);
  CHECK(cyc.n_states == 3);
  Eigen::MatrixXd C = cyc(x0);
  CHECK(C(0, 1) == 1.5);
  CHECK(C(1, 2) == 1.5);
  CHECK(C(2, 0) == 1.5);
  CHECK(C(0, 2) == 0.0);
  CHECK(is_irreducible(C));

  RateMatrixField spatial = parse_rates("twostate_spatial{a0=2,a1=1}", man);
  CHECK(!spatial.constant_in_x);
  CHECK(spatial.max_total_rate == 3.0);
  Eigen::VectorXd far(1);
  far << 30.0;
  Eigen::MatrixXd Qfar = spatial(Point(man, far));
  CHECK(Qfar(0, 1) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(Qfar(1, 0) == 2.0);
  CHECK_NOTHROW(validate_generator(spatial(x0)));

  CHECK_THROWS_AS(parse_rates("twostate_spatial{a0=1,a1=1}", man), ContractViolationError);
  CHECK_THROWS_AS(parse_rates("twostate{a=-1}", man), ContractViolationError);
  CHECK_THROWS_AS(parse_rates("fourstate{a=1}", man), ContractViolationError);
  CHECK_THROWS_AS(parse_rates("twostate", man), ContractViolationError);
}

TEST_CASE("builtin drift families produce the advertised fields") {
  auto man = Manifold::euclidean(2);
  Point x0(man, Eigen::VectorXd::Zero(2));

  DriftField zero = parse_drift("zero", man, 3);
  CHECK(zero.identically_zero);
  CHECK(zero.bound == 0.0);
  CHECK(zero(x0, 2).norm() == 0.0);

  DriftField pm = parse_drift("pm{beta=0.7}", man, 2);
  CHECK(pm.bound == 0.7);
  CHECK(pm(x0, 0)[0] == 0.7);
  CHECK(pm(x0, 1)[0] == -0.7);
  CHECK(pm(x0, 0)[1] == 0.0);
  CHECK_THROWS_AS(parse_drift("pm{beta=1}", man, 3), ContractViolationError);

  DriftField cv = parse_drift("const{v=[0.1,0.2]}", man, 2);
  CHECK(cv(x0, 0)[0] == 0.1);
  CHECK(cv(x0, 1)[1] == 0.2);
  CHECK(cv.bound == doctest::Approx(std::hypot(0.1, 0.2)).epsilon(1e-15));
  CHECK_THROWS_AS(parse_drift("const{v=[0.1]}", man, 2), ContractViolationError);
  CHECK_THROWS_AS(parse_drift("slide{v=[0,0]}", man, 2), ContractViolationError);
}

TEST_CASE("family strings tolerate whitespace and reject junk") {
  auto man = Manifold::euclidean(1);
  RateMatrixField two = parse_rates(" twostate { a = 2 } ", man);
  CHECK(two.max_total_rate == 2.0);
  CHECK_THROWS_AS(parse_rates("twostate{a=}", man), ContractViolationError);
  CHECK_THROWS_AS(parse_rates("twostate{a=two}", man), ContractViolationError);
  CHECK_THROWS_AS(parse_rates("twostate{a=2", man), ContractViolationError);
}

TEST_CASE("model assembly wires the drift shorthand") {
  auto man = Manifold::euclidean(1);
  Point x0(man, Eigen::VectorXd::Zero(1));

  Model sugar = parse_model(man, "twostate{a=1,beta=2}", "");
  CHECK(sugar.drift(x0, 0)[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(sugar.drift(x0, 1)[0] == doctest::Approx(-2.0).epsilon(1e-12));

  Model plain = parse_model(man, "twostate{a=1}", "");
  CHECK(plain.drift.identically_zero);

  Model expl = parse_model(man, "twostate{a=1}", "pm{beta=3}");
  CHECK(expl.drift(x0, 0)[0] == 3.0);

  CHECK(parse_model(man, "twostate{a=1}", "zero").spatially_homogeneous());
  CHECK(parse_model(man, "twostate_spatial{a0=2,a1=1}", "zero").spatially_homogeneous() ==
        false);
  Model sphere_zero = parse_model(Manifold::sphere2(), "twostate{a=1}", "zero");
  CHECK(sphere_zero.spatially_homogeneous());
}
