#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "geoldp/manifold.hpp"

namespace geoldp {

/**
 * Position-dependent conservative generator q(x) on the finite switching set
 * {0, ..., n_states-1}.  Row sums vanish, off-diagonals are nonnegative.
 * max_total_rate bounds sup_x max_i (-q_ii(x)) and feeds the dt contract of
 * the simulator.
 */
struct RateMatrixField {
  int n_states = 1;
  std::function<Eigen::MatrixXd(const Point&)> q;
  double max_total_rate = 0.0;
  bool constant_in_x = false;

  Eigen::MatrixXd operator()(const Point& x) const { return q(x); }
};

// Per-state drift b(x, i), components in the frame at x.
struct DriftField {
  int n_states = 1;
  std::function<Eigen::VectorXd(const Point&, int)> b;
  double bound = 0.0;  // sup_{x,i} |b(x,i)|
  bool constant_in_x = false;
  bool identically_zero = false;

  Eigen::VectorXd operator()(const Point& x, int i) const { return b(x, i); }
};

struct Model {
  Manifold man;
  DriftField drift;
  RateMatrixField rates;

  int n_states() const { return rates.n_states; }

  // True when L(x, v) does not depend on x (constant coefficients on a flat
  // manifold, or zero drift with constant rates anywhere); enables caching
  // in the variational optimizers.
  bool spatially_homogeneous() const {
    bool coeffs_const = rates.constant_in_x && drift.constant_in_x;
    bool flat = man.kind != ManifoldKind::Sphere2;
    return coeffs_const && (flat || drift.identically_zero);
  }
};

// Throws InvalidGeneratorError on negative off-diagonals or nonzero row sums
// (tolerance 1e-10 * max(1, max|q_ij|), well below the 1e-8 detection bar).
void validate_generator(const Eigen::MatrixXd& Q);

// Strong connectivity of the positive-off-diagonal digraph.
bool is_irreducible(const Eigen::MatrixXd& Q);

/**
 * Builtin families, parsed from "name{key=value, ...}" strings.
 *
 * rates:  "single"                      1 state, no switching
 *         "twostate{a=..}"              symmetric 2-state, rate a
 *         "twostate{a=..,beta=..}"      same rates; beta is drift sugar read
 *                                       by parse_model when drift is omitted
 *         "cycle3{rate=..}"             3-state one-way cycle
 *         "twostate_spatial{a0=..,a1=..}"  q01(x) = a0 + a1 s(x), q10 = a0,
 *                                       s(x) = tanh(x1) / z / sin(theta1)
 *                                       on euclidean / sphere2 / torus2
 * drift:  "zero"
 *         "pm{beta=..}"                 2-state, +/- beta along the first axis
 *         "const{v=[..]}"               state-independent constant components
 */
RateMatrixField parse_rates(const std::string& family, const Manifold& man);
DriftField parse_drift(const std::string& family, const Manifold& man, int n_states);
Model parse_model(const Manifold& man, const std::string& rates_family,
                  const std::string& drift_family);

}  // namespace geoldp
