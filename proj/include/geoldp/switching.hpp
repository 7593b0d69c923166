#pragma once

#include <Eigen/Dense>

#include "geoldp/model.hpp"

namespace geoldp {

/**
 * Unique invariant probability of an irreducible conservative generator,
 * from the dense augmented system [Q^T ; 1^T] pi = (0,...,0,1).
 * Throws NoUniqueInvariantError when Q is reducible.
 */
Eigen::VectorXd invariant_measure(const Eigen::MatrixXd& Q);

// bbar(x) = sum_i b(x,i) pi_i(x), components in the frame at x.
TangentVector averaged_drift(const DriftField& b, const RateMatrixField& rates, const Point& x);

struct DonskerVaradhanResult {
  double value = 0.0;         // I(x, pi) >= 0, zero exactly at the invariant measure
  Eigen::VectorXd log_g;      // minimizer gauge-fixed to log_g(0) = 0 (clipped at +/-45)
  int iterations = 0;
};

/**
 * Occupation-measure cost I(x, pi) = -inf_{g>0} sum_z pi_z (Qg)(z)/g(z),
 * the sum running over the finite switching set.  Minimized in u = log g by
 * damped Newton with backtracking (the objective is convex in u); gradient
 * tolerance 1e-10.
 */
DonskerVaradhanResult donsker_varadhan(const Eigen::MatrixXd& Q, const Eigen::VectorXd& pi);

}  // namespace geoldp
