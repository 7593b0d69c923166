#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "geoldp/model.hpp"

namespace geoldp {

// B_{x,p}(i) = <b(x,i), p> + |p|^2 / 2.
double tilt_value(const Model& model, const Point& x, const CotangentVector& p, int i);

// Q_{x,p} = diag(B_{x,p}) + q(x).
Eigen::MatrixXd tilted_generator(const Model& model, const Point& x, const CotangentVector& p);

struct EigenResult {
  double eigenvalue = 0.0;
  Eigen::VectorXd right;  // strictly positive, max entry 1
  Eigen::VectorXd left;   // strictly positive, normalized to <left, right> = 1
  int iterations = 0;
};

/**
 * Principal (largest-real) eigenvalue of a matrix with nonnegative
 * off-diagonals, by power iteration on the shift A = M + cI,
 * c = 1 + max_i |M_ii|.  Right and left vectors iterate together; the
 * eigenvalue estimate l^T A r / l^T r is quadratically accurate in the
 * residuals.  Residual tolerance 1e-12 (relative), cap 1e5 iterations.
 * A tie within 1e-12 for the principal eigenvalue raises
 * NumericalFailureError; it cannot occur for irreducible generators and is
 * checked when convergence is slow enough to suggest a vanishing gap.
 */
EigenResult principal_eigen(const Eigen::MatrixXd& M);

// H(x, p): principal eigenvalue of the tilted generator.  H(x, 0) = 0.
EigenResult hamiltonian_eigen(const Model& model, const Point& x, const CotangentVector& p);
double hamiltonian(const Model& model, const Point& x, const CotangentVector& p);

/**
 * Variational form sup_pi { sum_i B_{x,p}(i) pi_i - I(x, pi) } over the
 * probability simplex (exponentiated-gradient ascent, Donsker-Varadhan inner
 * problem warm-started).  Agrees with the eigenvalue within 1e-6; kept as an
 * independent route, no eigenvector data is used.
 */
double hamiltonian_variational(const Model& model, const Point& x, const CotangentVector& p);

// grad_p H by the eigenvalue perturbation identity: the (left x right)
// weighted average of grad_p B_i = b(x,i) + p^sharp.
TangentVector grad_p_hamiltonian(const Model& model, const Point& x, const CotangentVector& p);

struct LagrangianResult {
  double value = 0.0;       // L(x, v) >= 0
  CotangentVector p_star;   // argmax of <p,v> - H(x,p)
  bool converged = false;
  int iterations = 0;
};

/**
 * L(x, v) = sup_p { <p, v> - H(x, p) } by damped Newton (gradient from
 * grad_p_hamiltonian, finite-difference Hessian, fallback gradient step),
 * initialized at p = flat(v), iterates confined to |p| <= |v| + C1 with
 * C1 = sup_i |b(x,i)| + 1.
 */
LagrangianResult legendre(const Model& model, const Point& x, const TangentVector& v);

/**
 * Superlinearity table theta(s) = s * inf_{x in K} inf_{|v| >= s} L(x,v)/|v|
 * on an increasing grid of s values.  Candidate magnitudes are shared across
 * grid entries, so theta(s) and theta(s)/s are nondecreasing exactly.
 */
std::vector<std::pair<double, double>> lagrangian_growth(const Model& model,
                                                         const std::vector<Point>& K_sample,
                                                         const std::vector<double>& s_grid);

}  // namespace geoldp
