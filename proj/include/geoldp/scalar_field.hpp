#pragma once

#include <functional>

#include "geoldp/manifold.hpp"

namespace geoldp {

/**
 * Scalar function on a manifold.  `diff` is optional; when absent,
 * differential() falls back to central differences along geodesics
 * (step 1e-4), which equals df exactly up to O(h^2) since curves
 * t -> exp_x(t e_k) have velocity e_k at t = 0.
 */
struct ScalarField {
  std::function<double(const Point&)> value;
  std::function<CotangentVector(const Point&)> diff;  // may be empty

  double operator()(const Point& p) const { return value(p); }
};

inline constexpr double kFdStep = 1e-4;

CotangentVector differential(const ScalarField& f, const Point& x);

/**
 * Laplace-Beltrami of f at x by central differences (step 1e-4) of the
 * divergence-form chart expression (1/sqrt(G)) d_i (sqrt(G) g^{ij} d_j f).
 * Flat manifolds use the global chart (the expression reduces to the plain
 * second-difference sum).  sphere2 uses a rotated spherical chart with x on
 * the chart equator; `chart_rotation` rotates the chart axes about x so
 * overlapping charts can be compared.
 */
double laplace_beltrami(const ScalarField& f, const Point& x, double chart_rotation = 0.0);

/**
 * Containment pair (Upsilon, dUpsilon) anchored at x0:
 * Upsilon = log(1 + f^2)/2, dUpsilon = f/(1+f^2) df, with
 *   euclidean: f = sqrt(1 + r^2) - 1
 *   sphere2:   f = 1 - <x, x0>
 *   torus2:    f = sum_i (1 - cos(x_i - x0_i))   (smoothed periodic distance)
 * Compact cases use a smooth proxy; containment there is automatic.
 */
ScalarField containment_field(const Point& x0);

// theta_R: identity below R/2, constant 5R/8 above 3R/4, quintic smoothstep
// derivative blend in between; C^2, nondecreasing, theta' <= 1.
double theta_cutoff(double r, double R);

// theta_R(d(x,y)^2 / 2): the smooth localized squared-distance penalty.
double smooth_dist_cutoff(double R, const Point& x, const Point& y);

}  // namespace geoldp
