#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>

#include "geoldp/errors.hpp"

namespace geoldp {

enum class ManifoldKind { Euclidean, Sphere2, Torus2 };

/**
 * One of the supported model manifolds:
 *
 *   euclidean:<d>  flat R^d, d <= 3, identity chart
 *   sphere2        unit S^2 in R^3, points stored as unit ambient vectors
 *   torus2         flat unit torus (R/2piZ)^2, angle coordinates in [0, 2pi)
 *
 * All tangent/cotangent data is expressed in a deterministic orthonormal
 * frame at the base point, so the metric on components is the identity and
 * index raising/lowering is a no-op on components.
 */
struct Manifold {
  ManifoldKind kind = ManifoldKind::Euclidean;
  int dim = 1;  // intrinsic dimension

  static Manifold euclidean(int d);
  static Manifold sphere2() { return Manifold{ManifoldKind::Sphere2, 2}; }
  static Manifold torus2() { return Manifold{ManifoldKind::Torus2, 2}; }

  // String ids used in configs and on the CLI ("euclidean:2", "sphere2", ...).
  static Manifold parse(const std::string& id);
  std::string id() const;

  int ambient_dim() const { return kind == ManifoldKind::Sphere2 ? 3 : dim; }

  // Global lower bound on the injectivity radius (infinity when flat and
  // simply connected).  Uniqueness-of-geodesic operations reject pairs with
  // d(x,y) >= injectivity_radius() - 1e-9.
  double injectivity_radius() const {
    switch (kind) {
      case ManifoldKind::Euclidean:
        return std::numeric_limits<double>::infinity();
      case ManifoldKind::Sphere2:
      case ManifoldKind::Torus2:
        return 3.14159265358979323846;
    }
    return 0.0;
  }

  bool operator==(const Manifold& o) const { return kind == o.kind && dim == o.dim; }
  bool operator!=(const Manifold& o) const { return !(*this == o); }
};

struct Point {
  Manifold man;
  Eigen::VectorXd x;  // ambient coords (sphere2) or chart coords (flat cases)

  Point() = default;
  Point(const Manifold& m, const Eigen::VectorXd& coords);
};

// Margin used by the cut-locus guard.
inline constexpr double kCutLocusMargin = 1e-9;

/**
 * Tangent vector at `base`, components in the deterministic orthonormal
 * frame of the base point.  CotangentVector has identical storage; pairing
 * is the plain dot product of components.
 */
struct TangentVector {
  Point base;
  Eigen::VectorXd comps;

  TangentVector() = default;
  TangentVector(const Point& p, const Eigen::VectorXd& c) : base(p), comps(c) {}

  double norm() const { return comps.norm(); }

  // Ambient representation (orthogonal to the base point on sphere2).
  Eigen::VectorXd ambient() const;
};

struct CotangentVector {
  Point base;
  Eigen::VectorXd comps;

  CotangentVector() = default;
  CotangentVector(const Point& p, const Eigen::VectorXd& c) : base(p), comps(c) {}

  double norm() const { return comps.norm(); }
};

// <p, v>, both rooted at the same point.
inline double pairing(const CotangentVector& p, const TangentVector& v) {
  return p.comps.dot(v.comps);
}

// Musical isomorphisms; identity on components in an orthonormal frame.
inline CotangentVector flat(const TangentVector& v) { return {v.base, v.comps}; }
inline TangentVector sharp(const CotangentVector& p) { return {p.base, p.comps}; }

/**
 * Orthonormal frame at x, returned as an (ambient_dim x dim) matrix whose
 * columns are the frame vectors in ambient coordinates.  On sphere2 the
 * frame is Gram-Schmidt of e1 against x (fallback axis e2 when
 * |<x,e1>| > 0.9); flat manifolds use the coordinate frame.
 */
Eigen::MatrixXd frame(const Point& x);

TangentVector tangent_from_ambient(const Point& x, const Eigen::VectorXd& ambient);

Point exp_map(const Point& x, const TangentVector& v);

// Throws CutLocusError when d(x,y) >= injectivity - 1e-9.
TangentVector log_map(const Point& x, const Point& y);

// Geodesic distance; defined globally (no uniqueness needed).
double distance(const Point& x, const Point& y);

// Parallel transport of v along the unique minimizing geodesic from x to y.
TangentVector parallel_transport(const TangentVector& v, const Point& x, const Point& y);
CotangentVector parallel_transport(const CotangentVector& p, const Point& x, const Point& y);

// d_x( d(.,y)^2 / 2 )(x) = -flat(log_x(y)).
CotangentVector grad_half_dist_sq(const Point& x, const Point& y);

// Shortest angular difference, in [-pi, pi].
double wrap_angle(double a);

}  // namespace geoldp
