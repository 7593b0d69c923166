#pragma once

#include <Eigen/Dense>
#include <memory>

#include "geoldp/manifold.hpp"

namespace geoldp {

/**
 * Coordinate chart with exact pushforward/pullback.
 *
 * push_matrix(y) is the differential of the chart map at y expressed in the
 * orthonormal frame of y: chart components of a tangent vector are
 * A * v.comps.  Covectors transform contragradiently (A^{-T}), so the
 * pairing <p, v> is chart-invariant to machine precision.
 */
class Chart {
 public:
  virtual ~Chart() = default;

  virtual int dim() const = 0;
  virtual bool contains(const Point& p) const = 0;

  // Throws ChartDomainError outside the domain.
  virtual Eigen::VectorXd to_coords(const Point& p) const = 0;
  virtual Point from_coords(const Eigen::VectorXd& u) const = 0;
  virtual Eigen::MatrixXd push_matrix(const Point& p) const = 0;

  Eigen::VectorXd push_vector(const TangentVector& v) const;
  TangentVector pull_vector(const Point& base, const Eigen::VectorXd& chart_comps) const;
  Eigen::VectorXd push_covector(const CotangentVector& p) const;
  CotangentVector pull_covector(const Point& base, const Eigen::VectorXd& chart_comps) const;
};

using ChartPtr = std::shared_ptr<const Chart>;

/**
 * Normal (exponential) chart centered at `center`: coords = log_center,
 * domain the ball of radius `radius_fraction * injectivity_radius`.
 * On flat manifolds the pushforward is the identity; on sphere2 it follows
 * the Jacobi-field scaling of d(exp)^{-1}.
 */
ChartPtr normal_chart(const Point& center, double radius_fraction = 0.95);

// Stereographic chart of sphere2 from the north (+e3) or south pole.
ChartPtr stereographic_chart(bool from_north);

}  // namespace geoldp
