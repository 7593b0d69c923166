#include "geoldp/chart.hpp"

#include <cmath>

namespace geoldp {

Eigen::VectorXd Chart::push_vector(const TangentVector& v) const {
  return push_matrix(v.base) * v.comps;
}

TangentVector Chart::pull_vector(const Point& base, const Eigen::VectorXd& chart_comps) const {
  Eigen::MatrixXd A = push_matrix(base);
  return TangentVector(base, A.colPivHouseholderQr().solve(chart_comps));
}

Eigen::VectorXd Chart::push_covector(const CotangentVector& p) const {
  Eigen::MatrixXd A = push_matrix(p.base);
  // chart components q satisfy q . (A v) = p . v for all v, i.e. A^T q = p.
  return A.transpose().colPivHouseholderQr().solve(p.comps);
}

CotangentVector Chart::pull_covector(const Point& base, const Eigen::VectorXd& chart_comps) const {
  return CotangentVector(base, push_matrix(base).transpose() * chart_comps);
}

namespace {

class NormalChart final : public Chart {
 public:
  NormalChart(const Point& center, double radius_fraction)
      : center_(center),
        radius_(radius_fraction * center.man.injectivity_radius()) {}

  int dim() const override { return center_.man.dim; }

  bool contains(const Point& p) const override { return distance(center_, p) < radius_; }

  Eigen::VectorXd to_coords(const Point& p) const override {
    if (!contains(p)) {
      throw ChartDomainError("normal chart: point at distance " +
                             std::to_string(distance(center_, p)) + " outside radius " +
                             std::to_string(radius_));
    }
    return log_map(center_, p).comps;
  }

  Point from_coords(const Eigen::VectorXd& u) const override {
    return exp_map(center_, TangentVector(center_, u));
  }

  Eigen::MatrixXd push_matrix(const Point& p) const override {
    const int d = dim();
    if (center_.man.kind != ManifoldKind::Sphere2) {
      return Eigen::MatrixXd::Identity(d, d);
    }
    // d(exp_c)^{-1} at u = log_c(p): identity along u, r/sin(r) across it,
    // composed with transport back to the center (Jacobi fields on S^2).
    Eigen::VectorXd u = log_map(center_, p).comps;
    double r = u.norm();
    Eigen::MatrixXd scale = Eigen::MatrixXd::Identity(d, d);
    if (r > 1e-14) {
      Eigen::VectorXd e = u / r;
      double s = (std::abs(r) < 1e-4) ? (1.0 + r * r / 6.0 + 7.0 * r * r * r * r / 360.0)
                                      : r / std::sin(r);
      scale = s * Eigen::MatrixXd::Identity(d, d) + (1.0 - s) * e * e.transpose();
    }
    // transport matrix: frame comps at p -> frame comps at center
    Eigen::MatrixXd T(d, d);
    for (int k = 0; k < d; ++k) {
      TangentVector ek(p, Eigen::VectorXd::Unit(d, k));
      T.col(k) = parallel_transport(ek, p, center_).comps;
    }
    return scale * T;
  }

 private:
  Point center_;
  double radius_;
};

class StereographicChart final : public Chart {
 public:
  explicit StereographicChart(bool from_north) : from_north_(from_north) {}

  int dim() const override { return 2; }

  bool contains(const Point& p) const override { return denom(p) > 1e-12; }

  Eigen::VectorXd to_coords(const Point& p) const override {
    double w = denom(p);
    if (w <= 1e-12) {
      throw ChartDomainError("stereographic chart: projection pole is excluded");
    }
    Eigen::VectorXd u(2);
    u << p.x[0] / w, p.x[1] / w;
    return u;
  }

  Point from_coords(const Eigen::VectorXd& u) const override {
    double s = u.squaredNorm();
    Eigen::VectorXd p(3);
    double z = (s - 1.0) / (s + 1.0);
    if (!from_north_) z = -z;
    p << 2.0 * u[0] / (s + 1.0), 2.0 * u[1] / (s + 1.0), z;
    return Point(Manifold::sphere2(), p);
  }

  Eigen::MatrixXd push_matrix(const Point& p) const override {
    double w = denom(p);
    if (w <= 1e-12) {
      throw ChartDomainError("stereographic chart: projection pole is excluded");
    }
    double sgn = from_north_ ? 1.0 : -1.0;
    // rows of the ambient differential of (x/w, y/w), w = 1 -+ z
    Eigen::Matrix<double, 2, 3> D;
    D << 1.0 / w, 0.0, sgn * p.x[0] / (w * w),
         0.0, 1.0 / w, sgn * p.x[1] / (w * w);
    return D * frame(p);
  }

 private:
  double denom(const Point& p) const { return from_north_ ? 1.0 - p.x[2] : 1.0 + p.x[2]; }
  bool from_north_;
};

}  // namespace

ChartPtr normal_chart(const Point& center, double radius_fraction) {
  return std::make_shared<NormalChart>(center, radius_fraction);
}

ChartPtr stereographic_chart(bool from_north) {
  return std::make_shared<StereographicChart>(from_north);
}

}  // namespace geoldp
