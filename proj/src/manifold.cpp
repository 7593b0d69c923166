#include "geoldp/manifold.hpp"

#include <cmath>

namespace geoldp {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 6.28318530717958647692;

// sin(r)/r with the series branch below 1e-4.
double sinc(double r) {
  if (std::abs(r) < 1e-4) {
    double r2 = r * r;
    return 1.0 - r2 / 6.0 + r2 * r2 / 120.0;
  }
  return std::sin(r) / r;
}

// r/sin(r), the inverse scaling; series branch below 1e-4.
double inv_sinc(double r) {
  if (std::abs(r) < 1e-4) {
    double r2 = r * r;
    return 1.0 + r2 / 6.0 + 7.0 * r2 * r2 / 360.0;
  }
  return r / std::sin(r);
}

double wrap_to_half_open(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  // fmod can return exactly 2pi after the correction when a is a tiny
  // negative number; fold it back.
  if (w >= kTwoPi) w = 0.0;
  return w;
}

void check_cut_locus(const Manifold& man, double d, const char* op) {
  double inj = man.injectivity_radius();
  if (std::isfinite(inj) && d >= inj - kCutLocusMargin) {
    throw CutLocusError(std::string(op) + ": points at distance " + std::to_string(d) +
                        " reach the cut-locus guard band (injectivity radius " +
                        std::to_string(inj) + ")");
  }
}

}  // namespace

double wrap_angle(double a) {
  double w = std::remainder(a, kTwoPi);
  // remainder returns in [-pi, pi]; normalize the boundary to +pi free form
  return w;
}

Manifold Manifold::euclidean(int d) {
  if (d < 1 || d > 3) throw ContractViolationError("euclidean dimension must be 1, 2 or 3");
  return Manifold{ManifoldKind::Euclidean, d};
}

Manifold Manifold::parse(const std::string& id) {
  if (id == "sphere2") return sphere2();
  if (id == "torus2") return torus2();
  if (id.rfind("euclidean:", 0) == 0) {
    int d = std::stoi(id.substr(10));
    return euclidean(d);
  }
  throw ContractViolationError("unknown manifold id '" + id + "'");
}

std::string Manifold::id() const {
  switch (kind) {
    case ManifoldKind::Euclidean:
      return "euclidean:" + std::to_string(dim);
    case ManifoldKind::Sphere2:
      return "sphere2";
    case ManifoldKind::Torus2:
      return "torus2";
  }
  return "?";
}

Point::Point(const Manifold& m, const Eigen::VectorXd& coords) : man(m), x(coords) {
  if (x.size() != man.ambient_dim()) {
    throw ContractViolationError("point has " + std::to_string(x.size()) +
                                 " coordinates, manifold " + man.id() + " needs " +
                                 std::to_string(man.ambient_dim()));
  }
  switch (man.kind) {
    case ManifoldKind::Euclidean:
      break;
    case ManifoldKind::Sphere2: {
      double r = x.norm();
      if (std::abs(r - 1.0) > 1e-12) {
        if (std::abs(r - 1.0) > 1e-6) {
          throw ContractViolationError("sphere2 point has |x| = " + std::to_string(r));
        }
        x /= r;  // absorb roundoff drift, reject genuine off-sphere data
      }
      break;
    }
    case ManifoldKind::Torus2:
      for (int i = 0; i < 2; ++i) x[i] = wrap_to_half_open(x[i]);
      break;
  }
}

Eigen::MatrixXd frame(const Point& p) {
  const int d = p.man.dim;
  if (p.man.kind != ManifoldKind::Sphere2) {
    return Eigen::MatrixXd::Identity(d, d);
  }
  const Eigen::Vector3d x = p.x;
  Eigen::Vector3d a = Eigen::Vector3d::UnitX();
  if (std::abs(x.dot(a)) > 0.9) a = Eigen::Vector3d::UnitY();
  Eigen::Vector3d e1 = a - x.dot(a) * x;
  e1.normalize();
  Eigen::Vector3d e2 = x.cross(e1);
  Eigen::MatrixXd F(3, 2);
  F.col(0) = e1;
  F.col(1) = e2;
  return F;
}

Eigen::VectorXd TangentVector::ambient() const { return frame(base) * comps; }

TangentVector tangent_from_ambient(const Point& x, const Eigen::VectorXd& ambient) {
  return TangentVector(x, frame(x).transpose() * ambient);
}

Point exp_map(const Point& x, const TangentVector& v) {
  switch (x.man.kind) {
    case ManifoldKind::Euclidean:
      return Point(x.man, x.x + v.comps);
    case ManifoldKind::Torus2:
      return Point(x.man, x.x + v.comps);
    case ManifoldKind::Sphere2: {
      Eigen::Vector3d w = v.ambient();
      double r = w.norm();
      Eigen::Vector3d p = std::cos(r) * Eigen::Vector3d(x.x) + sinc(r) * w;
      p.normalize();
      return Point(x.man, p);
    }
  }
  throw ContractViolationError("exp_map: bad manifold");
}

double distance(const Point& x, const Point& y) {
  switch (x.man.kind) {
    case ManifoldKind::Euclidean:
      return (x.x - y.x).norm();
    case ManifoldKind::Torus2: {
      double d0 = wrap_angle(y.x[0] - x.x[0]);
      double d1 = wrap_angle(y.x[1] - x.x[1]);
      return std::hypot(d0, d1);
    }
    case ManifoldKind::Sphere2: {
      Eigen::Vector3d a = x.x, b = y.x;
      return std::atan2(a.cross(b).norm(), a.dot(b));
    }
  }
  throw ContractViolationError("distance: bad manifold");
}

TangentVector log_map(const Point& x, const Point& y) {
  switch (x.man.kind) {
    case ManifoldKind::Euclidean:
      return TangentVector(x, y.x - x.x);
    case ManifoldKind::Torus2: {
      Eigen::VectorXd d(2);
      d << wrap_angle(y.x[0] - x.x[0]), wrap_angle(y.x[1] - x.x[1]);
      check_cut_locus(x.man, d.norm(), "log_map");
      return TangentVector(x, d);
    }
    case ManifoldKind::Sphere2: {
      double theta = distance(x, y);
      check_cut_locus(x.man, theta, "log_map");
      Eigen::Vector3d u = Eigen::Vector3d(y.x) - Eigen::Vector3d(x.x).dot(y.x) * Eigen::Vector3d(x.x);
      // |u| = sin(theta); theta/|u| = inv_sinc(theta)
      Eigen::Vector3d v = inv_sinc(theta) * u;
      if (theta < 1e-14) v.setZero();
      return tangent_from_ambient(x, v);
    }
  }
  throw ContractViolationError("log_map: bad manifold");
}

TangentVector parallel_transport(const TangentVector& v, const Point& x, const Point& y) {
  if (x.man.kind != ManifoldKind::Sphere2) {
    double d = distance(x, y);
    check_cut_locus(x.man, d, "parallel_transport");
    return TangentVector(y, v.comps);  // coordinate frames are parallel when flat
  }
  double theta = distance(x, y);
  check_cut_locus(x.man, theta, "parallel_transport");
  Eigen::Vector3d va = v.ambient();
  if (theta < 1e-14) return tangent_from_ambient(y, va);
  Eigen::Vector3d u = log_map(x, y).ambient();
  Eigen::Vector3d e = u / theta;
  double along = va.dot(e);
  Eigen::Vector3d perp = va - along * e;
  Eigen::Vector3d e_at_y =
      -std::sin(theta) * Eigen::Vector3d(x.x) + std::cos(theta) * e;
  return tangent_from_ambient(y, along * e_at_y + perp);
}

CotangentVector parallel_transport(const CotangentVector& p, const Point& x, const Point& y) {
  TangentVector t = parallel_transport(sharp(p), x, y);
  return flat(t);
}

CotangentVector grad_half_dist_sq(const Point& x, const Point& y) {
  TangentVector l = log_map(x, y);
  return CotangentVector(x, -l.comps);
}

}  // namespace geoldp
