#include "geoldp/scalar_field.hpp"

#include <cmath>

namespace geoldp {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

CotangentVector differential(const ScalarField& f, const Point& x) {
  if (f.diff) return f.diff(x);
  const int d = x.man.dim;
  Eigen::VectorXd g(d);
  for (int k = 0; k < d; ++k) {
    TangentVector ek(x, kFdStep * Eigen::VectorXd::Unit(d, k));
    TangentVector mek(x, -kFdStep * Eigen::VectorXd::Unit(d, k));
    g[k] = (f.value(exp_map(x, ek)) - f.value(exp_map(x, mek))) / (2.0 * kFdStep);
  }
  return CotangentVector(x, g);
}

namespace {

// Second central difference along a coordinate line u -> F(u e_k + base).
double flat_laplacian(const ScalarField& f, const Point& x) {
  const int d = x.man.dim;
  double acc = 0.0;
  double f0 = f.value(x);
  for (int k = 0; k < d; ++k) {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(d);
    h[k] = kFdStep;
    double fp = f.value(Point(x.man, x.x + h));
    double fm = f.value(Point(x.man, x.x - h));
    acc += (fp - 2.0 * f0 + fm) / (kFdStep * kFdStep);
  }
  return acc;
}

// Rotated spherical chart: point(theta, phi) = sin(theta)(cos(phi) a + sin(phi) b)
// + cos(theta) n with x = point(pi/2, 0).  The divergence form is
//   (1/sin th) d_th (sin th d_th F) + (1/sin^2 th) d^2_phi F.
double sphere_laplacian(const ScalarField& f, const Point& x, double rot) {
  Eigen::MatrixXd Fr = frame(x);
  Eigen::Vector3d a = x.x;
  Eigen::Vector3d b0 = Fr.col(0), n0 = Fr.col(1);
  Eigen::Vector3d b = std::cos(rot) * b0 + std::sin(rot) * n0;
  Eigen::Vector3d n = -std::sin(rot) * b0 + std::cos(rot) * n0;
  auto at = [&](double theta, double phi) {
    Eigen::Vector3d p =
        std::sin(theta) * (std::cos(phi) * a + std::sin(phi) * b) + std::cos(theta) * n;
    return f.value(Point(x.man, p));
  };
  const double h = kFdStep;
  const double th = kPi / 2.0;
  // staggered flux differences for d_th(sin th d_th F)
  auto dth = [&](double theta) { return (at(theta + h, 0.0) - at(theta - h, 0.0)) / (2.0 * h); };
  double flux_p = std::sin(th + h) * dth(th + h);
  double flux_m = std::sin(th - h) * dth(th - h);
  double term_th = (flux_p - flux_m) / (2.0 * h) / std::sin(th);
  double term_ph =
      (at(th, h) - 2.0 * at(th, 0.0) + at(th, -h)) / (h * h) / (std::sin(th) * std::sin(th));
  return term_th + term_ph;
}

}  // namespace

double laplace_beltrami(const ScalarField& f, const Point& x, double chart_rotation) {
  if (x.man.kind == ManifoldKind::Sphere2) return sphere_laplacian(f, x, chart_rotation);
  return flat_laplacian(f, x);
}

ScalarField containment_field(const Point& x0) {
  const Manifold man = x0.man;
  ScalarField out;
  switch (man.kind) {
    case ManifoldKind::Euclidean: {
      Eigen::VectorXd c = x0.x;
      out.value = [c](const Point& p) {
        double f = std::sqrt(1.0 + (p.x - c).squaredNorm()) - 1.0;
        return 0.5 * std::log1p(f * f);
      };
      out.diff = [c](const Point& p) {
        Eigen::VectorXd r = p.x - c;
        double s = std::sqrt(1.0 + r.squaredNorm());
        double f = s - 1.0;
        // dUps = f/(1+f^2) df, df = r/s dr-hat combined into ambient form
        Eigen::VectorXd df = r / s;
        return CotangentVector(p, (f / (1.0 + f * f)) * df);
      };
      break;
    }
    case ManifoldKind::Sphere2: {
      Eigen::Vector3d c = x0.x;
      out.value = [c](const Point& p) {
        double f = 1.0 - c.dot(p.x);
        return 0.5 * std::log1p(f * f);
      };
      out.diff = [c](const Point& p) {
        double f = 1.0 - c.dot(p.x);
        // gradient of 1 - <c, .> on the sphere: project -c onto T_p
        Eigen::Vector3d g = -c + c.dot(p.x) * Eigen::Vector3d(p.x);
        Eigen::VectorXd comps = frame(p).transpose() * g;
        return CotangentVector(p, (f / (1.0 + f * f)) * comps);
      };
      break;
    }
    case ManifoldKind::Torus2: {
      Eigen::VectorXd c = x0.x;
      out.value = [c](const Point& p) {
        double f = (1.0 - std::cos(p.x[0] - c[0])) + (1.0 - std::cos(p.x[1] - c[1]));
        return 0.5 * std::log1p(f * f);
      };
      out.diff = [c](const Point& p) {
        double f = (1.0 - std::cos(p.x[0] - c[0])) + (1.0 - std::cos(p.x[1] - c[1]));
        Eigen::VectorXd df(2);
        df << std::sin(p.x[0] - c[0]), std::sin(p.x[1] - c[1]);
        return CotangentVector(p, (f / (1.0 + f * f)) * df);
      };
      break;
    }
  }
  return out;
}

double theta_cutoff(double r, double R) {
  if (R <= 0.0) throw ContractViolationError("theta_cutoff: R must be positive");
  const double lo = 0.5 * R, hi = 0.75 * R, w = hi - lo;
  if (r <= lo) return r;
  if (r >= hi) return lo + 0.5 * w;  // plateau 5R/8
  double u = (r - lo) / w;
  // theta' = 1 - s(u) with the quintic smoothstep s = 6u^5 - 15u^4 + 10u^3;
  // integrated exactly: S(u) = u^6 - 3u^5 + 2.5u^4
  double S = ((u - 3.0) * u + 2.5) * u * u * u * u;
  return lo + (r - lo) - w * S;
}

double smooth_dist_cutoff(double R, const Point& x, const Point& y) {
  double d = distance(x, y);
  return theta_cutoff(0.5 * d * d, R);
}

}  // namespace geoldp
