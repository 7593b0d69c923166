#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "geoldp/chart.hpp"
#include "geoldp/hamiltonian.hpp"
#include "geoldp/scalar_field.hpp"

namespace geoldp {

struct Curve {
  Manifold man;
  std::vector<double> times;  // strictly increasing
  std::vector<Point> points;  // consecutive points within the injectivity radius
};

// Initial cost; dirac_initial is the usual choice (0 at x0, +inf elsewhere,
// matching tolerance 1e-9 in distance).
using InitialCost = std::function<double(const Point&)>;
InitialCost dirac_initial(const Point& x0);
InitialCost zero_initial();

/**
 * I0(gamma(0)) + midpoint-quadrature integral of L along the curve.
 * Segment velocities are log-map differences transported to the segment
 * midpoint.  per_segment[0] holds the initial cost, so
 * total == sum(per_segment) exactly.
 */
struct ActionValue {
  double total = 0.0;
  std::vector<double> per_segment;
  bool converged = true;  // all Legendre solves converged
};
ActionValue action(const Model& model, const Curve& curve, const InitialCost& I0);

/**
 * Forward curve of the velocity selection y' = grad_p H(y, df(y)) from x0
 * over [0, T] on a uniform grid (RK4 in normal charts, re-centered at half
 * the chart radius).  Along the output, Young's equality holds:
 * young_residual() stays below 1e-3 * T.
 */
Curve optimal_curve(const Model& model, const ScalarField& f, const Point& x0, double T,
                    int grid_steps);

// | int (H(y, df) + L(y, y') - <df(y), y'>) dt |, same quadrature as action().
double young_residual(const Model& model, const Curve& curve, const ScalarField& f);

/**
 * Hopf-Lax value sup_y { h(y) - d(x0,y)^2 / (2t) } over the given candidate
 * grid, refined around the best grid point by a shrinking compass search in
 * a normal chart (initial step `refine_step`, floor 1e-7).
 */
struct HopfLaxResult {
  double value;
  Point argmax;
};
HopfLaxResult hopf_lax(const ScalarField& h, double t, const Point& x0,
                       const std::vector<Point>& y_grid, double refine_step);

// Candidate grids: box grid per axis (euclidean), Fibonacci points
// (sphere2), uniform angle lattice (torus2).
std::vector<Point> make_grid(const Manifold& man, int per_axis, double half_width = 2.5);

/**
 * Variational resolvent
 *
 *   R(lambda) h (x) = sup_gamma int_0^inf lambda^{-1} e^{-t/lambda}
 *                     ( h(gamma(t)) - int_0^t L(gamma, gamma') dr ) dt
 *
 * over curves started at x, transcribed as piecewise-constant chart
 * velocities on [0, lambda ln 1e4] (32..128 segments) with exact per-segment
 * discount weights and an analytic tail completion, optimized by gradient
 * ascent with finite-difference gradients and seeded random restarts.
 * The value is a certified lower bound up to quadrature error.
 */
struct ResolventConfig {
  double lambda = 1.0;
  int segments = 48;      // clamped to [32, 128]
  int restarts = 8;       // total starts; the first two are deterministic
  int max_iters = 200;
  std::uint64_t seed = 0x5eed;
  double ascent_tol = 1e-9;
};

struct ResolventValue {
  double value = 0.0;
  Curve curve;
  int best_restart = 0;
  int iterations = 0;
};

ResolventValue resolvent(const Model& model, const ScalarField& h, const Point& x,
                         const ResolventConfig& cfg);

// Resolvent evaluated at every grid node (parallel over nodes, deterministic
// aggregation), plus the induced interpolant.
struct GridFunction {
  std::vector<Point> nodes;
  Eigen::VectorXd values;
};
GridFunction resolvent_on_grid(const Model& model, const ScalarField& h,
                               const std::vector<Point>& grid, const ResolventConfig& cfg);

// Piecewise-linear (flat, 1-D sorted grids) or geodesic-barycentric
// (sphere2, 3 nearest nodes) interpolation of grid values.
ScalarField interpolant(const Manifold& man, const GridFunction& g);

/**
 * Semigroup approximation V(t) f (x) by the m-fold composition of
 * R(t/m) on a working grid.  Returns the value at x and the final grid.
 */
struct SemigroupResult {
  double value = 0.0;
  GridFunction grid_values;
};
SemigroupResult semigroup(const Model& model, const ScalarField& f, const Point& x, double t,
                          int m, const std::vector<Point>& grid, const ResolventConfig& cfg);

/**
 * max_j | f(x_j) - lambda H(x_j, df(x_j)) - h(x_j) | over interior nodes of
 * a sorted 1-D euclidean grid sample (df by central differences), i.e. how
 * far f is from solving the discounted equation f = h + lambda H(x, df).
 */
struct ViscosityResidual {
  double max_residual = 0.0;
  Point argmax;
};
ViscosityResidual viscosity_residual(const Model& model, const GridFunction& f, double lambda,
                                     const ScalarField& h);

/**
 * Doubling-variables diagnostic: for each m, maximize over the node pairs
 *
 *   Phi(x,y) = u(x)/(1-d) - v(y)/(1+d) - m Psi(x,y)
 *              - d Ups(x)/(1-d) - d Ups(y)/(1+d)
 *
 * with Psi the smooth localized d^2/2 (cutoff radius R) and Ups the
 * containment anchored at x0.  Reports the maximizer pair, its separation,
 * and the penalty value m Psi, which tend to the diagonal / zero as m grows.
 */
struct ComparisonGapEntry {
  double m;
  double max_phi;
  Point x_star, y_star;
  double separation;
  double m_psi;
};
struct ComparisonGapResult {
  std::vector<ComparisonGapEntry> entries;
  double sup_u_minus_v;
  double sup_h1_minus_h2;
};
ComparisonGapResult comparison_gap(const GridFunction& u, const GridFunction& v,
                                   const ScalarField& h1, const ScalarField& h2, double delta,
                                   const std::vector<double>& m_list, const Point& x0, double R);

// Curve JSONL: {"t": ..., "coords": [...]} per record.
void write_curve_jsonl(std::ostream& os, const Curve& curve);
Curve read_curve_jsonl(std::istream& is, const Manifold& man);

}  // namespace geoldp
