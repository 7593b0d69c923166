#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "geoldp/dynamics.hpp"
#include "geoldp/errors.hpp"
#include "geoldp/hamiltonian.hpp"
#include "geoldp/manifold.hpp"
#include "geoldp/model.hpp"
#include "geoldp/rng.hpp"
#include "geoldp/scalar_field.hpp"
#include "geoldp/variational.hpp"

using namespace geoldp;

namespace {

constexpr double kPi = 3.14159265358979323846;

ScalarField constant_field(double c) {
  ScalarField f;
  f.value = [c](const Point&) { return c; };
  return f;
}

// <c, x> in ambient coordinates, with the exact differential in the frame.
ScalarField ambient_linear_field(const Eigen::VectorXd& c) {
  ScalarField f;
  f.value = [c](const Point& p) { return c.dot(p.x); };
  f.diff = [c](const Point& p) {
    return CotangentVector(p, tangent_from_ambient(p, c).comps);
  };
  return f;
}

Curve to_curve(const AveragedPath& path, const Manifold& man) {
  Curve c;
  c.man = man;
  c.times = path.times;
  c.points = path.points;
  return c;
}

// Constant-speed great-circle arc from the north pole toward (1,0,0).
Curve polar_geodesic(int knots, double total_angle) {
  Manifold man = Manifold::sphere2();
  Curve c;
  c.man = man;
  for (int k = 0; k <= knots; ++k) {
    double t = static_cast<double>(k) / knots;
    double th = total_angle * t;
    Eigen::Vector3d x(std::sin(th), 0.0, std::cos(th));
    c.times.push_back(t);
    c.points.emplace_back(man, x);
  }
  return c;
}

/**
 * Finite-horizon dynamic program over node-to-node moves on a uniform
 * 1-D grid, solving the same discretized discounted functional as the
 * curve optimizer for a single-state zero-drift model (L(v) = v^2/2):
 *
 *   J = sum_k [ w_k h(mid_k) - (w_k/2 + S_{k+1}) L(v_k) dt ] + tail h(x_K)
 *
 * with w_k = e^{-k dt/l} - e^{-(k+1) dt/l}, S_{k+1} the weight mass after
 * stage k, and tail = e^{-T_cut/l}.  Global over the gridded control set.
 */
struct DpTable {
  double xmax = 0.0, hx = 0.0;
  std::vector<double> v0;

  double at(double x) const {
    int idx = static_cast<int>(std::lround((x + xmax) / hx));
    REQUIRE(idx >= 0);
    REQUIRE(idx < static_cast<int>(v0.size()));
    REQUIRE(std::abs((-xmax + idx * hx) - x) < 1e-12);
    return v0[idx];
  }
};

DpTable dp_resolvent_quadratic(double lambda, int K, const std::function<double(double)>& h) {
  const double Tcut = lambda * std::log(1e4);
  const double dt = Tcut / K;
  std::vector<double> w(K);
  for (int k = 0; k < K; ++k) {
    w[k] = std::exp(-(k * dt) / lambda) - std::exp(-((k + 1) * dt) / lambda);
  }
  const double tail = std::exp(-Tcut / lambda);
  std::vector<double> S_after(K);  // weight mass strictly after stage k
  double acc = tail;
  for (int k = K - 1; k >= 0; --k) {
    S_after[k] = acc;
    acc += w[k];
  }

  DpTable out;
  out.xmax = 4.0;
  out.hx = 0.005;
  const int n = static_cast<int>(std::lround(2.0 * out.xmax / out.hx)) + 1;
  const int window = static_cast<int>(std::lround(1.0 / out.hx));  // |dx| <= 1
  auto node = [&](int i) { return -out.xmax + i * out.hx; };

  std::vector<double> V(n), Vn(n);
  for (int i = 0; i < n; ++i) V[i] = tail * h(node(i));
  for (int k = K - 1; k >= 0; --k) {
    for (int i = 0; i < n; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      int lo = std::max(0, i - window), hi = std::min(n - 1, i + window);
      for (int j = lo; j <= hi; ++j) {
        double v = (node(j) - node(i)) / dt;
        double stage = w[k] * h(0.5 * (node(i) + node(j))) -
                       (0.5 * w[k] + S_after[k]) * (0.5 * v * v) * dt;
        best = std::max(best, stage + V[j]);
      }
      Vn[i] = best;
    }
    V.swap(Vn);
  }
  out.v0 = std::move(V);
  return out;
}

ResolventConfig fast_cfg() {
  ResolventConfig cfg;
  cfg.segments = 32;
  cfg.restarts = 2;
  cfg.max_iters = 50;
  cfg.ascent_tol = 1e-7;
  return cfg;
}

}  // namespace

TEST_CASE("action of constant and geodesic curves") {
  Manifold line = Manifold::euclidean(1);
  Model still = parse_model(line, "twostate{a=1}", "pm{beta=0.8}");

  Point x(line, Eigen::VectorXd::Constant(1, 0.3));
  Curve rest;
  rest.man = line;
  rest.times = {0.0, 0.25, 1.0};
  rest.points = {x, x, x};

  ActionValue av = action(still, rest, zero_initial());
  CHECK(av.converged);
  CHECK(av.per_segment.size() == 3);
  CHECK(av.per_segment[0] == 0.0);
  CHECK(std::abs(av.total) < 1e-12);
  for (double s : av.per_segment) CHECK(s >= -1e-12);
  double resum = 0.0;
  for (double s : av.per_segment) resum += s;
  CHECK(av.total == resum);

  CHECK(dirac_initial(x)(x) == 0.0);
  Point other(line, Eigen::VectorXd::Constant(1, 1.0));
  ActionValue blocked = action(still, rest, dirac_initial(other));
  CHECK(std::isinf(blocked.total));

  // Quarter great circle in unit time: constant speed pi/2, cost per unit
  // time (pi/2)^2 / 2, total pi^2 / 8.
  Model free = parse_model(Manifold::sphere2(), "single", "zero");
  Curve geo = polar_geodesic(64, kPi / 2.0);
  ActionValue ag = action(free, geo, zero_initial());
  double expect = kPi * kPi / 8.0;
  CHECK(ag.per_segment.size() == 65);
  CHECK(std::abs(ag.total - expect) < 0.01 * expect);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (size_t k = 1; k < ag.per_segment.size(); ++k) {
    lo = std::min(lo, ag.per_segment[k]);
    hi = std::max(hi, ag.per_segment[k]);
  }
  CHECK(hi - lo < 1e-9);  // constant speed, identical segments
}

TEST_CASE("action is additive at grid knots") {
  Manifold plane = Manifold::euclidean(2);
  Model model = parse_model(plane, "twostate{a=1.2}", "pm{beta=0.6}");

  Curve c;
  c.man = plane;
  for (int k = 0; k <= 10; ++k) {
    double t = 0.1 * k;
    Eigen::Vector2d x(std::sin(2.0 * t), t * t - 0.3 * t);
    c.times.push_back(t);
    c.points.emplace_back(plane, x);
  }
  ActionValue whole = action(model, c, zero_initial());
  CHECK(whole.converged);
  for (double s : whole.per_segment) CHECK(s >= -1e-12);

  const size_t split = 5;
  Curve head, tail;
  head.man = tail.man = plane;
  head.times.assign(c.times.begin(), c.times.begin() + split + 1);
  head.points.assign(c.points.begin(), c.points.begin() + split + 1);
  tail.times.assign(c.times.begin() + split, c.times.end());
  tail.points.assign(c.points.begin() + split, c.points.end());
  double parts = action(model, head, zero_initial()).total +
                 action(model, tail, zero_initial()).total;
  CHECK(std::abs(whole.total - parts) < 1e-12);

  ActionValue anchored = action(model, c, dirac_initial(c.points.front()));
  CHECK(anchored.total == whole.total);
}

TEST_CASE("averaged flow carries no action") {
  Manifold line = Manifold::euclidean(1);
  Model model = parse_model(line, "twostate_spatial{a0=1.5,a1=0.8}", "pm{beta=0.7}");
  Point x0(line, Eigen::VectorXd::Constant(1, 0.2));
  AveragedPath flow = simulate_averaged(model, x0, 2.0, 0.05);
  ActionValue av = action(model, to_curve(flow, line), zero_initial());
  CHECK(av.converged);
  CHECK(av.total >= 0.0);
  CHECK(av.total <= 1e-4);
}

TEST_CASE("action validates curve geometry") {
  Manifold line = Manifold::euclidean(1);
  Model model = parse_model(line, "single", "zero");
  Point a(line, Eigen::VectorXd::Zero(1));
  Point b(line, Eigen::VectorXd::Constant(1, 1.0));

  Curve short_curve;
  short_curve.man = line;
  short_curve.times = {0.0};
  short_curve.points = {a};
  CHECK_THROWS_AS(action(model, short_curve, zero_initial()), ContractViolationError);

  Curve ragged;
  ragged.man = line;
  ragged.times = {0.0, 1.0};
  ragged.points = {a, b, a};
  CHECK_THROWS_AS(action(model, ragged, zero_initial()), ContractViolationError);

  Curve stalled;
  stalled.man = line;
  stalled.times = {0.0, 0.5, 0.5};
  stalled.points = {a, b, a};
  CHECK_THROWS_AS(action(model, stalled, zero_initial()), ContractViolationError);

  Manifold sph = Manifold::sphere2();
  Model free = parse_model(sph, "single", "zero");
  Curve antipodal;
  antipodal.man = sph;
  antipodal.times = {0.0, 1.0};
  antipodal.points = {Point(sph, Eigen::Vector3d(0, 0, 1)), Point(sph, Eigen::Vector3d(0, 0, -1))};
  CHECK_THROWS_AS(action(free, antipodal, zero_initial()), CutLocusError);
}

TEST_CASE("constant-speed geodesic minimizes action on its family") {
  Model free = parse_model(Manifold::sphere2(), "single", "zero");
  Curve geo = polar_geodesic(32, kPi / 2.0);
  double base = action(free, geo, zero_initial()).total;

  // Transverse bumps vanishing at the endpoints.
  for (double amp : {0.05, 0.15}) {
    Curve bent = geo;
    for (size_t k = 1; k + 1 < bent.points.size(); ++k) {
      double t = bent.times[k];
      TangentVector push = tangent_from_ambient(bent.points[k], Eigen::Vector3d(0, 1, 0));
      bent.points[k] =
          exp_map(bent.points[k], TangentVector(bent.points[k], amp * std::sin(kPi * t) * push.comps));
    }
    CHECK(action(free, bent, zero_initial()).total >= base - 1e-8);
  }

  // Same trace, nonuniform clock.
  Curve skewed = geo;
  for (size_t k = 0; k < skewed.points.size(); ++k) {
    double s = skewed.times[k] * skewed.times[k];
    double th = (kPi / 2.0) * s;
    skewed.points[k] = Point(skewed.man, Eigen::Vector3d(std::sin(th), 0.0, std::cos(th)));
  }
  CHECK(action(free, skewed, zero_initial()).total >= base - 1e-8);
}

TEST_CASE("optimal curve follows the momentum characteristics") {
  Manifold plane = Manifold::euclidean(2);
  Model model = parse_model(plane, "single", "zero");
  Eigen::Vector2d p0(0.7, -0.4);
  ScalarField f = ambient_linear_field(p0);
  Point x0(plane, Eigen::Vector2d(0.2, -0.1));
  const double T = 1.5;
  const int steps = 30;

  Curve out = optimal_curve(model, f, x0, T, steps);
  REQUIRE(out.times.size() == static_cast<size_t>(steps) + 1);
  CHECK(out.times.front() == 0.0);
  CHECK(out.times.back() == T);
  for (int k = 0; k <= steps; ++k) {
    Eigen::Vector2d expect = x0.x + out.times[k] * p0;
    CHECK((out.points[k].x - expect).norm() < 1e-12);
  }

  CHECK(young_residual(model, out, f) <= 1e-3 * T);

  // Quadratic distance growth bounded through the measured top speed.
  double top_speed = 0.0;
  for (size_t k = 0; k + 1 < out.points.size(); ++k) {
    double dt = out.times[k + 1] - out.times[k];
    top_speed = std::max(top_speed, log_map(out.points[k], out.points[k + 1]).comps.norm() / dt);
  }
  double growth_c = 0.5 * top_speed * top_speed * T;
  for (size_t k = 1; k < out.points.size(); ++k) {
    double d = distance(out.points[k], x0);
    CHECK(0.5 * d * d <= growth_c * out.times[k] + 1e-12);
  }

  CHECK_THROWS_AS(optimal_curve(model, f, x0, 0.0, 10), ContractViolationError);
  CHECK_THROWS_AS(optimal_curve(model, f, x0, 1.0, 0), ContractViolationError);
}

TEST_CASE("optimal curve with a constant function rides the averaged flow") {
  Manifold line = Manifold::euclidean(1);
  Model model = parse_model(line, "twostate_spatial{a0=1.3,a1=0.7}", "pm{beta=0.9}");
  Point x0(line, Eigen::VectorXd::Constant(1, 0.5));
  const double T = 2.0;
  const int steps = 100;
  ScalarField flat = constant_field(3.7);

  Curve out = optimal_curve(model, flat, x0, T, steps);
  AveragedPath ref = simulate_averaged(model, x0, T, T / steps);
  REQUIRE(out.times.size() == ref.times.size());
  for (size_t k = 0; k < out.times.size(); ++k) {
    CHECK(std::abs(out.times[k] - ref.times[k]) < 1e-12);
    CHECK(distance(out.points[k], ref.points[k]) < 1e-6);
  }
  CHECK(young_residual(model, out, flat) <= 1e-3 * T);

  // Cumulative cost at a knot never exceeds the worst segment rate times t.
  ActionValue av = action(model, to_curve(ref, line), zero_initial());
  double worst_rate = 0.0;
  for (size_t k = 1; k < av.per_segment.size(); ++k) {
    double dt = ref.times[k] - ref.times[k - 1];
    worst_rate = std::max(worst_rate, av.per_segment[k] / dt);
  }
  double cum = 0.0;
  for (size_t k = 1; k < av.per_segment.size(); ++k) {
    cum += av.per_segment[k];
    CHECK(cum <= worst_rate * ref.times[k] + 1e-12);
  }
}

TEST_CASE("optimal curve on the sphere stays feasible and contained") {
  Manifold sph = Manifold::sphere2();
  Model free = parse_model(sph, "single", "zero");
  ScalarField f = ambient_linear_field(Eigen::Vector3d(0.0, 0.0, 0.8));
  Point x0(sph, Eigen::Vector3d(1, 0, 0));
  const double T = 1.0;

  Curve out = optimal_curve(free, f, x0, T, 50);
  for (const Point& p : out.points) CHECK(std::abs(p.x.norm() - 1.0) < 1e-12);
  CHECK(young_residual(free, out, f) <= 1e-3 * T);

  // sup_t U(x(t)) <= U(x(0)) + action + T sup_z H(z, dU(z)).
  ScalarField ups = containment_field(x0);
  double sup_h = 0.0;
  for (const Point& z : make_grid(sph, 12)) {
    sup_h = std::max(sup_h, hamiltonian(free, z, differential(ups, z)));
  }
  double act = action(free, out, zero_initial()).total;
  double sup_ups = 0.0;
  for (const Point& p : out.points) sup_ups = std::max(sup_ups, ups.value(p));
  CHECK(sup_ups <= ups.value(x0) + act + T * sup_h + 0.02);
}

TEST_CASE("hopf-lax evaluation against closed forms") {
  Manifold plane = Manifold::euclidean(2);
  std::vector<Point> grid = make_grid(plane, 21, 2.5);

  Point x0(plane, Eigen::Vector2d(0.3, 0.1));
  HopfLaxResult flat = hopf_lax(constant_field(2.5), 0.7, x0, grid, 0.25);
  CHECK(std::abs(flat.value - 2.5) < 1e-10);
  CHECK(distance(flat.argmax, x0) < 1e-4);

  Eigen::Vector2d p0(1.2, -0.5);
  double t = 0.8;
  HopfLaxResult lin = hopf_lax(ambient_linear_field(p0), t, x0, grid, 0.25);
  double expect = p0.dot(x0.x) + 0.5 * t * p0.squaredNorm();
  CHECK(std::abs(lin.value - expect) < 1e-6);
  CHECK((lin.argmax.x - (x0.x + t * p0)).norm() < 1e-4);

  ScalarField wavy;
  wavy.value = [](const Point& p) {
    return std::sin(1.7 * p.x[0]) + 0.5 * std::cos(2.3 * p.x[1] + 0.4);
  };
  SplitMix64 rng(0x8881u);
  for (int trial = 0; trial < 10; ++trial) {
    Point xa(plane, Eigen::Vector2d(4.0 * rng.uniform01() - 2.0, 4.0 * rng.uniform01() - 2.0));
    double tt = 0.2 + rng.uniform01();
    HopfLaxResult r = hopf_lax(wavy, tt, xa, grid, 0.3);
    CHECK(r.value >= wavy.value(xa) - 1e-12);
  }

  Manifold sph = Manifold::sphere2();
  std::vector<Point> sgrid = make_grid(sph, 14);
  ScalarField height = ambient_linear_field(Eigen::Vector3d(0, 0, 1));
  Point eq(sph, Eigen::Vector3d(1, 0, 0));
  HopfLaxResult hs_small = hopf_lax(height, 0.3, eq, sgrid, 0.2);
  HopfLaxResult hs_large = hopf_lax(height, 1.0, eq, sgrid, 0.2);
  CHECK(hs_small.value >= height.value(eq) - 1e-12);
  CHECK(hs_large.value >= hs_small.value - 1e-12);
  CHECK(hs_large.value <= 1.0 + 1e-12);
  CHECK(hs_large.argmax.x[2] > 0.1);  // optimizer climbs toward the pole

  CHECK_THROWS_AS(hopf_lax(height, 0.0, eq, sgrid, 0.2), ContractViolationError);
  CHECK_THROWS_AS(hopf_lax(height, 1.0, eq, std::vector<Point>{}, 0.2), ContractViolationError);
}

TEST_CASE("working grids cover each manifold") {
  Manifold line = Manifold::euclidean(1);
  std::vector<Point> g1 = make_grid(line, 5, 2.0);
  REQUIRE(g1.size() == 5);
  for (int k = 0; k < 5; ++k) CHECK(std::abs(g1[k].x[0] - (-2.0 + k)) < 1e-12);

  Manifold plane = Manifold::euclidean(2);
  std::vector<Point> g2 = make_grid(plane, 5, 2.0);
  CHECK(g2.size() == 25);
  bool corner = false;
  for (const Point& p : g2) corner = corner || (p.x - Eigen::Vector2d(2.0, 2.0)).norm() < 1e-12;
  CHECK(corner);

  Manifold sph = Manifold::sphere2();
  std::vector<Point> gs = make_grid(sph, 6);
  CHECK(gs.size() == 36);
  double min_gap = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < gs.size(); ++i) {
    CHECK(std::abs(gs[i].x.norm() - 1.0) < 1e-12);
    for (size_t j = i + 1; j < gs.size(); ++j) min_gap = std::min(min_gap, distance(gs[i], gs[j]));
  }
  CHECK(min_gap > 0.2);  // low-discrepancy spiral keeps nodes separated

  Manifold tor = Manifold::torus2();
  std::vector<Point> gt = make_grid(tor, 4);
  CHECK(gt.size() == 16);
  for (const Point& p : gt) {
    CHECK(p.x[0] >= 0.0);
    CHECK(p.x[0] < 2.0 * kPi);
    CHECK(p.x[1] >= 0.0);
    CHECK(p.x[1] < 2.0 * kPi);
  }

  CHECK_THROWS_AS(make_grid(line, 1), ContractViolationError);
}

TEST_CASE("grid interpolants reproduce sampled functions") {
  Manifold line = Manifold::euclidean(1);
  GridFunction g;
  g.nodes = make_grid(line, 11, 2.5);
  std::reverse(g.nodes.begin(), g.nodes.end());  // order must not matter
  g.values.resize(11);
  for (int k = 0; k < 11; ++k) g.values[k] = 3.0 * g.nodes[k].x[0] + 1.0;
  ScalarField lin = interpolant(line, g);
  for (double x : {-2.5, -1.3, 0.0, 0.625, 2.5, 3.5, -4.0}) {
    Point p(line, Eigen::VectorXd::Constant(1, x));
    CHECK(std::abs(lin.value(p) - (3.0 * x + 1.0)) < 1e-12);
  }

  for (int k = 0; k < 11; ++k) g.values[k] = std::abs(g.nodes[k].x[0]);
  ScalarField vee = interpolant(line, g);
  CHECK(std::abs(vee.value(Point(line, Eigen::VectorXd::Constant(1, 0.25))) - 0.25) < 1e-12);
  CHECK(std::abs(vee.value(Point(line, Eigen::VectorXd::Constant(1, -1.75))) - 1.75) < 1e-12);

  Manifold sph = Manifold::sphere2();
  GridFunction gs;
  gs.nodes = make_grid(sph, 12);
  gs.values.resize(static_cast<long>(gs.nodes.size()));
  for (size_t k = 0; k < gs.nodes.size(); ++k) gs.values[static_cast<long>(k)] = 0.75;
  ScalarField cons = interpolant(sph, gs);
  SplitMix64 rng(0x77123u);
  for (int trial = 0; trial < 30; ++trial) {
    Eigen::Vector3d r(rng.normal(), rng.normal(), rng.normal());
    Point q(sph, r.normalized());
    CHECK(std::abs(cons.value(q) - 0.75) < 1e-12);
  }

  Eigen::Vector3d c(0.4, -0.9, 0.3);
  for (size_t k = 0; k < gs.nodes.size(); ++k) {
    gs.values[static_cast<long>(k)] = c.dot(gs.nodes[k].x);
  }
  ScalarField smooth = interpolant(sph, gs);
  CHECK(std::abs(smooth.value(gs.nodes[7]) - gs.values[7]) < 1e-12);
  double worst = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    Eigen::Vector3d r(rng.normal(), rng.normal(), rng.normal());
    Point q(sph, r.normalized());
    worst = std::max(worst, std::abs(smooth.value(q) - c.dot(q.x)));
  }
  CHECK(worst < 0.1);

  GridFunction bad;
  bad.nodes = g.nodes;
  bad.values.resize(3);
  CHECK_THROWS_AS(interpolant(line, bad), ContractViolationError);
  GridFunction tiny;
  tiny.nodes = {g.nodes[0]};
  tiny.values.resize(1);
  CHECK_THROWS_AS(interpolant(line, tiny), ContractViolationError);
}

TEST_CASE("resolvent of constants and monotone inputs") {
  Manifold line = Manifold::euclidean(1);
  Model drifting = parse_model(line, "twostate_spatial{a0=1.5,a1=0.8}", "pm{beta=0.7}");
  Point x(line, Eigen::VectorXd::Constant(1, 0.4));

  ResolventConfig cfg = fast_cfg();
  ResolventValue rc = resolvent(drifting, constant_field(0.7), x, cfg);
  CHECK(std::abs(rc.value - 0.7) < 1e-4);
  CHECK(rc.value <= 0.7 + 1e-9);  // the reported value is a lower bound
  CHECK(rc.best_restart >= 0);
  CHECK(rc.best_restart < cfg.restarts);
  CHECK(rc.iterations >= 1);
  REQUIRE(!rc.curve.points.empty());
  CHECK(distance(rc.curve.points.front(), x) == 0.0);
  for (size_t k = 1; k < rc.curve.times.size(); ++k) {
    CHECK(rc.curve.times[k] > rc.curve.times[k - 1]);
  }

  Model free = parse_model(line, "single", "zero");
  ScalarField lowf;
  lowf.value = [](const Point& p) { return std::cos(p.x[0]); };
  ScalarField highf;
  highf.value = [](const Point& p) { return std::cos(p.x[0]) + 0.5; };
  Point y(line, Eigen::VectorXd::Constant(1, 0.9));
  double rl = resolvent(free, lowf, y, cfg).value;
  double rh = resolvent(free, highf, y, cfg).value;
  CHECK(rl <= rh + 1e-6);
  CHECK(std::abs((rh - rl) - 0.5) < 1e-6);  // constant offsets pass through

  ResolventConfig bad = cfg;
  bad.lambda = 0.0;
  CHECK_THROWS_AS(resolvent(free, lowf, y, bad), ContractViolationError);
}

TEST_CASE("resolvent matches a dynamic-programming transcription") {
  Manifold line = Manifold::euclidean(1);
  Model free = parse_model(line, "single", "zero");
  auto h = [](double y) { return -y * y; };
  ScalarField hf;
  hf.value = [h](const Point& p) { return h(p.x[0]); };

  ResolventConfig cfg;
  cfg.lambda = 1.0;
  cfg.segments = 48;
  cfg.restarts = 4;
  cfg.max_iters = 200;

  DpTable table = dp_resolvent_quadratic(cfg.lambda, 48, h);
  double dp = table.at(1.0);
  // Hand solution of u - u'^2/2 = -x^2 is u = -x^2/2; the transcription
  // sits within its own time-discretization gap of that.
  CHECK(std::abs(dp - (-0.5)) < 0.02);

  Point x1(line, Eigen::VectorXd::Constant(1, 1.0));
  ResolventValue rv = resolvent(free, hf, x1, cfg);
  CHECK(std::abs(rv.value - dp) < 0.02 * std::max(1.0, std::abs(dp)));

  Point x0(line, Eigen::VectorXd::Zero(1));
  ResolventValue at_top = resolvent(free, hf, x0, cfg);
  CHECK(std::abs(at_top.value) < 1e-6);  // staying at the peak is optimal
}

TEST_CASE("resolvent consistency on the two-state problem") {
  Manifold line = Manifold::euclidean(1);
  Model model = parse_model(line, "twostate{a=1}", "pm{beta=1}");
  ScalarField h;
  h.value = [](const Point& p) { return std::cos(p.x[0]); };

  ResolventConfig cfg = fast_cfg();
  cfg.lambda = 1.0;
  std::vector<Point> grid = make_grid(line, 17, 2.5);
  GridFunction U = resolvent_on_grid(model, h, grid, cfg);
  ScalarField u = interpolant(line, U);

  // u = R(1)h also solves u = R(a)(u - a (u - h)) for 0 < a < 1.
  const double alpha = 0.5;
  ScalarField g;
  g.value = [u, h, alpha](const Point& p) {
    return (1.0 - alpha) * u.value(p) + alpha * h.value(p);
  };
  ResolventConfig acfg = cfg;
  acfg.lambda = alpha;
  for (double xv : {-1.25, 0.0, 0.9375}) {
    Point x(line, Eigen::VectorXd::Constant(1, xv));
    double lhs = resolvent(model, g, x, acfg).value;
    double ux = u.value(x);
    CHECK(std::abs(lhs - ux) <= 0.05 * std::max(1.0, std::abs(ux)));
  }

  // The same grid values nearly solve u - lambda H(x, u') = h.
  ViscosityResidual vr = viscosity_residual(model, U, cfg.lambda, h);
  double h_norm = 0.0;
  for (const Point& p : grid) h_norm = std::max(h_norm, std::abs(h.value(p)));
  CHECK(vr.max_residual <= 0.05 * h_norm);

  // Identical inputs leave no comparison gap.
  Point x0(line, Eigen::VectorXd::Zero(1));
  ComparisonGapResult gap = comparison_gap(U, U, h, h, 0.1, {1.0, 8.0}, x0, 4.0);
  CHECK(std::abs(gap.sup_u_minus_v) < 1e-12);
  CHECK(std::abs(gap.sup_h1_minus_h2) < 1e-12);
  REQUIRE(gap.entries.size() == 2);
  CHECK(gap.entries[1].m_psi <= gap.entries[0].m_psi + 1e-12);
}

TEST_CASE("semigroup of a constant and refinement toward hopf-lax") {
  Manifold line = Manifold::euclidean(1);
  Model free = parse_model(line, "single", "zero");
  std::vector<Point> grid = make_grid(line, 61, 2.5);
  ResolventConfig cfg = fast_cfg();
  cfg.max_iters = 40;
  cfg.restarts = 1;  // the small-lambda steps are local; the rest start suffices

  Point probe(line, Eigen::VectorXd::Constant(1, 0.4));
  SemigroupResult sc = semigroup(free, constant_field(1.3), probe, 0.5, 3, grid, cfg);
  CHECK(std::abs(sc.value - 1.3) < 1e-4);

  ScalarField f;
  f.value = [](const Point& p) { return -0.5 * p.x[0] * p.x[0]; };
  Point x(line, Eigen::VectorXd::Constant(1, 1.5));
  const double t = 0.5;

  std::vector<Point> fine = make_grid(line, 201, 2.5);
  double hl = hopf_lax(f, t, x, fine, 0.05).value;
  CHECK(std::abs(hl - (-0.5 * x.x[0] * x.x[0] / (1.0 + t))) < 1e-4);

  SemigroupResult s16 = semigroup(free, f, x, t, 16, grid, cfg);
  SemigroupResult s32 = semigroup(free, f, x, t, 32, grid, cfg);
  CHECK(std::abs(s32.value - hl) <= 0.02 * std::max(1.0, std::abs(hl)));
  // Doubling m moves the value by no more than the distance to the limit,
  // up to the per-step quadrature floor.
  CHECK(std::abs(s32.value - s16.value) <= std::abs(s16.value - hl) + 2e-3);

  CHECK_THROWS_AS(semigroup(free, f, x, 0.0, 4, grid, cfg), ContractViolationError);
  CHECK_THROWS_AS(semigroup(free, f, x, 1.0, 0, grid, cfg), ContractViolationError);
}

TEST_CASE("viscosity residual diagnostics") {
  Manifold line = Manifold::euclidean(1);
  Model free = parse_model(line, "single", "zero");
  ScalarField h;
  h.value = [](const Point& p) { return std::cos(p.x[0]); };

  GridFunction same;
  same.nodes = make_grid(line, 41, 2.5);
  same.values.resize(41);
  for (int k = 0; k < 41; ++k) same.values[k] = h.value(same.nodes[k]);
  const double lam = 1e-6;
  ViscosityResidual vr = viscosity_residual(free, same, lam, h);
  double max_h = 0.0;
  for (int k = 1; k + 1 < 41; ++k) {
    double df = (same.values[k + 1] - same.values[k - 1]) /
                (same.nodes[k + 1].x[0] - same.nodes[k - 1].x[0]);
    max_h = std::max(max_h, 0.5 * df * df);
  }
  CHECK(vr.max_residual <= lam * max_h * (1.0 + 1e-9) + 1e-15);

  // Exact stationary solution of u - H(u') = -x^2 for H(p) = p^2/2.
  GridFunction exact;
  exact.nodes = same.nodes;
  exact.values.resize(41);
  for (int k = 0; k < 41; ++k) {
    double xv = exact.nodes[k].x[0];
    exact.values[k] = -0.5 * xv * xv;
  }
  ScalarField neg_sq;
  neg_sq.value = [](const Point& p) { return -p.x[0] * p.x[0]; };
  CHECK(viscosity_residual(free, exact, 1.0, neg_sq).max_residual < 1e-10);

  // Values from the independent transcription stay within grid accuracy.
  DpTable table = dp_resolvent_quadratic(1.0, 48, [](double y) { return -y * y; });
  GridFunction dp_fn;
  dp_fn.nodes = same.nodes;
  dp_fn.values.resize(41);
  for (int k = 0; k < 41; ++k) dp_fn.values[k] = table.at(dp_fn.nodes[k].x[0]);
  double h_norm = 6.25;
  CHECK(viscosity_residual(free, dp_fn, 1.0, neg_sq).max_residual <= 0.05 * h_norm);

  Model on_sphere = parse_model(Manifold::sphere2(), "single", "zero");
  GridFunction gs;
  gs.nodes = make_grid(Manifold::sphere2(), 4);
  gs.values = Eigen::VectorXd::Zero(16);
  CHECK_THROWS_AS(viscosity_residual(on_sphere, gs, 1.0, h), ContractViolationError);

  GridFunction two;
  two.nodes = {same.nodes[0], same.nodes[1]};
  two.values = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(viscosity_residual(free, two, 1.0, h), ContractViolationError);
}

TEST_CASE("comparison gap maximizers and penalties") {
  Manifold line = Manifold::euclidean(1);
  GridFunction u;
  u.nodes = make_grid(line, 21, 2.0);
  u.values = Eigen::VectorXd::Constant(21, 0.7);
  Point x0(line, Eigen::VectorXd::Zero(1));  // grid midpoint

  ComparisonGapResult flat =
      comparison_gap(u, u, constant_field(0.7), constant_field(0.7), 0.2, {1.0, 4.0, 16.0}, x0, 4.0);
  CHECK(flat.sup_u_minus_v == 0.0);
  CHECK(flat.sup_h1_minus_h2 == 0.0);
  for (const ComparisonGapEntry& e : flat.entries) {
    CHECK(distance(e.x_star, x0) < 1e-12);
    CHECK(distance(e.y_star, x0) < 1e-12);
    CHECK(e.separation < 1e-12);
    CHECK(e.m_psi == 0.0);
  }

  ScalarField w;
  w.value = [](const Point& p) { return std::sin(1.3 * p.x[0]) + 0.3 * p.x[0] * p.x[0]; };
  GridFunction v;
  v.nodes = u.nodes;
  v.values.resize(21);
  for (int k = 0; k < 21; ++k) v.values[k] = w.value(v.nodes[k]);
  ComparisonGapResult res =
      comparison_gap(v, v, w, w, 0.1, {0.5, 2.0, 8.0, 32.0}, x0, 4.0);
  CHECK(std::abs(res.sup_u_minus_v) < 1e-12);
  CHECK(res.sup_u_minus_v <= res.sup_h1_minus_h2 + 1e-12);
  REQUIRE(res.entries.size() == 4);
  for (size_t k = 1; k < res.entries.size(); ++k) {
    CHECK(res.entries[k].m_psi <= res.entries[k - 1].m_psi + 1e-12);
  }
  CHECK(res.entries.back().separation <= res.entries.front().separation + 1e-12);

  CHECK_THROWS_AS(comparison_gap(v, v, w, w, 0.0, {1.0}, x0, 4.0), ContractViolationError);
  CHECK_THROWS_AS(comparison_gap(v, v, w, w, 1.0, {1.0}, x0, 4.0), ContractViolationError);
  GridFunction empty;
  CHECK_THROWS_AS(comparison_gap(empty, v, w, w, 0.1, {1.0}, x0, 4.0), ContractViolationError);
}

TEST_CASE("curve serialization round-trips") {
  Manifold plane = Manifold::euclidean(2);
  Curve c;
  c.man = plane;
  for (int k = 0; k <= 7; ++k) {
    double t = 0.17 * k;
    c.times.push_back(t);
    c.points.emplace_back(plane, Eigen::Vector2d(std::sin(1.1 * t) / 3.0, t * t - 0.2));
  }
  std::stringstream ss;
  write_curve_jsonl(ss, c);
  Curve back = read_curve_jsonl(ss, plane);
  REQUIRE(back.times.size() == c.times.size());
  for (size_t k = 0; k < c.times.size(); ++k) {
    CHECK(back.times[k] == c.times[k]);
    CHECK(back.points[k].x == c.points[k].x);
  }

  Manifold sph = Manifold::sphere2();
  Curve geo = polar_geodesic(12, 1.0);
  std::stringstream s2;
  write_curve_jsonl(s2, geo);
  s2 << "\n";  // blank lines are tolerated
  Curve geo_back = read_curve_jsonl(s2, sph);
  REQUIRE(geo_back.points.size() == geo.points.size());
  for (size_t k = 0; k < geo.points.size(); ++k) {
    CHECK((geo_back.points[k].x - geo.points[k].x).norm() < 1e-15);
  }

  std::stringstream broken;
  broken << R"({"t":0.0,"coords":[0.0,0.0]})" << "\n" << "not json" << "\n";
  try {
    read_curve_jsonl(broken, plane);
    CHECK(false);
  } catch (const ConfigParseError& e) {
    CHECK(e.line() == 2);
  }

  std::stringstream regress;
  regress << R"({"t":0.0,"coords":[0.0,0.0]})" << "\n"
          << R"({"t":-1.0,"coords":[1.0,0.0]})" << "\n";
  CHECK_THROWS_AS(read_curve_jsonl(regress, plane), ContractViolationError);

  std::stringstream empty;
  CHECK_THROWS_AS(read_curve_jsonl(empty, plane), ContractViolationError);
}
