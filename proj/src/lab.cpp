#include "geoldp/lab.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "geoldp/detail/family.hpp"
#include "geoldp/switching.hpp"
#include "geoldp/threads.hpp"

namespace geoldp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZ95 = 1.959963984540054;  // 97.5% standard normal quantile
}  // namespace

WilsonInterval wilson_interval(long hits, long trials) {
  if (trials < 1 || hits < 0 || hits > trials) {
    throw ContractViolationError("wilson_interval: need 0 <= hits <= trials, trials >= 1");
  }
  double n = static_cast<double>(trials);
  double p = static_cast<double>(hits) / n;
  double z2 = kZ95 * kZ95;
  double denom = 1.0 + z2 / n;
  double center = (p + z2 / (2.0 * n)) / denom;
  double half = (kZ95 / denom) * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return {p, std::max(0.0, center - half), std::min(1.0, center + half)};
}

namespace {

bool event_holds(const EventSpec& event, const Point& y) {
  double d = distance(y, event.center);
  return event.outside ? d >= event.rho : d <= event.rho;
}

// Step size: honor the switching contract, keep at least 64 steps for the
// drift splitting even when there is nothing to switch.
double pick_dt(const Model& model, long n, double T) {
  return std::min(SimConfig::max_dt(n, model.rates.max_total_rate), T / 64.0);
}

}  // namespace

std::vector<RareEventRecord> estimate_rare_event(const Model& model, const Point& x0, int state0,
                                                 const EventSpec& event,
                                                 const std::vector<long>& n_list, long samples,
                                                 std::uint64_t seed) {
  if (n_list.empty() || samples < 1) {
    throw ContractViolationError("estimate_rare_event: need n values and samples >= 1");
  }
  if (!(event.rho > 0.0) || !(event.T > 0.0)) {
    throw ContractViolationError("estimate_rare_event: need rho > 0 and T > 0");
  }
  std::vector<RareEventRecord> out;
  std::vector<unsigned char> hit(static_cast<size_t>(samples));
  for (long n : n_list) {
    SimConfig cfg;
    cfg.n = n;
    cfg.T = event.T;
    cfg.dt = pick_dt(model, n, event.T);
    parallel_for(static_cast<size_t>(samples), [&](std::size_t j) {
      SplitMix64 rng = substream(seed, j);
      Point end = simulate_endpoint(model, cfg, x0, state0, rng);
      hit[j] = event_holds(event, end) ? 1 : 0;
    });
    RareEventRecord rec;
    rec.n = n;
    rec.samples = samples;
    rec.hits = std::accumulate(hit.begin(), hit.end(), 0L);
    rec.interval = wilson_interval(rec.hits, samples);
    rec.zero_hits = rec.hits == 0;
    out.push_back(rec);
  }
  return out;
}

RateFit extract_rate(const std::vector<RareEventRecord>& records) {
  std::vector<double> xs, ys;
  for (const RareEventRecord& r : records) {
    if (r.hits <= 0) continue;  // upper-bound-only entries carry no log p-hat
    xs.push_back(static_cast<double>(r.n));
    ys.push_back(-std::log(r.interval.p_hat));
  }
  const int m = static_cast<int>(xs.size());
  if (m < 3) {
    throw InsufficientDataError("rate fit needs at least 3 n values with observed hits, got " +
                                std::to_string(m));
  }
  double xbar = std::accumulate(xs.begin(), xs.end(), 0.0) / m;
  double ybar = std::accumulate(ys.begin(), ys.end(), 0.0) / m;
  double sxx = 0.0, sxy = 0.0;
  for (int k = 0; k < m; ++k) {
    sxx += (xs[k] - xbar) * (xs[k] - xbar);
    sxy += (xs[k] - xbar) * (ys[k] - ybar);
  }
  RateFit fit;
  fit.points_used = m;
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  double ss_res = 0.0;
  for (int k = 0; k < m; ++k) {
    double r = ys[k] - (fit.intercept + fit.slope * xs[k]);
    ss_res += r * r;
  }
  fit.slope_stderr = m > 2 ? std::sqrt(ss_res / (m - 2) / sxx) : 0.0;
  return fit;
}

namespace {

std::vector<Eigen::VectorXd> unit_directions(int dim, int count) {
  std::vector<Eigen::VectorXd> dirs;
  if (dim == 1) {
    dirs.push_back(Eigen::VectorXd::Constant(1, 1.0));
    dirs.push_back(Eigen::VectorXd::Constant(1, -1.0));
    return dirs;
  }
  if (dim == 2) {
    for (int k = 0; k < count; ++k) {
      double a = 2.0 * 3.14159265358979323846 * k / count;
      Eigen::VectorXd u(2);
      u << std::cos(a), std::sin(a);
      dirs.push_back(u);
    }
    return dirs;
  }
  for (int k = 0; k < count; ++k) {  // Fibonacci sphere
    double z = 1.0 - (2.0 * k + 1.0) / count;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double a = 2.39996322972865332 * k;
    Eigen::VectorXd u(3);
    u << r * std::cos(a), r * std::sin(a), z;
    dirs.push_back(u);
  }
  return dirs;
}

// Shrinking compass search over unit directions u -> cost(exp_center(rho u)).
double refine_boundary_cost(const std::function<double(const Eigen::VectorXd&)>& cost,
                            Eigen::VectorXd u, double best) {
  const int d = static_cast<int>(u.size());
  if (d == 1) return best;
  double step = 0.2;
  while (step > 1e-6) {
    bool moved = false;
    for (int k = 0; k < d && !moved; ++k) {
      for (double sgn : {1.0, -1.0}) {
        Eigen::VectorXd cand = (u + sgn * step * Eigen::VectorXd::Unit(d, k)).normalized();
        double c = cost(cand);
        if (c < best - 1e-14) {
          best = c;
          u = cand;
          moved = true;
          break;
        }
      }
    }
    if (!moved) step *= 0.5;
  }
  return best;
}

// Hamiltonian flow in a fixed chart: state (u, pc) with
//   du/dt = A(y) grad_p H,   dpc/dt = -dH/du (central differences),
// action accumulating as dA/dt = <pc, du/dt> - H.  Heun steps.
struct ShotResult {
  Point end;
  double action = kInf;
  bool ok = false;
};

ShotResult shoot_in_chart(const Model& model, const ChartPtr& chart, const Eigen::VectorXd& u0,
                          const Eigen::VectorXd& p0, double T, int steps) {
  const int d = static_cast<int>(u0.size());
  const double h = 1e-5;
  auto ham = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& pc) {
    Point y = chart->from_coords(u);
    return hamiltonian(model, y, chart->pull_covector(y, pc));
  };
  auto rhs = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& pc, Eigen::VectorXd& du,
                 Eigen::VectorXd& dpc, double& da) {
    Point y = chart->from_coords(u);
    CotangentVector p = chart->pull_covector(y, pc);
    TangentVector gp = grad_p_hamiltonian(model, y, p);
    du = chart->push_matrix(y) * gp.comps;
    dpc.resize(d);
    for (int k = 0; k < d; ++k) {
      Eigen::VectorXd up = u, um = u;
      up[k] += h;
      um[k] -= h;
      dpc[k] = -(ham(up, pc) - ham(um, pc)) / (2.0 * h);
    }
    da = pc.dot(du) - hamiltonian(model, y, p);
  };
  ShotResult out;
  Eigen::VectorXd u = u0, pc = p0;
  double A = 0.0;
  double dt = T / steps;
  try {
    Eigen::VectorXd du1, dp1, du2, dp2;
    double da1, da2;
    for (int s = 0; s < steps; ++s) {
      rhs(u, pc, du1, dp1, da1);
      rhs(u + dt * du1, pc + dt * dp1, du2, dp2, da2);
      u += 0.5 * dt * (du1 + du2);
      pc += 0.5 * dt * (dp1 + dp2);
      A += 0.5 * dt * (da1 + da2);
    }
    out.end = chart->from_coords(u);
    out.action = A;
    out.ok = true;
  } catch (const ChartDomainError&) {
    out.ok = false;
  }
  return out;
}

}  // namespace

double theoretical_rate(const Model& model, const Point& x0, const EventSpec& event) {
  if (!(event.rho > 0.0) || !(event.T > 0.0)) {
    throw ContractViolationError("theoretical_rate: need rho > 0 and T > 0");
  }
  double inj = x0.man.injectivity_radius();
  if (event.rho >= inj - kCutLocusMargin) {
    throw ContractViolationError("theoretical_rate: event radius reaches the cut locus");
  }
  const double T = event.T;
  AveragedPath avg = simulate_averaged(model, x0, T, T / 512.0);
  if (event_holds(event, avg.points.back())) return 0.0;

  const int d = x0.man.dim;
  std::vector<Eigen::VectorXd> dirs = unit_directions(d, d == 2 ? 64 : 128);

  // cheapest event point sits on the boundary sphere d(., center) = rho
  if (model.drift.identically_zero) {
    // zero state-coupled drift makes H = |p|^2/2 and the cost the geodesic one
    auto cost = [&](const Eigen::VectorXd& u) {
      Point y = exp_map(event.center, TangentVector(event.center, event.rho * u));
      double dist = distance(x0, y);
      return dist * dist / (2.0 * T);
    };
    double best = kInf;
    Eigen::VectorXd best_u = dirs.front();
    for (const Eigen::VectorXd& u : dirs) {
      double c = cost(u);
      if (c < best) {
        best = c;
        best_u = u;
      }
    }
    return refine_boundary_cost(cost, best_u, best);
  }

  if (model.spatially_homogeneous()) {
    // constant-velocity segments are optimal (L is x-free and convex in v)
    auto cost = [&](const Eigen::VectorXd& u) {
      Point y = exp_map(event.center, TangentVector(event.center, event.rho * u));
      TangentVector v(x0, log_map(x0, y).comps / T);
      return T * legendre(model, x0, v).value;
    };
    double best = kInf;
    Eigen::VectorXd best_u = dirs.front();
    for (const Eigen::VectorXd& u : dirs) {
      double c = cost(u);
      if (c < best) {
        best = c;
        best_u = u;
      }
    }
    return refine_boundary_cost(cost, best_u, best);
  }

  // General case: shoot extremals from x0 over a grid of initial momenta and
  // keep the cheapest one whose endpoint realizes the event.
  ChartPtr chart = normal_chart(x0);
  Eigen::VectorXd u0 = chart->to_coords(x0);
  double scale = event.rho / T + model.drift.bound + 1.0;
  std::vector<double> mags;
  for (double m = 0.125; m <= 8.0; m *= std::sqrt(2.0)) mags.push_back(m * scale);
  double best = kInf;
  Eigen::VectorXd best_p;
  for (const Eigen::VectorXd& dir : dirs) {
    for (double m : mags) {
      ShotResult shot = shoot_in_chart(model, chart, u0, (m * dir).eval(), T, 160);
      if (shot.ok && event_holds(event, shot.end) && shot.action < best) {
        best = shot.action;
        best_p = m * dir;
      }
    }
  }
  if (!std::isfinite(best)) {
    throw NumericalFailureError("theoretical_rate", "no shot reached the event");
  }
  double step = 0.25 * scale;
  while (step > 1e-5 * scale) {
    bool moved = false;
    for (int k = 0; k < d && !moved; ++k) {
      for (double sgn : {1.0, -1.0}) {
        Eigen::VectorXd cand = best_p + sgn * step * Eigen::VectorXd::Unit(d, k);
        ShotResult shot = shoot_in_chart(model, chart, u0, cand, T, 160);
        if (shot.ok && event_holds(event, shot.end) && shot.action < best - 1e-13) {
          best = shot.action;
          best_p = cand;
          moved = true;
          break;
        }
      }
    }
    if (!moved) step *= 0.5;
  }
  return best;
}

namespace {

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  double pos = q * (static_cast<double>(v.size()) - 1.0);
  size_t lo = static_cast<size_t>(pos);
  size_t hi = std::min(lo + 1, v.size() - 1);
  double w = pos - static_cast<double>(lo);
  return (1.0 - w) * v[lo] + w * v[hi];
}

}  // namespace

std::vector<AveragingRecord> averaging_study(const Model& model, const Point& x0, int state0,
                                             double T, const std::vector<long>& n_list,
                                             long samples, std::uint64_t seed) {
  if (n_list.empty() || samples < 1 || !(T > 0.0)) {
    throw ContractViolationError("averaging_study: need n values, samples >= 1, T > 0");
  }
  std::vector<AveragingRecord> out;
  for (long n : n_list) {
    double dt = std::min(pick_dt(model, n, T), T / 200.0);
    AveragedPath avg = simulate_averaged(model, x0, T, dt);
    std::vector<double> sup_dev(static_cast<size_t>(samples));
    parallel_for(static_cast<size_t>(samples), [&](std::size_t j) {
      SimConfig cfg;
      cfg.n = n;
      cfg.T = T;
      cfg.dt = dt;
      cfg.seed = seed ^ j;
      PathSample path = simulate(model, cfg, x0, state0);
      double sup = 0.0;
      for (size_t k = 0; k < path.points.size(); ++k) {
        sup = std::max(sup, distance(path.points[k], avg.points[k]));
      }
      sup_dev[j] = sup;
    });
    AveragingRecord rec;
    rec.n = n;
    rec.median_sup_dev = percentile(sup_dev, 0.5);
    rec.p90_sup_dev = percentile(sup_dev, 0.9);
    out.push_back(rec);
  }
  return out;
}

OperatorConvergenceResult operator_convergence_study(const Model& model, const ScalarField& f,
                                                     const std::vector<ScalarField>& phi,
                                                     const std::vector<Point>& x_grid,
                                                     const std::vector<long>& n_list) {
  if (x_grid.empty() || n_list.size() < 2) {
    throw ContractViolationError("operator_convergence_study: need a grid and >= 2 n values");
  }
  OperatorConvergenceResult out;
  const int N = model.n_states();
  for (long n : n_list) {
    double sup = 0.0;
    for (const Point& x : x_grid) {
      for (int i = 0; i < N; ++i) {
        double pre = prelimit_generator(model, f, phi, n, x, i);
        double lim = limit_generator(model, f, phi, x, i);
        sup = std::max(sup, std::abs(pre - lim));
      }
    }
    out.records.push_back({n, sup});
  }
  // log-log least squares of sup_error against n
  double xbar = 0.0, ybar = 0.0;
  for (const auto& r : out.records) {
    xbar += std::log(static_cast<double>(r.n));
    ybar += std::log(std::max(r.sup_error, 1e-300));
  }
  xbar /= static_cast<double>(out.records.size());
  ybar /= static_cast<double>(out.records.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& r : out.records) {
    double dx = std::log(static_cast<double>(r.n)) - xbar;
    double dy = std::log(std::max(r.sup_error, 1e-300)) - ybar;
    sxx += dx * dx;
    sxy += dx * dy;
  }
  out.slope = sxy / sxx;
  return out;
}

ScalarField parse_scalar_field(const std::string& s, const Manifold& man) {
  detail::FamilySpec spec = detail::parse_family(s);
  ScalarField f;
  if (spec.name == "zero") {
    f.value = [](const Point&) { return 0.0; };
    f.diff = [](const Point& x) {
      return CotangentVector(x, Eigen::VectorXd::Zero(x.man.dim));
    };
    return f;
  }
  if (spec.name == "const") {
    double c = spec.get("c", 1.0);
    f.value = [c](const Point&) { return c; };
    f.diff = [](const Point& x) {
      return CotangentVector(x, Eigen::VectorXd::Zero(x.man.dim));
    };
    return f;
  }
  if (spec.name == "neg_dist_sq") {
    auto it = spec.vectors.find("center");
    if (it == spec.vectors.end()) {
      throw ContractViolationError("neg_dist_sq needs center=[..]");
    }
    if (static_cast<int>(it->second.size()) != man.ambient_dim()) {
      throw ContractViolationError("neg_dist_sq: center has wrong dimension");
    }
    Point center(man, Eigen::Map<const Eigen::VectorXd>(it->second.data(), man.ambient_dim()));
    double scale = spec.get("scale", 1.0);
    f.value = [center, scale](const Point& x) {
      double d = distance(x, center);
      return -scale * d * d;
    };
    f.diff = [center, scale](const Point& x) {
      // grad(-scale d^2) = 2 scale log_x(center), lowered
      TangentVector lg = log_map(x, center);
      return CotangentVector(x, 2.0 * scale * lg.comps);
    };
    return f;
  }
  if (spec.name == "cos1") {
    double amp = spec.get("amp", 1.0);
    double freq = spec.get("freq", 1.0);
    f.value = [amp, freq](const Point& x) { return amp * std::cos(freq * x.x[0]); };
    f.diff = [amp, freq](const Point& x) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(x.man.ambient_dim());
      g[0] = -amp * freq * std::sin(freq * x.x[0]);
      return flat(tangent_from_ambient(x, g));
    };
    return f;
  }
  if (spec.name == "height") {
    if (man.kind != ManifoldKind::Sphere2) {
      throw ContractViolationError("height field is defined on sphere2 only");
    }
    double amp = spec.get("amp", 1.0);
    f.value = [amp](const Point& x) { return amp * x.x[2]; };
    f.diff = [amp](const Point& x) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(3);
      g[2] = amp;
      return flat(tangent_from_ambient(x, g));
    };
    return f;
  }
  throw ContractViolationError("unknown scalar field family '" + spec.name + "'");
}

std::uint64_t inputs_hash(const std::string& canonical_text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : canonical_text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

using nlohmann::json;

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

[[noreturn]] void schema_error(const std::string& msg) {
  throw ConfigParseError("config: " + msg, 0, 0);
}

const json& require_key(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) schema_error(std::string("missing key '") + key + "'");
  return *it;
}

double as_number(const json& j, const char* key) {
  const json& v = require_key(j, key);
  if (!v.is_number()) schema_error(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

std::string as_string(const json& j, const char* key) {
  const json& v = require_key(j, key);
  if (!v.is_string()) schema_error(std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

Point point_from_json(const Manifold& man, const json& arr, const char* key) {
  if (!arr.is_array()) schema_error(std::string("'") + key + "' must be a coordinate array");
  std::vector<double> coords;
  for (const json& v : arr) {
    if (!v.is_number()) schema_error(std::string("'") + key + "' must hold numbers");
    coords.push_back(v.get<double>());
  }
  if (static_cast<int>(coords.size()) != man.ambient_dim()) {
    schema_error(std::string("'") + key + "' has wrong dimension for " + man.id());
  }
  return Point(man, Eigen::Map<const Eigen::VectorXd>(coords.data(), coords.size()));
}

Model model_from_json(const json& cfg) {
  const json& jm = require_key(cfg, "model");
  Manifold man = Manifold::parse(as_string(jm, "manifold"));
  std::string rates = as_string(jm, "rates");
  std::string drift = jm.contains("drift") ? as_string(jm, "drift") : std::string();
  return parse_model(man, rates, drift);
}

std::vector<long> n_list_from_json(const json& cfg) {
  const json& jn = require_key(cfg, "n_list");
  if (!jn.is_array() || jn.empty()) schema_error("'n_list' must be a nonempty array");
  std::vector<long> out;
  long prev = 0;
  for (const json& v : jn) {
    if (!v.is_number_integer()) schema_error("'n_list' must hold integers");
    long n = v.get<long>();
    if (n <= prev) schema_error("'n_list' must be increasing positive integers");
    out.push_back(n);
    prev = n;
  }
  return out;
}

std::vector<Point> grid_from_json(const json& cfg, const Manifold& man, int default_per_axis,
                                  double default_half_width) {
  int per_axis = default_per_axis;
  double half_width = default_half_width;
  if (cfg.contains("grid")) {
    const json& jg = cfg.at("grid");
    if (jg.contains("per_axis")) per_axis = jg.at("per_axis").get<int>();
    if (jg.contains("half_width")) half_width = jg.at("half_width").get<double>();
  }
  return make_grid(man, per_axis, half_width);
}

json json_of_fit(const RateFit& fit) {
  return json{{"slope", fit.slope},
              {"intercept", fit.intercept},
              {"slope_stderr", fit.slope_stderr},
              {"points_used", fit.points_used}};
}

struct CsvBuilder {
  std::ostringstream os;
  explicit CsvBuilder(const std::string& kind) { os << "# geoldp-csv 1 " << kind << "\n"; }
  void header(const std::string& cols) { os << cols << "\n"; }
  void row(const std::vector<double>& vals) {
    for (size_t k = 0; k < vals.size(); ++k) {
      if (k) os << ",";
      os << fmt_g17(vals[k]);
    }
    os << "\n";
  }
  std::string str() const { return os.str(); }
};

ExperimentOutput run_rare_event(const json& cfg) {
  Model model = model_from_json(cfg);
  Point x0 = point_from_json(model.man, require_key(cfg, "x0"), "x0");
  int state0 = cfg.value("state0", 0);
  const json& je = require_key(cfg, "event");
  EventSpec event{point_from_json(model.man, require_key(je, "center"), "center"),
                  as_number(je, "rho"), as_number(je, "T"), true};
  if (je.contains("sense")) {
    std::string sense = je.at("sense").get<std::string>();
    if (sense != "outside" && sense != "inside") schema_error("event sense must be inside/outside");
    event.outside = sense == "outside";
  }
  std::vector<long> n_list = n_list_from_json(cfg);
  long samples = static_cast<long>(as_number(cfg, "samples"));
  std::uint64_t seed = cfg.value("seed", 0ULL);

  auto records = estimate_rare_event(model, x0, state0, event, n_list, samples, seed);
  json jrec = json::array();
  CsvBuilder csv("rare_event");
  csv.header("n,p_hat,lo,hi,neg_log_p_over_n");
  for (const RareEventRecord& r : records) {
    jrec.push_back(json{{"n", r.n},
                        {"hits", r.hits},
                        {"samples", r.samples},
                        {"p_hat", r.interval.p_hat},
                        {"lo", r.interval.lo},
                        {"hi", r.interval.hi},
                        {"zero_hits", r.zero_hits}});
    double nl = r.hits > 0 ? -std::log(r.interval.p_hat) / static_cast<double>(r.n) : kInf;
    csv.row({static_cast<double>(r.n), r.interval.p_hat, r.interval.lo, r.interval.hi, nl});
  }
  json result{{"records", jrec}};
  try {
    result["fit"] = json_of_fit(extract_rate(records));
  } catch (const InsufficientDataError& e) {
    result["fit"] = nullptr;
    result["fit_note"] = e.what();
  }
  result["theory"] = theoretical_rate(model, x0, event);
  return {result.dump(2), csv.str(), "rare_event"};
}

ExperimentOutput run_averaging(const json& cfg) {
  Model model = model_from_json(cfg);
  Point x0 = point_from_json(model.man, require_key(cfg, "x0"), "x0");
  int state0 = cfg.value("state0", 0);
  double T = as_number(cfg, "T");
  std::vector<long> n_list = n_list_from_json(cfg);
  long samples = static_cast<long>(as_number(cfg, "samples"));
  std::uint64_t seed = cfg.value("seed", 0ULL);

  auto records = averaging_study(model, x0, state0, T, n_list, samples, seed);
  json jrec = json::array();
  CsvBuilder csv("averaging");
  csv.header("n,median_sup_dev,p90_sup_dev");
  for (const AveragingRecord& r : records) {
    jrec.push_back(
        json{{"n", r.n}, {"median_sup_dev", r.median_sup_dev}, {"p90_sup_dev", r.p90_sup_dev}});
    csv.row({static_cast<double>(r.n), r.median_sup_dev, r.p90_sup_dev});
  }
  return {json{{"records", jrec}}.dump(2), csv.str(), "averaging"};
}

ExperimentOutput run_operator_convergence(const json& cfg) {
  Model model = model_from_json(cfg);
  ScalarField f = parse_scalar_field(as_string(cfg, "f"), model.man);
  std::vector<ScalarField> phi;
  if (cfg.contains("phi")) {
    const json& jp = cfg.at("phi");
    if (!jp.is_array() || static_cast<int>(jp.size()) != model.n_states()) {
      schema_error("'phi' must list one field per switching state");
    }
    for (const json& v : jp) phi.push_back(parse_scalar_field(v.get<std::string>(), model.man));
  } else {
    for (int i = 0; i < model.n_states(); ++i) phi.push_back(parse_scalar_field("zero", model.man));
  }
  std::vector<Point> grid = grid_from_json(cfg, model.man, 5, 1.5);
  std::vector<long> n_list = n_list_from_json(cfg);

  OperatorConvergenceResult res = operator_convergence_study(model, f, phi, grid, n_list);
  json jrec = json::array();
  CsvBuilder csv("operator_convergence");
  csv.header("n,sup_error");
  for (const auto& r : res.records) {
    jrec.push_back(json{{"n", r.n}, {"sup_error", r.sup_error}});
    csv.row({static_cast<double>(r.n), r.sup_error});
  }
  return {json{{"records", jrec}, {"slope", res.slope}}.dump(2), csv.str(),
          "operator_convergence"};
}

ExperimentOutput run_resolvent_check(const json& cfg) {
  Model model = model_from_json(cfg);
  ScalarField h = parse_scalar_field(as_string(cfg, "h"), model.man);
  double lambda = as_number(cfg, "lambda");
  Point x0 = point_from_json(model.man, require_key(cfg, "x0"), "x0");
  ResolventConfig rcfg;
  rcfg.lambda = lambda;
  if (cfg.contains("segments")) rcfg.segments = cfg.at("segments").get<int>();
  if (cfg.contains("restarts")) rcfg.restarts = cfg.at("restarts").get<int>();
  if (cfg.contains("seed")) rcfg.seed = cfg.at("seed").get<std::uint64_t>();
  std::vector<Point> grid = grid_from_json(cfg, model.man, 9, 2.0);

  GridFunction gf = resolvent_on_grid(model, h, grid, rcfg);
  json result{{"lambda", lambda}, {"grid_size", grid.size()}};
  result["value_at_x0"] = resolvent(model, h, x0, rcfg).value;
  if (model.man.kind == ManifoldKind::Euclidean && model.man.dim == 1) {
    ViscosityResidual vr = viscosity_residual(model, gf, lambda, h);
    result["viscosity_max_residual"] = vr.max_residual;
  } else {
    result["viscosity_max_residual"] = nullptr;
  }
  CsvBuilder csv("resolvent_check");
  std::string cols;
  for (int k = 0; k < model.man.ambient_dim(); ++k) cols += "coord" + std::to_string(k) + ",";
  csv.header(cols + "value");
  for (size_t j = 0; j < gf.nodes.size(); ++j) {
    std::vector<double> row(gf.nodes[j].x.data(), gf.nodes[j].x.data() + gf.nodes[j].x.size());
    row.push_back(gf.values[static_cast<long>(j)]);
    csv.row(row);
  }
  return {result.dump(2), csv.str(), "resolvent_check"};
}

ExperimentOutput run_rate_curve(const json& cfg) {
  Model model = model_from_json(cfg);
  std::string path = as_string(cfg, "curve_file");
  std::ifstream is(path);
  if (!is) throw ConfigParseError("cannot open curve file '" + path + "'", 0, 0);
  Curve curve = read_curve_jsonl(is, model.man);
  InitialCost I0 = zero_initial();
  if (cfg.value("initial", "zero") == std::string("dirac")) {
    Point x0 = cfg.contains("x0") ? point_from_json(model.man, cfg.at("x0"), "x0")
                                  : curve.points.front();
    I0 = dirac_initial(x0);
  }
  ActionValue av = action(model, curve, I0);
  json jseg = json::array();
  CsvBuilder csv("rate_curve");
  csv.header("k,t,segment_cost");
  for (size_t k = 0; k < av.per_segment.size(); ++k) {
    jseg.push_back(av.per_segment[k]);
    csv.row({static_cast<double>(k), curve.times[k == 0 ? 0 : k - 1], av.per_segment[k]});
  }
  json result{{"total", av.total}, {"per_segment", jseg}, {"converged", av.converged}};
  return {result.dump(2), csv.str(), "rate_curve"};
}

}  // namespace

namespace {

nlohmann::json parse_config_text(const std::string& config_text) {
  try {
    return nlohmann::json::parse(config_text);
  } catch (const nlohmann::json::parse_error& e) {
    // byte offset -> 1-based line/column
    size_t off = std::min(e.byte > 0 ? e.byte - 1 : 0, config_text.size());
    int line = 1, col = 1;
    for (size_t k = 0; k < off; ++k) {
      if (config_text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigParseError(e.what(), line, col);
  }
}

}  // namespace

std::string config_hash(const std::string& config_text) {
  return hash_hex(inputs_hash(parse_config_text(config_text).dump()));
}

ExperimentOutput run_experiment_json(const std::string& config_text) {
  json cfg = parse_config_text(config_text);
  if (!cfg.is_object()) schema_error("top level must be an object");
  std::string kind = as_string(cfg, "kind");

  auto started = std::chrono::steady_clock::now();
  ExperimentOutput out;
  if (kind == "rare_event") {
    out = run_rare_event(cfg);
  } else if (kind == "averaging") {
    out = run_averaging(cfg);
  } else if (kind == "operator_convergence") {
    out = run_operator_convergence(cfg);
  } else if (kind == "resolvent_check") {
    out = run_resolvent_check(cfg);
  } else if (kind == "rate_curve") {
    out = run_rate_curve(cfg);
  } else {
    schema_error("unknown experiment kind '" + kind + "'");
  }
  double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  json doc = json::parse(out.json);
  json wrapped{{"kind", out.kind},
               {"inputs_hash", hash_hex(inputs_hash(cfg.dump()))},
               {"results", doc},
               {"runtime_seconds", elapsed}};
  out.json = wrapped.dump(2) + "\n";
  return out;
}

ExperimentOutput run_experiment_file(const std::string& config_path) {
  std::ifstream is(config_path);
  if (!is) throw ConfigParseError("cannot open config file '" + config_path + "'", 0, 0);
  std::ostringstream ss;
  ss << is.rdbuf();
  return run_experiment_json(ss.str());
}

}  // namespace geoldp
