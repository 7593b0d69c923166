#include "geoldp/dynamics.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <json.hpp>
#include <ostream>

#include "geoldp/chart.hpp"
#include "geoldp/switching.hpp"

namespace geoldp {

namespace {

void check_dt(const Model& model, const SimConfig& cfg) {
  if (!(cfg.dt > 0.0) || !(cfg.T > 0.0) || cfg.n < 1) {
    throw ContractViolationError("simulate: need dt > 0, T > 0, n >= 1");
  }
  double cap = SimConfig::max_dt(cfg.n, model.rates.max_total_rate);
  if (cfg.dt > cap * (1.0 + 1e-12)) {
    throw ContractViolationError("simulate: dt = " + std::to_string(cfg.dt) +
                                 " exceeds 1/(4 n max_rate) = " + std::to_string(cap));
  }
}

}  // namespace

int step_switch(const Model& model, const Point& x, int state, double t0, double dt, long n,
                SplitMix64& rng, std::vector<SwitchEvent>* events) {
  Eigen::MatrixXd Q = model.rates(x);  // frozen at the window's start position
  double t_loc = 0.0;
  int i = state;
  const int m = model.n_states();
  while (true) {
    double qi = -Q(i, i);
    if (qi <= 0.0) break;
    double rate = static_cast<double>(n) * qi;
    t_loc += rng.exponential(rate);
    if (t_loc >= dt) break;
    double u = rng.uniform01() * qi;
    int j = 0;
    double acc = 0.0;
    for (int k = 0; k < m; ++k) {
      if (k == i) continue;
      acc += Q(i, k);
      j = k;
      if (u < acc) break;
    }
    i = j;
    if (events) events->push_back({t0 + t_loc, i});
  }
  return i;
}

Point step_diffusion(const Model& model, const Point& x, int state, double dt, long n,
                     SplitMix64& rng) {
  const int d = x.man.dim;
  Eigen::VectorXd delta = model.drift(x, state) * dt;
  double sigma = std::sqrt(dt / static_cast<double>(n));
  for (int k = 0; k < d; ++k) delta[k] += sigma * rng.normal();
  return exp_map(x, TangentVector(x, delta));
}

namespace {

long grid_step_count(double T, double dt) {
  return static_cast<long>(std::ceil(T / dt - 1e-9));
}

template <class Observer>
void run_path(const Model& model, const SimConfig& cfg, const Point& x0, int state0,
              SplitMix64& rng, std::vector<SwitchEvent>* events, Observer&& observe) {
  Point x = x0;
  int state = state0;
  observe(0.0, x, state);
  const long K = grid_step_count(cfg.T, cfg.dt);
  double t_prev = 0.0;
  for (long k = 1; k <= K; ++k) {
    double t = (k == K) ? cfg.T : static_cast<double>(k) * cfg.dt;
    double dt = t - t_prev;
    state = step_switch(model, x, state, t_prev, dt, cfg.n, rng, events);
    x = step_diffusion(model, x, state, dt, cfg.n, rng);
    observe(t, x, state);
    t_prev = t;
  }
}

}  // namespace

PathSample simulate(const Model& model, const SimConfig& cfg, const Point& x0, int state0) {
  check_dt(model, cfg);
  PathSample path;
  path.seed = cfg.seed;
  SplitMix64 rng(cfg.seed);
  run_path(model, cfg, x0, state0, rng, &path.switch_events,
           [&](double t, const Point& x, int s) {
             path.times.push_back(t);
             path.points.push_back(x);
             path.states.push_back(s);
           });
  return path;
}

Point simulate_endpoint(const Model& model, const SimConfig& cfg, const Point& x0, int state0,
                        SplitMix64& rng, int* final_state) {
  check_dt(model, cfg);
  Point last = x0;
  int ls = state0;
  run_path(model, cfg, x0, state0, rng, nullptr, [&](double, const Point& x, int s) {
    last = x;
    ls = s;
  });
  if (final_state) *final_state = ls;
  return last;
}

AveragedPath simulate_averaged(const Model& model, const Point& x0, double T, double dt) {
  if (!(dt > 0.0) || !(T > 0.0)) {
    throw ContractViolationError("simulate_averaged: need dt > 0, T > 0");
  }
  AveragedPath out;
  double inj = x0.man.injectivity_radius();
  double recenter_at = std::isfinite(inj) ? 0.5 * 0.95 * inj : std::numeric_limits<double>::infinity();

  Point center = x0;
  ChartPtr chart = normal_chart(center);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(x0.man.dim);
  auto vel = [&](const Eigen::VectorXd& uu) -> Eigen::VectorXd {
    Point y = chart->from_coords(uu);
    return chart->push_matrix(y) * averaged_drift(model.drift, model.rates, y).comps;
  };
  out.times.push_back(0.0);
  out.points.push_back(x0);
  const long K = grid_step_count(T, dt);
  double t_prev = 0.0;
  for (long k = 1; k <= K; ++k) {
    double t = (k == K) ? T : static_cast<double>(k) * dt;
    double h = t - t_prev;
    Eigen::VectorXd k1 = vel(u);
    Eigen::VectorXd k2 = vel(u + 0.5 * h * k1);
    Eigen::VectorXd k3 = vel(u + 0.5 * h * k2);
    Eigen::VectorXd k4 = vel(u + h * k3);
    u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (u.norm() > recenter_at) {
      center = chart->from_coords(u);
      chart = normal_chart(center);
      u.setZero();
    }
    out.times.push_back(t);
    out.points.push_back(chart->from_coords(u));
    t_prev = t;
  }
  return out;
}

double limit_generator(const Model& model, const ScalarField& f,
                       const std::vector<ScalarField>& phi, const Point& x, int i) {
  if (static_cast<int>(phi.size()) != model.n_states()) {
    throw ContractViolationError("limit_generator: phi needs one field per state");
  }
  CotangentVector df = differential(f, x);
  Eigen::MatrixXd Q = model.rates(x);
  double sw = 0.0;
  double phi_i = phi[i].value(x);
  for (int j = 0; j < model.n_states(); ++j) {
    if (j == i) continue;
    sw += Q(i, j) * (std::exp(phi[j].value(x) - phi_i) - 1.0);
  }
  return model.drift(x, i).dot(df.comps) + 0.5 * df.comps.squaredNorm() + sw;
}

double prelimit_generator(const Model& model, const ScalarField& f,
                          const std::vector<ScalarField>& phi, long n, const Point& x, int i) {
  if (static_cast<int>(phi.size()) != model.n_states()) {
    throw ContractViolationError("prelimit_generator: phi needs one field per state");
  }
  if (n < 1) throw ContractViolationError("prelimit_generator: n >= 1");
  const double invn = 1.0 / static_cast<double>(n);
  CotangentVector df = differential(f, x);
  CotangentVector dphi = differential(phi[i], x);
  Eigen::VectorXd dfn = df.comps + invn * dphi.comps;
  double lap = laplace_beltrami(f, x) + invn * laplace_beltrami(phi[i], x);
  Eigen::MatrixXd Q = model.rates(x);
  double sw = 0.0;
  double phi_i = phi[i].value(x);
  for (int j = 0; j < model.n_states(); ++j) {
    if (j == i) continue;
    sw += Q(i, j) * (std::exp(phi[j].value(x) - phi_i) - 1.0);
  }
  return model.drift(x, i).dot(dfn) + 0.5 * dfn.squaredNorm() + 0.5 * invn * lap + sw;
}

namespace {

using nlohmann::json;

json point_record(double t, const Point& p, int s) {
  json rec;
  rec["t"] = t;
  rec["coords"] = std::vector<double>(p.x.data(), p.x.data() + p.x.size());
  rec["switch"] = s;
  return rec;
}

}  // namespace

void write_path_jsonl(std::ostream& os, const PathSample& path) {
  for (size_t k = 0; k < path.times.size(); ++k) {
    os << point_record(path.times[k], path.points[k], path.states[k]).dump() << '\n';
  }
}

static_assert(std::endian::native == std::endian::little,
              "binary path layout is little-endian");

void write_path_binary(std::ostream& os, const PathSample& path) {
  for (size_t k = 0; k < path.times.size(); ++k) {
    double t = path.times[k];
    os.write(reinterpret_cast<const char*>(&t), sizeof(double));
    const Eigen::VectorXd& c = path.points[k].x;
    os.write(reinterpret_cast<const char*>(c.data()),
             static_cast<std::streamsize>(sizeof(double) * c.size()));
    std::uint32_t s = static_cast<std::uint32_t>(path.states[k]);
    os.write(reinterpret_cast<const char*>(&s), sizeof(std::uint32_t));
  }
}

PathSample read_path_jsonl(std::istream& is, const Manifold& man) {
  PathSample path;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    std::vector<double> c = rec.at("coords").get<std::vector<double>>();
    path.times.push_back(rec.at("t").get<double>());
    path.points.emplace_back(man, Eigen::Map<const Eigen::VectorXd>(c.data(), c.size()));
    path.states.push_back(rec.value("switch", 0));
  }
  return path;
}

PathSample read_path_binary(std::istream& is, const Manifold& man) {
  PathSample path;
  const int d = man.ambient_dim();
  const size_t rec_size = sizeof(double) * (1 + d) + sizeof(std::uint32_t);
  std::vector<char> buf(rec_size);
  while (is.read(buf.data(), static_cast<std::streamsize>(rec_size))) {
    double t;
    std::memcpy(&t, buf.data(), sizeof(double));
    Eigen::VectorXd c(d);
    std::memcpy(c.data(), buf.data() + sizeof(double), sizeof(double) * d);
    std::uint32_t s;
    std::memcpy(&s, buf.data() + sizeof(double) * (1 + d), sizeof(std::uint32_t));
    path.times.push_back(t);
    path.points.emplace_back(man, c);
    path.states.push_back(static_cast<int>(s));
  }
  return path;
}

}  // namespace geoldp
