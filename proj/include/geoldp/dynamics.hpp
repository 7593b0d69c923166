#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "geoldp/model.hpp"
#include "geoldp/rng.hpp"
#include "geoldp/scalar_field.hpp"

namespace geoldp {

/**
 * Slow-fast simulation parameters.  The switching process jumps with rates
 * n * q_ij(x); the contract dt <= 1 / (4 n max_rate) keeps the frozen-rate
 * splitting error first order.  Violations throw ContractViolationError.
 */
struct SimConfig {
  long n = 1;
  double T = 1.0;
  double dt = 0.0;  // <= 1/(4 n max_rate); pick with max_dt() when in doubt
  std::uint64_t seed = 0;

  static double max_dt(long n, double max_total_rate) {
    if (max_total_rate <= 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / (4.0 * static_cast<double>(n) * max_total_rate);
  }
};

struct SwitchEvent {
  double t;
  int to_state;
};

struct PathSample {
  std::vector<double> times;  // strictly increasing, from 0 to T
  std::vector<Point> points;
  std::vector<int> states;
  std::vector<SwitchEvent> switch_events;
  std::uint64_t seed = 0;
};

// One exponential-clock switching window of length dt, rates frozen at x.
// Returns the state at the end of the window; appends events when non-null.
int step_switch(const Model& model, const Point& x, int state, double t0, double dt, long n,
                SplitMix64& rng, std::vector<SwitchEvent>* events);

// One geodesic Euler-Maruyama step: exp_x(b(x,i) dt + sqrt(dt/n) xi).
Point step_diffusion(const Model& model, const Point& x, int state, double dt, long n,
                     SplitMix64& rng);

// Switch-then-diffuse splitting on a uniform grid (final step may be short).
// Bit-identical for identical (config, x0, state0).
PathSample simulate(const Model& model, const SimConfig& cfg, const Point& x0, int state0);

// Endpoint only; same stream layout as simulate() (shared kernel).
Point simulate_endpoint(const Model& model, const SimConfig& cfg, const Point& x0, int state0,
                        SplitMix64& rng, int* final_state = nullptr);

/**
 * Averaged flow xbar' = bbar(xbar) by RK4 in normal charts, re-centering
 * whenever the state passes half the chart radius.  Output on the same
 * uniform grid as simulate() for pathwise comparisons.
 */
struct AveragedPath {
  std::vector<double> times;
  std::vector<Point> points;
};
AveragedPath simulate_averaged(const Model& model, const Point& x0, double T, double dt);

/**
 * Nonlinear prelimit generator applied to f_n = f + phi_i / n:
 *
 *   H_n f_n (x,i) = <b(x,i), df_n> + |df_n|^2/2 + (1/2n) Lap f_n
 *                   + sum_j q_ij(x) [ e^{phi_j(x) - phi_i(x)} - 1 ]
 *
 * and its limit (drop the Laplacian term and the 1/n differentials).
 * phi is one scalar field per switching state.  limit_generator uses phi
 * values only, so phi may be defined pointwise (e.g. a log-eigenvector).
 */
double prelimit_generator(const Model& model, const ScalarField& f,
                          const std::vector<ScalarField>& phi, long n, const Point& x, int i);
double limit_generator(const Model& model, const ScalarField& f,
                       const std::vector<ScalarField>& phi, const Point& x, int i);

// JSONL: one record {"t": ..., "coords": [...], "switch": k} per sample
// point.  Binary: little-endian records (f64 t, f64 x d coords, u32 switch).
void write_path_jsonl(std::ostream& os, const PathSample& path);
void write_path_binary(std::ostream& os, const PathSample& path);
PathSample read_path_jsonl(std::istream& is, const Manifold& man);
PathSample read_path_binary(std::istream& is, const Manifold& man);

}  // namespace geoldp
