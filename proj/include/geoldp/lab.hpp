#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geoldp/dynamics.hpp"
#include "geoldp/variational.hpp"

namespace geoldp {

// Thread budget: GEOLDP_THREADS caps parallelism (default: hardware).
int thread_budget();

struct WilsonInterval {
  double p_hat;
  double lo, hi;  // 95% score interval; always contains p_hat
};
WilsonInterval wilson_interval(long hits, long trials);

// Endpoint event at horizon T: d(X_n(T), center) inside/outside radius rho.
struct EventSpec {
  Point center;
  double rho = 1.0;
  double T = 1.0;
  bool outside = true;
};

struct RareEventRecord {
  long n = 0;
  long hits = 0;
  long samples = 0;
  WilsonInterval interval{0.0, 0.0, 0.0};
  bool zero_hits = false;  // upper-bound-only entry, excluded from rate fits
};

/**
 * Plain Monte Carlo estimate of P(event) for each n.  Sample j uses the
 * substream seeded with (seed ^ j), so results are independent of the thread
 * count and bit-identical across reruns.
 */
std::vector<RareEventRecord> estimate_rare_event(const Model& model, const Point& x0, int state0,
                                                 const EventSpec& event,
                                                 const std::vector<long>& n_list, long samples,
                                                 std::uint64_t seed);

struct RateFit {
  double slope = 0.0;      // fitted exponential rate
  double intercept = 0.0;  // absorbs subexponential prefactors
  double slope_stderr = 0.0;
  int points_used = 0;
};

// Least squares of -log p_hat against n over records with hits > 0.
// Throws InsufficientDataError when fewer than 3 points are usable.
RateFit extract_rate(const std::vector<RareEventRecord>& records);

/**
 * Large-deviation prediction inf { action : gamma(0) = x0, gamma(T) in event }.
 * Zero when the averaged path already realizes the event.  For one switching
 * state with zero drift this is the closed form d^2-cost rho^2 / (2T); in
 * general the event boundary is sampled and each endpoint cost is solved by
 * shooting on the Hamiltonian flow (multi-start over initial momenta).
 */
double theoretical_rate(const Model& model, const Point& x0, const EventSpec& event);

struct AveragingRecord {
  long n = 0;
  double median_sup_dev = 0.0;
  double p90_sup_dev = 0.0;
};

// Pathwise sup_t d(X_n(t), xbar(t)) statistics across samples, per n.
std::vector<AveragingRecord> averaging_study(const Model& model, const Point& x0, int state0,
                                             double T, const std::vector<long>& n_list,
                                             long samples, std::uint64_t seed);

struct OperatorConvergenceRecord {
  long n = 0;
  double sup_error = 0.0;
};
struct OperatorConvergenceResult {
  std::vector<OperatorConvergenceRecord> records;
  double slope = 0.0;  // log-log fit; first-order convergence gives -1
};
OperatorConvergenceResult operator_convergence_study(const Model& model, const ScalarField& f,
                                                     const std::vector<ScalarField>& phi,
                                                     const std::vector<Point>& x_grid,
                                                     const std::vector<long>& n_list);

/**
 * Experiment driver.  Configs are JSON (schema documented in the README);
 * malformed files throw ConfigParseError with 1-based line/column, which the
 * CLI maps to exit code 2.  Numerical failures surface the failing stage and
 * map to exit code 3.  Result JSON carries an inputs hash, per-quantity
 * values and diagnostics; CSV tables start with a versioned header comment.
 */
struct ExperimentOutput {
  std::string json;              // result document
  std::string csv;               // flat table, "# geoldp-csv 1 <kind>" header
  std::string kind;
};

ExperimentOutput run_experiment_json(const std::string& config_text);
ExperimentOutput run_experiment_file(const std::string& config_path);

// Builtin scalar fields for CLI/resolvent configs:
//   "zero", "const{c=..}", "neg_dist_sq{center=[..], scale=..}",
//   "cos1{amp=..,freq=..}" (first coordinate), "height{amp=..}" (sphere2 z).
ScalarField parse_scalar_field(const std::string& s, const Manifold& man);

// FNV-1a of the canonicalized config text (whitespace stripped).
std::uint64_t inputs_hash(const std::string& canonical_text);

// The hash exactly as result documents report it: the config is parsed,
// reserialized, hashed, and rendered as zero-padded hex.
std::string config_hash(const std::string& config_text);

}  // namespace geoldp
