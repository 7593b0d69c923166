#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "geoldp/dynamics.hpp"
#include "geoldp/hamiltonian.hpp"
#include "geoldp/lab.hpp"
#include "geoldp/variational.hpp"

namespace {

using geoldp::Manifold;
using geoldp::Model;
using geoldp::Point;
using nlohmann::json;

struct ModelFlags {
  std::string manifold = "euclidean:1";
  std::string rates = "single";
  std::string drift;  // empty: zero, or the twostate beta sugar

  void attach(CLI::App* cmd) {
    cmd->add_option("--manifold", manifold, "manifold id (euclidean:<d>, sphere2, torus2)");
    cmd->add_option("--rates", rates, "rate family, e.g. twostate{a=1}");
    cmd->add_option("--drift", drift, "drift family, e.g. pm{beta=1}");
  }
  Model build() const { return geoldp::parse_model(Manifold::parse(manifold), rates, drift); }
};

Point point_from(const Model& model, const std::vector<double>& coords, const char* flag) {
  if (static_cast<int>(coords.size()) != model.man.ambient_dim()) {
    throw geoldp::ContractViolationError(std::string(flag) + ": expected " +
                                         std::to_string(model.man.ambient_dim()) +
                                         " coordinates for " + model.man.id());
  }
  return Point(model.man, Eigen::Map<const Eigen::VectorXd>(coords.data(), coords.size()));
}

json vec_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw geoldp::ContractViolationError("cannot write to '" + path + "'");
  os << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ldp-lab: slow-fast switching diffusions, large-deviation tooling"};
  app.require_subcommand(1);

  // run <config>
  std::string config_path, out_prefix;
  CLI::App* run = app.add_subcommand("run", "execute an experiment config (JSON)");
  run->add_option("config", config_path, "config file path")->required();
  run->add_option("--out", out_prefix, "write <out>.json and <out>.csv instead of stdout");

  // hamiltonian eval --x ... --p ...
  CLI::App* ham = app.add_subcommand("hamiltonian", "Hamiltonian queries");
  CLI::App* ham_eval = ham->add_subcommand("eval", "evaluate H(x,p) and the PF vectors");
  ModelFlags ham_flags;
  ham_flags.attach(ham_eval);
  std::vector<double> ham_x, ham_p;
  ham_eval->add_option("--x", ham_x, "point coordinates")->required()->expected(-1);
  ham_eval->add_option("--p", ham_p, "momentum components (frame at x)")->required()->expected(-1);

  // rate --curve <file>
  CLI::App* rate = app.add_subcommand("rate", "action integral of a stored curve");
  ModelFlags rate_flags;
  rate_flags.attach(rate);
  std::string curve_path;
  std::vector<double> rate_x0;
  rate->add_option("--curve", curve_path, "curve JSONL file")->required();
  rate->add_option("--x0", rate_x0, "Dirac initial condition at these coordinates")->expected(-1);

  // resolvent --lambda ... --h <builtin>
  CLI::App* res = app.add_subcommand("resolvent", "variational resolvent R(lambda)h at a point");
  // The field option is spelled --h, so help must not claim the short -h here.
  res->set_help_flag("--help", "print this help message and exit");
  ModelFlags res_flags;
  res_flags.attach(res);
  double res_lambda = 1.0;
  std::string res_h = "zero";
  std::vector<double> res_x;
  int res_segments = 48, res_restarts = 8;
  std::uint64_t res_seed = 0x5eed;
  res->add_option("--lambda", res_lambda, "discount scale (> 0)")->required();
  res->add_option("--h", res_h, "builtin scalar field, e.g. neg_dist_sq{center=[0],scale=1}")
      ->required();
  res->add_option("--x", res_x, "evaluation point")->required()->expected(-1);
  res->add_option("--segments", res_segments, "transcription segments (32..128)");
  res->add_option("--restarts", res_restarts, "optimizer restarts");
  res->add_option("--seed", res_seed, "restart seed");

  // simulate --n ... --T ...
  CLI::App* sim = app.add_subcommand("simulate", "sample one slow-fast trajectory");
  ModelFlags sim_flags;
  sim_flags.attach(sim);
  long sim_n = 16;
  double sim_T = 1.0, sim_dt = 0.0;
  std::uint64_t sim_seed = 0;
  int sim_state0 = 0;
  std::vector<double> sim_x0;
  std::string sim_out;
  bool sim_binary = false;
  sim->add_option("--n", sim_n, "scale parameter n")->required();
  sim->add_option("--T", sim_T, "horizon")->required();
  sim->add_option("--dt", sim_dt, "step (default: switching-contract bound, at most T/64)");
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--x0", sim_x0, "start coordinates")->required()->expected(-1);
  sim->add_option("--state0", sim_state0, "start switching state");
  sim->add_option("--out", sim_out, "write the path to this file");
  sim->add_flag("--binary", sim_binary, "binary path format instead of JSONL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed()) {
      geoldp::ExperimentOutput out = geoldp::run_experiment_file(config_path);
      if (out_prefix.empty()) {
        std::cout << out.json;
      } else {
        write_text(out_prefix + ".json", out.json);
        write_text(out_prefix + ".csv", out.csv);
        std::cout << "wrote " << out_prefix << ".json and " << out_prefix << ".csv\n";
      }
    } else if (ham_eval->parsed()) {
      Model model = ham_flags.build();
      Point x = point_from(model, ham_x, "--x");
      if (static_cast<int>(ham_p.size()) != model.man.dim) {
        throw geoldp::ContractViolationError("--p: expected " + std::to_string(model.man.dim) +
                                             " frame components");
      }
      geoldp::CotangentVector p(x, Eigen::Map<const Eigen::VectorXd>(ham_p.data(), ham_p.size()));
      geoldp::EigenResult er = geoldp::hamiltonian_eigen(model, x, p);
      json doc{{"H", er.eigenvalue},
               {"right_vector", vec_json(er.right)},
               {"left_vector", vec_json(er.left)},
               {"iterations", er.iterations}};
      std::cout << doc.dump(2) << "\n";
    } else if (rate->parsed()) {
      Model model = rate_flags.build();
      std::ifstream is(curve_path);
      if (!is) throw geoldp::ConfigParseError("cannot open curve file '" + curve_path + "'", 0, 0);
      geoldp::Curve curve = geoldp::read_curve_jsonl(is, model.man);
      geoldp::InitialCost I0 = geoldp::zero_initial();
      if (!rate_x0.empty()) I0 = geoldp::dirac_initial(point_from(model, rate_x0, "--x0"));
      geoldp::ActionValue av = geoldp::action(model, curve, I0);
      json doc{{"total", av.total},
               {"per_segment", json(av.per_segment)},
               {"converged", av.converged}};
      std::cout << doc.dump(2) << "\n";
    } else if (res->parsed()) {
      Model model = res_flags.build();
      geoldp::ScalarField h = geoldp::parse_scalar_field(res_h, model.man);
      Point x = point_from(model, res_x, "--x");
      geoldp::ResolventConfig rcfg;
      rcfg.lambda = res_lambda;
      rcfg.segments = res_segments;
      rcfg.restarts = res_restarts;
      rcfg.seed = res_seed;
      geoldp::ResolventValue rv = geoldp::resolvent(model, h, x, rcfg);
      json doc{{"value", rv.value},
               {"best_restart", rv.best_restart},
               {"iterations", rv.iterations}};
      std::cout << doc.dump(2) << "\n";
    } else if (sim->parsed()) {
      Model model = sim_flags.build();
      Point x0 = point_from(model, sim_x0, "--x0");
      geoldp::SimConfig cfg;
      cfg.n = sim_n;
      cfg.T = sim_T;
      cfg.dt = sim_dt > 0.0
                   ? sim_dt
                   : std::min(geoldp::SimConfig::max_dt(sim_n, model.rates.max_total_rate),
                              sim_T / 64.0);
      cfg.seed = sim_seed;
      geoldp::PathSample path = geoldp::simulate(model, cfg, x0, sim_state0);
      if (!sim_out.empty()) {
        std::ofstream os(sim_out, std::ios::binary);
        if (!os) throw geoldp::ContractViolationError("cannot write to '" + sim_out + "'");
        if (sim_binary) {
          geoldp::write_path_binary(os, path);
        } else {
          geoldp::write_path_jsonl(os, path);
        }
      }
      json doc{{"steps", path.times.size() - 1},
               {"switch_count", path.switch_events.size()},
               {"endpoint", vec_json(path.points.back().x)},
               {"final_state", path.states.back()},
               {"dt", cfg.dt},
               {"seed", cfg.seed}};
      std::cout << doc.dump(2) << "\n";
    }
  } catch (const geoldp::ConfigParseError& e) {
    std::cerr << "parse error (line " << e.line() << ", column " << e.column() << "): " << e.what()
              << "\n";
    return 2;
  } catch (const geoldp::NumericalFailureError& e) {
    std::cerr << "numerical failure in stage '" << e.stage() << "': " << e.what() << "\n";
    return 3;
  } catch (const geoldp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
