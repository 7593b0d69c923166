#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "geoldp/dynamics.hpp"
#include "geoldp/errors.hpp"
#include "geoldp/hamiltonian.hpp"
#include "geoldp/lab.hpp"
#include "geoldp/manifold.hpp"
#include "geoldp/model.hpp"
#include "geoldp/switching.hpp"
#include "geoldp/variational.hpp"

namespace py = pybind11;

namespace {

geoldp::Point point_at(const geoldp::Model& model, const Eigen::VectorXd& coords) {
  return geoldp::Point(model.man, coords);
}

geoldp::Curve curve_from_rows(const geoldp::Model& model, const std::vector<double>& times,
                              const std::vector<Eigen::VectorXd>& rows) {
  geoldp::Curve c;
  c.man = model.man;
  c.times = times;
  c.points.reserve(rows.size());
  for (const auto& r : rows) c.points.emplace_back(model.man, r);
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "slow-fast switching diffusions: Hamiltonians, rate functionals, experiments";
  m.attr("__version__") = "0.1.0";

  // Translators run newest-first, so the base class goes in first.
  py::register_exception<geoldp::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<geoldp::ConfigParseError>(m, "ConfigParseError", PyExc_ValueError);
  py::register_exception<geoldp::NumericalFailureError>(m, "NumericalFailureError",
                                                        PyExc_RuntimeError);

  // ---- geometry ----
  m.def(
      "exp_map",
      [](const std::string& manifold, const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
        auto man = geoldp::Manifold::parse(manifold);
        geoldp::Point base(man, x);
        return geoldp::exp_map(base, geoldp::TangentVector(base, v)).x;
      },
      py::arg("manifold"), py::arg("x"), py::arg("v"),
      "Geodesic exponential; returns the coordinates of exp_x(v).");

  m.def(
      "log_map",
      [](const std::string& manifold, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
        auto man = geoldp::Manifold::parse(manifold);
        return geoldp::log_map(geoldp::Point(man, x), geoldp::Point(man, y)).comps;
      },
      py::arg("manifold"), py::arg("x"), py::arg("y"),
      "Frame components of the inverse exponential at x.");

  m.def(
      "distance",
      [](const std::string& manifold, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
        auto man = geoldp::Manifold::parse(manifold);
        return geoldp::distance(geoldp::Point(man, x), geoldp::Point(man, y));
      },
      py::arg("manifold"), py::arg("x"), py::arg("y"));

  // ---- model ----
  py::class_<geoldp::Model>(m, "Model")
      .def_property_readonly("n_states", &geoldp::Model::n_states)
      .def_property_readonly("manifold",
                             [](const geoldp::Model& mo) { return mo.man.id(); })
      .def("spatially_homogeneous", &geoldp::Model::spatially_homogeneous)
      .def(
          "rate_matrix",
          [](const geoldp::Model& mo, const Eigen::VectorXd& x) {
            return mo.rates(point_at(mo, x));
          },
          py::arg("x"))
      .def(
          "drift",
          [](const geoldp::Model& mo, const Eigen::VectorXd& x, int state) {
            return mo.drift(point_at(mo, x), state);
          },
          py::arg("x"), py::arg("state"))
      .def(
          "averaged_drift",
          [](const geoldp::Model& mo, const Eigen::VectorXd& x) {
            return geoldp::averaged_drift(mo.drift, mo.rates, point_at(mo, x)).comps;
          },
          py::arg("x"))
      .def(
          "hamiltonian",
          [](const geoldp::Model& mo, const Eigen::VectorXd& x, const Eigen::VectorXd& p) {
            auto base = point_at(mo, x);
            return geoldp::hamiltonian(mo, base, geoldp::CotangentVector(base, p));
          },
          py::arg("x"), py::arg("p"))
      .def(
          "grad_p_hamiltonian",
          [](const geoldp::Model& mo, const Eigen::VectorXd& x, const Eigen::VectorXd& p) {
            auto base = point_at(mo, x);
            return geoldp::grad_p_hamiltonian(mo, base, geoldp::CotangentVector(base, p)).comps;
          },
          py::arg("x"), py::arg("p"))
      .def(
          "legendre",
          [](const geoldp::Model& mo, const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
            auto base = point_at(mo, x);
            auto r = geoldp::legendre(mo, base, geoldp::TangentVector(base, v));
            py::dict out;
            out["value"] = r.value;
            out["p_star"] = r.p_star.comps;
            out["converged"] = r.converged;
            out["iterations"] = r.iterations;
            return out;
          },
          py::arg("x"), py::arg("v"));

  m.def(
      "model",
      [](const std::string& manifold, const std::string& rates, const std::string& drift) {
        return geoldp::parse_model(geoldp::Manifold::parse(manifold), rates, drift);
      },
      py::arg("manifold") = "euclidean:1", py::arg("rates") = "single", py::arg("drift") = "",
      "Build a model from family strings, e.g. model('euclidean:1', 'twostate{a=1}', "
      "'pm{beta=1}').");

  // ---- switching ----
  m.def("invariant_measure", &geoldp::invariant_measure, py::arg("q"));
  m.def(
      "donsker_varadhan",
      [](const Eigen::MatrixXd& q, const Eigen::VectorXd& pi) {
        auto r = geoldp::donsker_varadhan(q, pi);
        py::dict out;
        out["value"] = r.value;
        out["log_g"] = r.log_g;
        out["iterations"] = r.iterations;
        return out;
      },
      py::arg("q"), py::arg("pi"));

  // ---- simulation ----
  m.def(
      "simulate",
      [](const geoldp::Model& mo, long n, double T, double dt, std::uint64_t seed,
         const Eigen::VectorXd& x0, int state0) {
        geoldp::SimConfig cfg;
        cfg.n = n;
        cfg.T = T;
        cfg.dt = dt > 0.0 ? dt
                          : std::min(geoldp::SimConfig::max_dt(n, mo.rates.max_total_rate),
                                     T / 64.0);
        cfg.seed = seed;
        auto path = geoldp::simulate(mo, cfg, point_at(mo, x0), state0);
        Eigen::MatrixXd coords(static_cast<long>(path.points.size()),
                               mo.man.ambient_dim());
        for (std::size_t k = 0; k < path.points.size(); ++k)
          coords.row(static_cast<long>(k)) = path.points[k].x.transpose();
        py::dict out;
        out["times"] = path.times;
        out["coords"] = coords;
        out["states"] = path.states;
        out["switch_count"] = path.switch_events.size();
        out["dt"] = cfg.dt;
        return out;
      },
      py::arg("model"), py::arg("n"), py::arg("T"), py::arg("dt") = 0.0, py::arg("seed") = 0,
      py::arg("x0"), py::arg("state0") = 0,
      "One trajectory on the uniform grid; dt <= 0 picks the largest admissible step.");

  // ---- variational ----
  m.def(
      "action",
      [](const geoldp::Model& mo, const std::vector<double>& times,
         const std::vector<Eigen::VectorXd>& points) {
        auto r = geoldp::action(mo, curve_from_rows(mo, times, points), geoldp::zero_initial());
        py::dict out;
        out["total"] = r.total;
        out["per_segment"] = r.per_segment;
        out["converged"] = r.converged;
        return out;
      },
      py::arg("model"), py::arg("times"), py::arg("points"),
      "Action integral of a sampled curve (zero initial cost).");

  m.def(
      "resolvent",
      [](const geoldp::Model& mo, const std::string& h, const Eigen::VectorXd& x, double lam,
         int segments, int restarts, std::uint64_t seed) {
        auto field = geoldp::parse_scalar_field(h, mo.man);
        geoldp::ResolventConfig cfg;
        cfg.lambda = lam;
        cfg.segments = segments;
        cfg.restarts = restarts;
        cfg.seed = seed;
        return geoldp::resolvent(mo, field, point_at(mo, x), cfg).value;
      },
      py::arg("model"), py::arg("h"), py::arg("x"), py::arg("lambda") = 1.0,
      py::arg("segments") = 48, py::arg("restarts") = 8, py::arg("seed") = 0x5eed,
      py::call_guard<py::gil_scoped_release>(),
      "Variational resolvent value R(lambda)h(x) for a builtin field string.");

  m.def(
      "theoretical_rate",
      [](const geoldp::Model& mo, const Eigen::VectorXd& x0, const Eigen::VectorXd& center,
         double rho, double T, bool outside) {
        geoldp::EventSpec ev;
        ev.center = point_at(mo, center);
        ev.rho = rho;
        ev.T = T;
        ev.outside = outside;
        return geoldp::theoretical_rate(mo, point_at(mo, x0), ev);
      },
      py::arg("model"), py::arg("x0"), py::arg("center"), py::arg("rho") = 1.0,
      py::arg("T") = 1.0, py::arg("outside") = true,
      py::call_guard<py::gil_scoped_release>());

  // ---- experiments ----
  m.def(
      "run_experiment",
      [](const std::string& config_text) {
        auto out = geoldp::run_experiment_json(config_text);
        return py::make_tuple(out.json, out.csv, out.kind);
      },
      py::arg("config_text"),
      "Execute a JSON experiment config; returns (result_json, csv, kind).");

  m.def("config_hash", &geoldp::config_hash, py::arg("config_text"),
        "Hash of a config as result documents report it.");
}
