#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cbi2/error.hpp"
#include "cbi2/estimate.hpp"
#include "cbi2/experiments.hpp"
#include "cbi2/model.hpp"
#include "cbi2/simulate.hpp"

namespace py = pybind11;
using namespace cbi2;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Vec2 to_vec2(const std::array<double, 2>& a) { return {a[0], a[1]}; }
std::array<double, 2> from_vec2(const Vec2& v) { return {v.v1(), v.v2()}; }
std::array<std::array<double, 2>, 2> from_mat2(const Mat2& m) { return {{{m.m11(), m.m12()}, {m.m21(), m.m22()}}}; }

Array series_array(const ObservationSeries& s) {
  Array out({static_cast<py::ssize_t>(s.obs.size()), py::ssize_t{2}});
  auto view = out.mutable_unchecked<2>();
  for (std::size_t k = 0; k < s.obs.size(); ++k) {
    view(k, 0) = s.obs[k].v1();
    view(k, 1) = s.obs[k].v2();
  }
  return out;
}

ObservationSeries array_series(const Array& obs, double delta) {
  if (obs.ndim() != 2 || obs.shape(1) != 2) throw Error(ErrorKind::Config, "observations must have shape (n + 1, 2)");
  ObservationSeries s{delta, {}, std::nullopt};
  auto view = obs.unchecked<2>();
  for (py::ssize_t k = 0; k < obs.shape(0); ++k) s.obs.emplace_back(view(k, 0), view(k, 1));
  return s;
}

ModelParams params_from(const py::dict& d) {
  ModelParams p{1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0};
  auto theta = p.to_array();
  for (auto item : d) {
    const auto key = item.first.cast<std::string>();
    bool found = false;
    for (std::size_t i = 0; i < ModelParams::size; ++i) {
      if (key == ModelParams::names[i]) {
        theta[i] = item.second.cast<double>();
        found = true;
      }
    }
    if (!found) throw Error(ErrorKind::Config, "unknown model parameter '" + key + "'");
  }
  return ModelParams::from_array(theta);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Two-type CBI diffusion: moments, simulation and estimation";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init([](double a1, double a2, double b11, double b12, double b21, double b22, double sigma1,
                       double sigma2) { return ModelParams{a1, a2, b11, b12, b21, b22, sigma1, sigma2}; }),
           py::arg("a1") = 1.0, py::arg("a2") = 1.0, py::arg("b11") = 1.0, py::arg("b12") = 0.0,
           py::arg("b21") = 0.0, py::arg("b22") = 1.0, py::arg("sigma1") = 1.0, py::arg("sigma2") = 1.0)
      .def_readwrite("a1", &ModelParams::a1)
      .def_readwrite("a2", &ModelParams::a2)
      .def_readwrite("b11", &ModelParams::b11)
      .def_readwrite("b12", &ModelParams::b12)
      .def_readwrite("b21", &ModelParams::b21)
      .def_readwrite("b22", &ModelParams::b22)
      .def_readwrite("sigma1", &ModelParams::sigma1)
      .def_readwrite("sigma2", &ModelParams::sigma2)
      .def("validate", [](const ModelParams& p) { p.validate(); })
      .def_property_readonly("kappa", &ModelParams::kappa)
      .def_property_readonly("xi_min", &ModelParams::xi_min)
      .def("to_list", &ModelParams::to_array)
      .def("__repr__", [](const ModelParams& p) {
        std::string s = "ModelParams(";
        const auto t = p.to_array();
        for (std::size_t i = 0; i < t.size(); ++i) {
          s += std::string(i ? ", " : "") + std::string(ModelParams::names[i]) + "=" + py::repr(py::float_(t[i])).cast<std::string>();
        }
        return s + ")";
      });

  m.def("model_params", &params_from, py::arg("values"));

  m.def(
      "phi", [](const ModelParams& p, std::array<double, 2> l) { return from_vec2(phi(p, to_vec2(l))); },
      py::arg("params"), py::arg("lam"));
  m.def(
      "transition_laplace",
      [](const ModelParams& p, std::array<double, 2> x, std::array<double, 2> l, double t, double dt) {
        return transition_laplace(p, to_vec2(x), to_vec2(l), t, dt);
      },
      py::arg("params"), py::arg("x"), py::arg("lam"), py::arg("t"), py::arg("dt") = 1e-3);
  m.def(
      "stationary_laplace",
      [](const ModelParams& p, std::array<double, 2> l) { return stationary_laplace(p, to_vec2(l)); },
      py::arg("params"), py::arg("lam"));
  m.def(
      "conditional_mean",
      [](const ModelParams& p, std::array<double, 2> x, double t) {
        return from_vec2(conditional_mean(p, to_vec2(x), t));
      },
      py::arg("params"), py::arg("x"), py::arg("t"));
  m.def(
      "conditional_variance",
      [](const ModelParams& p, std::array<double, 2> x, double delta) {
        return from_mat2(conditional_variance(p, to_vec2(x), delta));
      },
      py::arg("params"), py::arg("x"), py::arg("delta"));
  m.def(
      "regression_coefficients",
      [](const ModelParams& p, double delta) {
        const Regression r = regression_coefficients(p, delta);
        return py::make_tuple(from_vec2(r.rho), from_mat2(r.gamma));
      },
      py::arg("params"), py::arg("delta"));

  m.def(
      "simulate",
      [](const ModelParams& p, std::size_t n_obs, std::uint64_t seed, const std::string& sampler, double delta,
         double euler_dt, std::array<double, 2> x0) {
        SimConfig cfg;
        cfg.params = p;
        cfg.n_obs = n_obs;
        cfg.seed = seed;
        cfg.delta = delta;
        cfg.euler_dt = euler_dt;
        cfg.x0 = to_vec2(x0);
        ObservationSeries s;
        {
          py::gil_scoped_release release;
          s = simulate(cfg, parse_sampler(sampler));
        }
        return series_array(s);
      },
      py::arg("params"), py::arg("n_obs"), py::arg("seed") = 1, py::arg("sampler") = "euler",
      py::arg("delta") = 1.0, py::arg("euler_dt") = 1e-3, py::arg("x0") = std::array<double, 2>{1.0, 1.0},
      "Observations X_0..X_n as an (n + 1, 2) array.");

  m.def(
      "estimate",
      [](const Array& obs, double delta, const std::string& weight, bool covariance,
         const std::string& rho_normalization) {
        const ObservationSeries s = array_series(obs, delta);
        const WeightFn g = parse_weight(weight);
        EstimateReport rep;
        {
          py::gil_scoped_release release;
          rep = estimate_all(s, g, {parse_rho_normalization(rho_normalization), covariance});
        }
        py::dict out;
        for (const auto& [k, v] : rep.fields()) out[py::str(k)] = v;
        return out;
      },
      py::arg("obs"), py::arg("delta") = 1.0, py::arg("weight") = "constant", py::arg("covariance") = true,
      py::arg("rho_normalization") = "divide", "Estimator report fields by name; missing values are NaN.");

  m.def(
      "run_experiment",
      [](const std::map<std::string, std::string>& settings, unsigned jobs) {
        const ExperimentConfig cfg = config_from_map(settings);
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg, jobs);
        }
        return r.files;
      },
      py::arg("settings"), py::arg("jobs") = 0, "Runs an experiment; returns the written artifact paths.");
}
