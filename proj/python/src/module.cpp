#include "fvlab/coalescent.hpp"
#include "fvlab/harness.hpp"
#include "fvlab/mechanisms.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace fvlab;

namespace {

ExperimentConfig config_from(const std::string& command, const std::string& file_json,
                             const std::string& flags_json) {
  return resolve_config(command, nlohmann::json::parse(file_json), nlohmann::json::parse(flags_json));
}

}  // namespace

PYBIND11_MODULE(_fvlab, m) {
  m.doc() = "Native core of fvlab.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<Mechanism>(m, "Mechanism")
      .def_static("feller", &Mechanism::feller, py::arg("sigma2"), py::arg("beta"))
      .def_static("stable", &Mechanism::stable, py::arg("alpha"), py::arg("c"), py::arg("cprime"))
      .def_property_readonly("is_feller", &Mechanism::is_feller)
      .def_property_readonly("clock_exponent", &Mechanism::clock_exponent)
      .def("__repr__", &Mechanism::describe);

  m.def("psi", &psi, py::arg("mech"), py::arg("q"), "Branching exponent Psi(q).");
  m.def("phi", &phi, py::arg("mech"), py::arg("q"), "Immigration exponent Phi(q).");
  m.def("cbi_laplace", &cbi_laplace, py::arg("mech"), py::arg("x"), py::arg("t"), py::arg("q"),
        "E_x[exp(-q Y_t)].");

  m.def(
      "rates",
      [](const Mechanism& mech, int n_max) {
        const RateTable t = rates(theorem1_correspondence(mech), n_max);
        py::dict out;
        py::list lam, r;
        for (int n = 1; n <= n_max; ++n) {
          py::list ln, rn;
          for (int k = 1; k <= n; ++k) {
            ln.append(k >= 2 ? t.lambda(n, k) : 0.0);
            rn.append(t.r(n, k));
          }
          lam.append(ln);
          r.append(rn);
        }
        out["lambda"] = lam;
        out["r"] = r;
        return out;
      },
      py::arg("mech"), py::arg("n_max"),
      "Rates of the coalescent paired with mech; row n-1 holds k = 1..n (lambda(n, 1) is 0).");

  m.def("command_names", &command_names);

  m.def(
      "run_command",
      [](const std::string& command, const std::string& file_json, const std::string& flags_json) {
        const ExperimentConfig cfg = config_from(command, file_json, flags_json);
        CommandOutput out;
        {
          py::gil_scoped_release release;
          out = run_command(command, cfg);
        }
        return py::make_tuple(out.files, out.exit_code);
      },
      py::arg("command"), py::arg("file_json"), py::arg("flags_json"),
      "Runs a command; returns (files, exit_code).");
}
