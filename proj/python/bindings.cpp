#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dctmpc/pvtol.hpp"

namespace py = pybind11;
using namespace dctmpc;

namespace {

// JSON crosses the boundary as text; the Python side wraps it with json.loads.
std::string dumps(const json& j) { return j.dump(); }
json loads(const std::string& s) { return json::parse(s); }

}  // namespace

PYBIND11_MODULE(_dctmpc, m) {
  m.doc() = "DC tube MPC core";

  py::register_exception<Error>(m, "Error");
  py::register_exception<SetupError>(m, "SetupError");
  py::register_exception<InitializationError>(m, "InitializationError");
  py::register_exception<RestorationError>(m, "RestorationError");
  py::register_exception<SolverError>(m, "SolverError");
  py::register_exception<TerminalDesignError>(m, "TerminalDesignError");
  py::register_exception<LdiError>(m, "LdiError");
  py::register_exception<ArgumentError>(m, "ArgumentError");
  py::register_exception<DataError>(m, "DataError");

  m.def("pvtol_step", [](const Vec& x, const Vec& u, double delta, const Vec& w, bool rk4) {
    return pvtol_step(x, u, delta, w, rk4 ? Integrator::Rk4 : Integrator::Euler);
  }, py::arg("x"), py::arg("u"), py::arg("delta") = 0.5, py::arg("w") = Vec(), py::arg("rk4") = false);
  m.def("pvtol_accelerations", &pvtol_accelerations, py::arg("alpha_u1"));

  py::class_<DcModel>(m, "DcModel")
      .def_property_readonly("n_x", &DcModel::n_x)
      .def_property_readonly("n_u", &DcModel::n_u)
      .def_property_readonly("kind", [](const DcModel& d) { return std::string(kind_name(d.function().kind())); })
      .def("f", &DcModel::eval_f, py::arg("x"), py::arg("u"))
      .def("g", &DcModel::eval_g, py::arg("x"), py::arg("u"))
      .def("h", &DcModel::eval_h, py::arg("x"), py::arg("u"))
      .def("jacobian_h", &DcModel::jacobian_h, py::arg("x"), py::arg("u"))
      .def("to_json", [](const DcModel& d) { return dumps(to_json(d)); });
  m.def("load_model", [](const std::string& path) { return load_model(path); }, py::arg("path"));
  m.def("save_model", [](const std::string& path, const DcModel& d) { save_model(path, d); });

  m.def("fit_pvtol", [](const std::string& kind, int samples, int degree, unsigned long long seed) {
    FitConfig c;
    c.kind = kind_from_name(kind);
    c.samples = samples;
    c.degree = degree;
    c.seed = seed;
    FitOutcome fo = fit_pvtol(c);
    return py::make_tuple(pvtol_model(fo.fn, 0.5), dumps(to_json(fo.report)));
  }, py::arg("kind") = "poly", py::arg("samples") = 20000, py::arg("degree") = 6, py::arg("seed") = 1);

  m.def("pvtol_terminal", [](const DcModel& d, double alpha) {
    return dumps(to_json(pvtol_terminal(d, PvtolSetup::defaults(), alpha)));
  }, py::arg("model"), py::arg("alpha") = 1.0);

  m.def("run_experiment", [](const std::string& cfg, const DcModel* d) {
    return dumps(run_experiment(experiment_from_json(loads(cfg)), d).summary);
  }, py::arg("config"), py::arg("model") = nullptr);

  m.def("dp_gains", py::overload_cast<const std::vector<Mat>&, const std::vector<Mat>&, const Mat&, const Mat&,
                                      const Mat&>(&dp_gains),
        py::arg("A"), py::arg("B"), py::arg("Q"), py::arg("R"), py::arg("P_N"));
  m.def("box_vertices", &box_vertices, py::arg("lo"), py::arg("hi"));
  m.def("spearman", &spearman);
}
