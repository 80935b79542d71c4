#include "maggeo/cli.hpp"
#include "maggeo/dynamics.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace maggeo;

namespace {

std::string dump(const Json& j) { return j.dump(); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Closed magnetic geodesics on circle bundles";

  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<GeometryError>(m, "GeometryError", PyExc_RuntimeError);

  py::class_<BundleModel, std::shared_ptr<BundleModel>>(m, "Bundle")
      .def_property_readonly("name", &BundleModel::name)
      .def_property_readonly("ambient_dim", &BundleModel::ambient_dim)
      .def("project", &BundleModel::project)
      .def("normalize", &BundleModel::normalize);

  m.def(
      "make_bundle",
      [](const std::string& name, int n) {
        return std::const_pointer_cast<BundleModel>(make_bundle(name, n));
      },
      py::arg("name"), py::arg("n") = 1);

  py::class_<ExtendedLoop>(m, "ExtendedLoop")
      .def(py::init<>())
      .def_readwrite("samples", &ExtendedLoop::samples)
      .def_readwrite("T", &ExtendedLoop::T)
      .def_readwrite("phi", &ExtendedLoop::phi)
      .def_readwrite("k", &ExtendedLoop::k)
      .def_readwrite("winding", &ExtendedLoop::winding)
      .def_property_readonly("N", &ExtendedLoop::size);

  py::class_<CriticalResiduals>(m, "CriticalResiduals")
      .def_readonly("fiber_speed", &CriticalResiduals::fiber_speed)
      .def_readonly("energy_density", &CriticalResiduals::energy_density)
      .def_readonly("magnetic_ode", &CriticalResiduals::magnetic_ode)
      .def_readonly("base_energy", &CriticalResiduals::base_energy)
      .def("max", &CriticalResiduals::max);

  py::class_<CurvatureStats>(m, "CurvatureStats")
      .def_readonly("mean", &CurvatureStats::mean)
      .def_readonly("min", &CurvatureStats::min)
      .def_readonly("max", &CurvatureStats::max);

  m.def("action", [](const BundleModel& b, const ExtendedLoop& x) { return action_eval(b, x); });
  m.def("action_differential", [](const BundleModel& b, const ExtendedLoop& x) {
    const LoopCotangent d = action_differential(b, x);
    return py::make_tuple(d.loop, d.dT, d.dphi);
  });
  m.def("critical_residuals", &critical_residuals);
  m.def("loop_geodesic_curvature", &loop_geodesic_curvature);
  m.def("fiberwise_rotation", &fiberwise_rotation, py::arg("bundle"), py::arg("q0"), py::arg("a"),
        py::arg("T"), py::arg("k"), py::arg("n"));
  m.def("heisenberg_act", &heisenberg_act, py::arg("bundle"), py::arg("x"), py::arg("r"),
        py::arg("s"), py::arg("u"));
  m.def(
      "lifted_orbit",
      [](const BundleModel& b, const Vec& q0, const Vec& v0, double period, int n) {
        return loop_from_orbit(lift_orbit(b, q0, v0, period, n));
      },
      py::arg("bundle"), py::arg("q0"), py::arg("v0"), py::arg("period"), py::arg("n"));
  m.def("set_stencil_order", &set_stencil_order);
  m.def("stencil_order", &stencil_order);

  py::class_<FlowConfig>(m, "FlowConfig")
      .def(py::init<>())
      .def_readwrite("delta", &FlowConfig::delta)
      .def_readwrite("epsilon", &FlowConfig::epsilon)
      .def_readwrite("T0", &FlowConfig::T0)
      .def_readwrite("step", &FlowConfig::step)
      .def_readwrite("grad_tol", &FlowConfig::grad_tol)
      .def_readwrite("max_steps", &FlowConfig::max_steps)
      .def_readwrite("T_min", &FlowConfig::T_min)
      .def_readwrite("parameter_weight", &FlowConfig::parameter_weight);

  m.def(
      "descend",
      [](const BundleModel& b, const ExtendedLoop& x0, const FlowConfig& cfg, bool polish) {
        const DescendResult r =
            descend(b, x0, cfg, polish ? std::optional<PolishConfig>(PolishConfig{}) : std::nullopt);
        py::dict d;
        d["status"] = to_string(r.status);
        d["steps"] = r.flow.steps;
        d["truncation_index"] = r.flow.truncation_index;
        d["action_trace"] = r.flow.action_trace;
        d["candidate"] = r.candidate;
        d["residuals"] = r.residuals;
        return d;
      },
      py::arg("bundle"), py::arg("x0"), py::arg("cfg") = FlowConfig{}, py::arg("polish") = true);

  m.def(
      "evolve",
      [](const BundleModel& b, const ExtendedLoop& x0, const FlowConfig& cfg) {
        const FlowOutcome o = evolve(b, x0, cfg);
        py::dict d;
        d["status"] = to_string(o.status);
        d["steps"] = o.steps;
        d["truncation_index"] = o.truncation_index;
        d["action_trace"] = o.action_trace;
        return d;
      },
      py::arg("bundle"), py::arg("x0"), py::arg("cfg") = FlowConfig{});

  m.def(
      "minimax_sweep",
      [](const std::vector<double>& k_grid, int m_nodes, int n) {
        const HopfSphereBundle hopf;
        return dump(to_json(struwe_sweep(hopf, k_grid, m_nodes, n, MinimaxConfig{})));
      },
      py::arg("k_grid"), py::arg("m") = 16, py::arg("n") = 64,
      "Struwe sweep on the Hopf bundle; returns the JSON summary as a string.");

  m.def(
      "torus_contact_scan",
      [](double k, int samples, std::uint64_t seed, int n) {
        return dump(to_json(torus_contact_scan(k, samples, seed, n)));
      },
      py::arg("k"), py::arg("samples") = 100, py::arg("seed") = 7, py::arg("n") = 1);
  m.def(
      "su2_scan",
      [](double kbar, int samples, std::uint64_t seed) {
        return dump(to_json(su2_scan(kbar, samples, seed)));
      },
      py::arg("kbar"), py::arg("samples") = 100, py::arg("seed") = 7);

  m.def("loop_snapshot",
        [](const BundleModel& b, const ExtendedLoop& x) { return dump(loop_snapshot(b, x)); });
  m.def("parse_loop_snapshot", [](const std::string& text) {
    const LoopSnapshot s = parse_loop_snapshot(Json::parse(text));
    return py::make_tuple(s.model, s.flux, s.loop);
  });

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "magflow");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        std::ostringstream out, err;
        const int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line driver in-process: (exit code, stdout, stderr).");
}
