#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

#include "wyflow/commands.hpp"
#include "wyflow/config.hpp"
#include "wyflow/flow.hpp"
#include "wyflow/spectral.hpp"

namespace py = pybind11;
using namespace wyflow;

namespace {

/// Python-side handle; the library shares geometries as pointers to const.
struct Grid {
  GeometryPtr g;
  const Geometry& operator*() const { return *g; }
  const Geometry* operator->() const { return g.get(); }
};

Field as_field(const GeometryPtr& g, const Eigen::ArrayXd& values) { return Field(g, values); }

Background background(const GeometryPtr& g, const std::optional<Eigen::ArrayXd>& phi0) {
  return phi0 ? make_background(g, as_field(g, *phi0)) : make_background(g);
}

py::dict exponents_dict(const Exponents& e) {
  py::dict d;
  d["total_dim"] = e.total_dim;
  d["metric"] = e.metric;
  d["conformal_law"] = e.conformal_law;
  d["volume"] = e.volume;
  d["weight"] = e.weight;
  d["laplacian_coefficient"] = e.laplacian_coefficient;
  d["coupling"] = e.coupling;
  d["flow_rate"] = e.flow_rate;
  d["curvature_p_small"] = e.curvature_p_small;
  return d;
}

py::dict run_flow(const Grid& grid, const Eigen::ArrayXd& w0, const std::optional<Eigen::ArrayXd>& phi0,
                  double t_end, double stop_tol, long stride) {
  const GeometryPtr& g = grid.g;
  const FlowEngine engine(background(g, phi0), FlowOptions{.diagnostics_stride = stride});
  CollectingSink sink;
  RunResult result = [&] {
    py::gil_scoped_release release;
    return engine.run(engine.initialize(as_field(g, w0)), t_end, stop_tol, sink);
  }();
  const auto n = static_cast<Eigen::Index>(sink.rows.size());
  Eigen::ArrayXd t(n), r(n), sup(n), min_R(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    t[i] = sink.rows[i].t;
    r[i] = sink.rows[i].r;
    sup[i] = sink.rows[i].sup_R_minus_r;
    min_R[i] = sink.rows[i].min_R;
  }
  py::dict d;
  d["termination"] = to_string(result.reason);
  d["steps"] = result.state.step;
  d["w"] = result.state.w.values();
  d["r"] = result.state.r;
  d["t"] = t;
  d["r_history"] = r;
  d["sup_R_minus_r"] = sup;
  d["min_R"] = min_R;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Weighted Yamabe flow on symmetric grids";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidConfiguration>(m, "InvalidConfiguration", base.ptr());
  py::register_exception<GeometryMismatch>(m, "GeometryMismatch", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<NoConvergence>(m, "NoConvergence", base.ptr());
  py::register_exception<BlowUp>(m, "BlowUp", base.ptr());
  py::register_exception<InsufficientSignal>(m, "InsufficientSignal", base.ptr());

  py::class_<Grid>(m, "Geometry")
      .def_static("torus", [](int n, double mm, int k, int points) { return Grid{Geometry::torus(n, mm, k, points)}; },
                  py::arg("n"), py::arg("m"), py::arg("k"), py::arg("grid_points"))
      .def_static("sphere", [](int n, double mm, int points) { return Grid{Geometry::sphere(n, mm, points)}; },
                  py::arg("n"), py::arg("m"), py::arg("grid_points"))
      .def_property_readonly("kind", [](const Grid& g) { return g->kind() == ManifoldKind::SphereSym ? "sphere" : "torus"; })
      .def_property_readonly("n", [](const Grid& g) { return g->n(); })
      .def_property_readonly("m", [](const Grid& g) { return g->m(); })
      .def_property_readonly("size", [](const Grid& g) { return g->size(); })
      .def_property_readonly("spacing", [](const Grid& g) { return g->spacing(); })
      .def_property_readonly("measure_weight", [](const Grid& g) { return g->measure_weight(); })
      .def_property_readonly("exponents", [](const Grid& g) { return exponents_dict(g->exponents()); })
      .def("coordinate", [](const Grid& g, int axis) { return g->coordinate(axis); }, py::arg("axis") = 0)
      .def("total_volume", [](const Grid& g) { return g->total_volume(); })
      .def("__repr__", [](const Grid& grid) {
        const Geometry& g = *grid;
        std::ostringstream ss;
        ss << "<Geometry " << (g.kind() == ManifoldKind::SphereSym ? "sphere" : "torus") << " n=" << g.n()
           << " m=" << g.m() << " size=" << g.size() << '>';
        return ss.str();
      });

  m.def(
      "weighted_curvature",
      [](const Grid& grid, const Eigen::ArrayXd& w, const std::optional<Eigen::ArrayXd>& phi0) {
        const GeometryPtr& g = grid.g;
        return CurvatureEvaluator(background(g, phi0)).evaluate(w).curvature;
      },
      py::arg("geometry"), py::arg("w"), py::arg("phi0") = py::none(), "R^m_phi of the conformal factor w at each node");
  m.def(
      "energy",
      [](const Grid& grid, const Eigen::ArrayXd& w, const std::optional<Eigen::ArrayXd>& phi0) {
        const GeometryPtr& g = grid.g;
        return CurvatureEvaluator(background(g, phi0)).energy(w);
      },
      py::arg("geometry"), py::arg("w"), py::arg("phi0") = py::none());
  m.def("run_flow", &run_flow, py::arg("geometry"), py::arg("w0"), py::arg("phi0") = py::none(),
        py::arg("t_end") = 10.0, py::arg("stop_tol") = 1e-6, py::arg("stride") = 10);
  m.def(
      "limit_profile",
      [](const Grid& grid, const Eigen::ArrayXd& w, double r_guess, const std::optional<Eigen::ArrayXd>& phi0,
         double tol) {
        const GeometryPtr& g = grid.g;
        const LimitProfile lp = solve_limit_profile(background(g, phi0), as_field(g, w), r_guess, NewtonOptions{.tolerance = tol});
        return py::make_tuple(lp.w.values(), lp.r_inf, lp.iterations, lp.residual);
      },
      py::arg("geometry"), py::arg("w"), py::arg("r_guess"), py::arg("phi0") = py::none(), py::arg("tol") = 1e-10,
      "(w_inf, r_inf, iterations, residual)");
  m.def(
      "spectral_basis",
      [](const Grid& grid, const Eigen::ArrayXd& w_inf, double r_inf, int count,
         const std::optional<Eigen::ArrayXd>& phi0) {
        const GeometryPtr& g = grid.g;
        const SpectralBasis b = build_spectral_basis(background(g, phi0), as_field(g, w_inf), r_inf, count);
        Eigen::MatrixXd modes(g->size(), static_cast<Eigen::Index>(b.eigenfields.size()));
        for (std::size_t a = 0; a < b.eigenfields.size(); ++a) modes.col(static_cast<Eigen::Index>(a)) = b.eigenfields[a].values().matrix();
        py::dict d;
        d["eigenvalues"] = b.eigenvalues;
        d["eigenfields"] = modes;
        d["low_modes"] = b.low_modes;
        d["threshold"] = b.threshold;
        d["gram_defect"] = b.gram_defect();
        return d;
      },
      py::arg("geometry"), py::arg("w_inf"), py::arg("r_inf"), py::arg("count") = 8, py::arg("phi0") = py::none());
  m.def(
      "normalize_config", [](const std::string& text) { return config_to_json(parse_config(text)); }, py::arg("text"),
      "Validated canonical JSON form of a run configuration");
  m.def(
      "verify",
      [](const std::optional<std::string>& config, bool break_stencil) {
        const RunConfig cfg = config ? parse_config(*config) : default_config();
        std::vector<CheckResult> results;
        {
          py::gil_scoped_release release;
          results = run_verification(cfg, VerifyOptions{.break_stencil = break_stencil});
        }
        py::list out;
        for (const auto& r : results) out.append(py::make_tuple(r.name, r.passed, r.detail));
        return out;
      },
      py::arg("config") = py::none(), py::arg("break_stencil") = false);
  m.def(
      "main",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "wyflow");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line front end; returns (exit code, stdout, stderr)");
}
