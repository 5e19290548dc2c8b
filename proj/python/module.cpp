#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <tuple>
#include <vector>

#include "volterra/controlled.hpp"
#include "volterra/driver.hpp"
#include "volterra/integrator.hpp"
#include "volterra/kernel.hpp"
#include "volterra/signature.hpp"
#include "volterra/solver.hpp"
#include "volterra/tensor.hpp"

namespace py = pybind11;

namespace {

using namespace volterra;

// tensors cross the boundary as (shape, flat row-major data)
py::tuple tensor_out(const Tensor& t) {
    std::vector<double> data(static_cast<std::size_t>(t.size()));
    for (int i = 0; i < t.size(); ++i) data[static_cast<std::size_t>(i)] = t[i];
    return py::make_tuple(t.shape(), std::move(data));
}

}  // namespace

PYBIND11_MODULE(volterra_rough, m) {
    m.doc() =
        "Tree-indexed signatures, sewing integration and fixed-point solves for "
        "Volterra equations driven by irregular signals through singular kernels.";

    py::class_<Kernel>(m, "Kernel")
        .def_static("constant", &Kernel::constant)
        .def_static("fractional", &Kernel::fractional, py::arg("gamma"))
        .def_static("damped_fractional", &Kernel::damped_fractional, py::arg("gamma"),
                    py::arg("lam"))
        .def_property_readonly("order", &Kernel::order)
        .def_property_readonly("name", [](const Kernel& k) { return k.name(); })
        .def("__call__", [](const Kernel& k, double tau, double r) { return k(tau, r); },
             py::arg("tau"), py::arg("r"));

    py::class_<DrivingPath>(m, "DrivingPath")
        .def_static("piecewise_linear", &DrivingPath::piecewise_linear, py::arg("times"),
                    py::arg("values"), py::arg("dim"), py::arg("alpha_hint"))
        .def_static(
            "trig",
            [](const std::vector<std::tuple<std::string, double, double, double>>& components,
               double horizon, double alpha_hint) {
                std::vector<DrivingPath::TrigComponent> comps;
                for (const auto& [shape, amplitude, frequency, phase] : components)
                    comps.push_back({shape, amplitude, frequency, phase});
                return DrivingPath::trig(comps, horizon, alpha_hint);
            },
            py::arg("components"), py::arg("horizon"), py::arg("alpha_hint"),
            "components: list of (shape, amplitude, frequency, phase) with shape in "
            "{'sin', 'cos', 'linear'}")
        .def_static("fbm", &sample_fbm, py::arg("hurst"), py::arg("n"), py::arg("seed"),
                    py::arg("horizon"))
        .def_property_readonly("dim", &DrivingPath::dim)
        .def_property_readonly("horizon", &DrivingPath::horizon)
        .def_property_readonly("alpha_hint", &DrivingPath::alpha_hint)
        .def("value", [](const DrivingPath& x, double t) { return tensor_out(x.value(t)); },
             py::arg("t"))
        .def("increment",
             [](const DrivingPath& x, double s, double t) { return tensor_out(x.increment(s, t)); },
             py::arg("s"), py::arg("t"));

    py::class_<SmoothFunction>(m, "SmoothFunction")
        .def_static("sine", &SmoothFunction::sine, py::arg("m"), py::arg("d"),
                    py::arg("amplitude") = 1.0, py::arg("frequency") = 1.0)
        .def_static("scaled_logistic", &SmoothFunction::scaled_logistic, py::arg("m"),
                    py::arg("d"), py::arg("scale") = 1.0, py::arg("rate") = 1.0)
        .def_static(
            "constant",
            [](int m_, int d_, const std::vector<double>& value) {
                return SmoothFunction::constant(m_, d_, Tensor({m_, d_}, value));
            },
            py::arg("m"), py::arg("d"), py::arg("value"))
        .def_static(
            "linear",
            [](int m_, int d_, const std::vector<double>& slope,
               const std::vector<double>& offset) {
                return SmoothFunction::linear(m_, d_, Tensor({m_, d_, m_}, slope),
                                              Tensor({m_, d_}, offset));
            },
            py::arg("m"), py::arg("d"), py::arg("slope"), py::arg("offset"));

    py::class_<VolterraSignature>(m, "VolterraSignature")
        .def(py::init([](const Kernel& kernel, const DrivingPath& path) {
                 return VolterraSignature(kernel, path);
             }),
             py::arg("kernel"), py::arg("path"))
        .def_property_readonly("dim", &VolterraSignature::dim)
        .def(
            "level",
            [](const VolterraSignature& sig, const std::string& symbol, double s, double t,
               double tau) { return tensor_out(sig.level(tree_symbol_from(symbol), s, t, tau)); },
            py::arg("symbol"), py::arg("s"), py::arg("t"), py::arg("tau"),
            "Block z^{sigma,tau}_{ts} as (shape, data); symbol in "
            "{'dot', 'cherry', 'chain3', 'vee', 'pair'}")
        .def(
            "chen_residual",
            [](const VolterraSignature& sig, const std::string& symbol, double s, double u,
               double t, double tau) {
                return sig.chen_residual(tree_symbol_from(symbol), s, u, t, tau);
            },
            py::arg("symbol"), py::arg("s"), py::arg("u"), py::arg("t"), py::arg("tau"))
        .def("cache_size", &VolterraSignature::cache_size);

    m.def("tree_symbols", [] {
        std::vector<std::string> names;
        for (TreeSymbol s : all_tree_symbols()) names.push_back(tree_name(s));
        return names;
    });

    m.def(
        "integrate_composed",
        [](const VolterraSignature& sig, const SmoothFunction& f, double s, double t, double tau,
           double tol) {
            ControlledPath y = compose(f, ControlledPath::canonical_lift(sig));
            const RoughIntegralValue w = rough_integral(sig, y, s, t, tau, tol);
            py::dict out;
            out["value"] = tensor_out(w.value);
            out["level_diffs"] = w.diagnostics.level_diffs;
            out["converged"] = w.diagnostics.converged;
            return out;
        },
        py::arg("sig"), py::arg("f"), py::arg("s"), py::arg("t"), py::arg("tau"),
        py::arg("tol") = 0.0,
        "int_s^t k(tau, r) dx_r f(x)_r as a dict with value, level_diffs, converged");

    m.def(
        "solve",
        [](const VolterraSignature& sig, const SmoothFunction& f, const std::vector<double>& y0,
           double T, int grid_level, double picard_tol, int threads) {
            SolverOptions opts;
            opts.grid_level = grid_level;
            opts.picard_tol = picard_tol;
            opts.threads = threads;
            const int m_ = static_cast<int>(y0.size());
            const SolutionTrace trace = volterra::solve(sig, f, Tensor({m_}, y0), T, opts);
            std::vector<std::vector<double>> diagonal;
            diagonal.reserve(trace.diagonal.size());
            for (const Tensor& v : trace.diagonal) {
                std::vector<double> row(static_cast<std::size_t>(v.size()));
                for (int i = 0; i < v.size(); ++i) row[static_cast<std::size_t>(i)] = v[i];
                diagonal.push_back(std::move(row));
            }
            std::vector<double> q_hats;
            for (const StepDiagnostics& sd : trace.steps) q_hats.push_back(sd.q_hat);
            py::dict out;
            out["times"] = trace.times;
            out["diagonal"] = std::move(diagonal);
            out["q_hats"] = std::move(q_hats);
            return out;
        },
        py::arg("sig"), py::arg("f"), py::arg("y0"), py::arg("T"), py::arg("grid_level") = 8,
        py::arg("picard_tol") = 1e-9, py::arg("threads") = 1,
        "march y_t = y0 + int_0^t k(t, r) dx_r f(y_r^r); returns times, diagonal, q_hats");
}
