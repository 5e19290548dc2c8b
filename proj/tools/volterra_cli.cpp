#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "volterra/controlled.hpp"
#include "volterra/driver.hpp"
#include "volterra/errors.hpp"
#include "volterra/grid.hpp"
#include "volterra/integrator.hpp"
#include "volterra/kernel.hpp"
#include "volterra/norms.hpp"
#include "volterra/serialize.hpp"
#include "volterra/sewing.hpp"
#include "volterra/signature.hpp"
#include "volterra/solver.hpp"
#include "volterra/tensor.hpp"

namespace {

using nlohmann::json;
using namespace volterra;

// Config problems surface as exit 2 before any computation starts.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

json load_config(const std::string& path, const std::vector<std::string>& sets) {
    json cfg = json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config file not readable: " + path);
        try {
            in >> cfg;
        } catch (const json::parse_error& err) {
            throw ConfigError(std::string("config parse error: ") + err.what());
        }
        if (!cfg.is_object()) throw ConfigError("config root must be a JSON object");
    }
    for (const std::string& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("--set expects key=value, got: " + kv);
        const std::string key = kv.substr(0, eq);
        const std::string raw = kv.substr(eq + 1);
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::parse_error&) {
            value = raw;  // bare strings stay strings
        }
        json* node = &cfg;
        std::size_t start = 0;
        while (true) {
            const auto dot = key.find('.', start);
            const std::string part = key.substr(start, dot - start);
            if (part.empty()) throw ConfigError("--set key has an empty segment: " + key);
            if (dot == std::string::npos) {
                (*node)[part] = value;
                break;
            }
            node = &(*node)[part];
            if (!node->is_object() && !node->is_null()) *node = json::object();
            start = dot + 1;
        }
    }
    return cfg;
}

const json& require_section(const json& cfg, const std::string& name) {
    if (!cfg.contains(name) || !cfg.at(name).is_object())
        throw ConfigError("config needs a \"" + name + "\" object");
    return cfg.at(name);
}

double jnum(const json& j, const std::string& key, std::optional<double> fallback = {}) {
    if (!j.contains(key)) {
        if (fallback) return *fallback;
        throw ConfigError("config key missing: " + key);
    }
    if (!j.at(key).is_number()) throw ConfigError("config key must be a number: " + key);
    return j.at(key).get<double>();
}

int jint(const json& j, const std::string& key, std::optional<int> fallback = {}) {
    if (!j.contains(key)) {
        if (fallback) return *fallback;
        throw ConfigError("config key missing: " + key);
    }
    if (!j.at(key).is_number_integer())
        throw ConfigError("config key must be an integer: " + key);
    return j.at(key).get<int>();
}

std::string jstr(const json& j, const std::string& key,
                 std::optional<std::string> fallback = {}) {
    if (!j.contains(key)) {
        if (fallback) return *fallback;
        throw ConfigError("config key missing: " + key);
    }
    if (!j.at(key).is_string()) throw ConfigError("config key must be a string: " + key);
    return j.at(key).get<std::string>();
}

std::vector<double> jvec(const json& j, const std::string& key) {
    if (!j.contains(key) || !j.at(key).is_array())
        throw ConfigError("config key must be an array: " + key);
    std::vector<double> out;
    for (const json& v : j.at(key)) {
        if (!v.is_number()) throw ConfigError("array entries must be numbers: " + key);
        out.push_back(v.get<double>());
    }
    return out;
}

Kernel build_kernel(const json& cfg) {
    const json& k = require_section(cfg, "kernel");
    const std::string family = jstr(k, "family", std::string("fractional"));
    if (family == "constant") return Kernel::constant();
    const double gamma = jnum(k, "gamma");
    if (family == "fractional") return Kernel::fractional(gamma);
    if (family == "damped_fractional")
        return Kernel::damped_fractional(gamma, jnum(k, "lambda", 1.0));
    throw ConfigError("unknown kernel family: " + family);
}

DrivingPath build_driver(const json& cfg) {
    const json& d = require_section(cfg, "driver");
    const std::string kind = jstr(d, "kind", std::string("trig"));
    const double alpha = jnum(d, "alpha", 1.0);
    if (kind == "trig") {
        const double horizon = jnum(d, "horizon", 1.0);
        std::vector<DrivingPath::TrigComponent> comps;
        if (d.contains("components")) {
            for (const json& c : d.at("components")) {
                DrivingPath::TrigComponent tc;
                tc.shape = jstr(c, "shape", std::string("sin"));
                tc.amplitude = jnum(c, "amplitude", 1.0);
                tc.frequency = jnum(c, "frequency", 1.0);
                tc.phase = jnum(c, "phase", 0.0);
                comps.push_back(tc);
            }
        } else {
            comps.push_back({"linear", 1.0, 1.0, 0.0});
        }
        return DrivingPath::trig(comps, horizon, alpha);
    }
    if (kind == "csv") return DrivingPath::from_csv(jstr(d, "path"), alpha);
    if (kind == "piecewise_linear") {
        std::vector<double> times = jvec(d, "times");
        std::vector<double> values = jvec(d, "values");
        const int dim = jint(d, "dim", 1);
        return DrivingPath::piecewise_linear(std::move(times), std::move(values), dim, alpha);
    }
    if (kind == "fbm") {
        const double hurst = jnum(d, "hurst", 0.5);
        const int n = jint(d, "n", 1024);
        const auto seed = static_cast<std::uint64_t>(jint(d, "seed", 1));
        const double horizon = jnum(d, "horizon", 1.0);
        return sample_fbm(hurst, n, seed, horizon);
    }
    throw ConfigError("unknown driver kind: " + kind);
}

SmoothFunction build_function(const json& cfg, int d) {
    const json& f = require_section(cfg, "f");
    const std::string family = jstr(f, "family");
    const int m = jint(f, "m", 1);
    if (family == "sine")
        return SmoothFunction::sine(m, d, jnum(f, "amplitude", 1.0), jnum(f, "frequency", 1.0));
    if (family == "scaled_logistic")
        return SmoothFunction::scaled_logistic(m, d, jnum(f, "scale", 1.0), jnum(f, "rate", 1.0));
    if (family == "constant") {
        std::vector<double> flat = jvec(f, "value");
        if (static_cast<int>(flat.size()) != m * d)
            throw ConfigError("constant f value must have m*d entries");
        Tensor value({m, d});
        for (int i = 0; i < value.size(); ++i) value[i] = flat[static_cast<std::size_t>(i)];
        return SmoothFunction::constant(m, d, std::move(value));
    }
    if (family == "linear") {
        std::vector<double> sflat = jvec(f, "slope");
        if (static_cast<int>(sflat.size()) != m * d * m)
            throw ConfigError("linear f slope must have m*d*m entries");
        Tensor slope({m, d, m});
        for (int i = 0; i < slope.size(); ++i) slope[i] = sflat[static_cast<std::size_t>(i)];
        Tensor offset = Tensor::zeros({m, d});
        if (f.contains("offset")) {
            std::vector<double> oflat = jvec(f, "offset");
            if (static_cast<int>(oflat.size()) != m * d)
                throw ConfigError("linear f offset must have m*d entries");
            for (int i = 0; i < offset.size(); ++i) offset[i] = oflat[static_cast<std::size_t>(i)];
        }
        return SmoothFunction::linear(m, d, std::move(slope), std::move(offset));
    }
    throw ConfigError("unknown f family: " + family);
}

struct ExponentTriple {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
};

ExponentTriple read_exponents(const json& cfg, const Kernel& k, const DrivingPath& x) {
    ExponentTriple e;
    e.gamma = k.order();
    e.alpha = x.alpha_hint();
    e.beta = 0.0;
    if (cfg.contains("exponents")) {
        const json& section = cfg.at("exponents");
        e.alpha = jnum(section, "alpha", e.alpha);
        e.beta = jnum(section, "beta", 0.0);
        e.gamma = jnum(section, "gamma", e.gamma);
    }
    return e;
}

void require_regularity(const ExponentTriple& e) {
    if (!(e.alpha - e.gamma > 0.25)) {
        std::ostringstream msg;
        msg << "constraint violated: alpha - gamma = " << e.alpha - e.gamma
            << " must exceed 1/4";
        throw ConfigError(msg.str());
    }
}

int grid_level(const json& cfg, int fallback) {
    if (!cfg.contains("grid")) return fallback;
    return jint(cfg.at("grid"), "level", fallback);
}

void emit_gnuplot(const std::filesystem::path& out_dir, const std::string& csv,
                  const std::string& ycol) {
    std::ostringstream gp;
    gp << "# " << kArtifactVersion << "\n"
       << "set datafile separator ','\n"
       << "plot '" << csv << "' skip 2 using 1:" << ycol << " with lines\n";
    write_text_file((out_dir / "plot.gp").string(), gp.str());
}

int run_signature(const json& cfg, const std::filesystem::path& out_dir, int threads,
                  bool gnuplot) {
    (void)threads;
    (void)gnuplot;
    Kernel k = build_kernel(cfg);
    DrivingPath x = build_driver(cfg);
    VolterraSignature sig(k, x);
    const json& section = require_section(cfg, "signature");
    const double s = jnum(section, "s", 0.0);
    const double t = jnum(section, "t", x.horizon());
    const double tau = jnum(section, "tau", t);
    std::vector<std::string> names;
    if (section.contains("symbols")) {
        for (const json& n : section.at("symbols")) names.push_back(n.get<std::string>());
    } else {
        for (TreeSymbol sym : all_tree_symbols()) names.push_back(tree_name(sym));
    }
    std::vector<SignatureRecord> records;
    for (const std::string& name : names) {
        TreeSymbol sym = tree_symbol_from(name);
        records.push_back({name, s, t, tau, sig.level(sym, s, t, tau)});
    }
    write_text_file((out_dir / "signature.json").string(), signature_json(records));
    log_line(LogLevel::Info, "signature: wrote " + std::to_string(records.size()) + " records");
    return 0;
}

int run_chen_check(const json& cfg, const std::filesystem::path& out_dir, int threads,
                   bool gnuplot) {
    (void)threads;
    Kernel k = build_kernel(cfg);
    DrivingPath x = build_driver(cfg);
    VolterraSignature sig(k, x);
    const int level = grid_level(cfg, 2);
    TimeGrid grid = TimeGrid::dyadic(0.0, x.horizon(), level);
    std::vector<ChenResidualRow> rows;
    const TreeSymbol syms[] = {TreeSymbol::Chain2, TreeSymbol::Chain3, TreeSymbol::Vee};
    for (int i = 0; i < grid.size(); ++i) {
        for (int j = i + 1; j < grid.size(); ++j) {
            for (int l = j + 1; l < grid.size(); ++l) {
                const double s = grid[i];
                const double u = grid[j];
                const double t = grid[l];
                for (TreeSymbol sym : syms) {
                    rows.push_back({tree_name(sym), s, u, t, t,
                                    sig.chen_residual(sym, s, u, t, t)});
                }
            }
        }
    }
    write_text_file((out_dir / "chen_residuals.csv").string(), chen_residual_csv(rows));
    if (gnuplot) emit_gnuplot(out_dir, "chen_residuals.csv", "6");
    log_line(LogLevel::Info, "chen-check: " + std::to_string(rows.size()) + " rows");
    return 0;
}

int run_norms(const json& cfg, const std::filesystem::path& out_dir, int threads,
              bool gnuplot) {
    (void)gnuplot;
    Kernel k = build_kernel(cfg);
    DrivingPath x = build_driver(cfg);
    VolterraSignature sig(k, x);
    const json* section = cfg.contains("norms") ? &cfg.at("norms") : nullptr;
    const std::string target =
        section != nullptr ? jstr(*section, "target", std::string("dot")) : "dot";
    const TreeSymbol sym = tree_symbol_from(target);
    const int level = grid_level(cfg, 4);
    TimeGrid grid = TimeGrid::dyadic(0.0, x.horizon(), level);
    ExponentTriple e = read_exponents(cfg, k, x);
    NormParams params;
    params.alpha = e.alpha;
    params.gamma = e.gamma;
    const double base = grid.a();
    Delta2Fn path_fn = [&sig, sym, base](double t, double tau) {
        return sig.level(sym, base, t, tau);
    };
    NormReport report = volterra_norm(path_fn, params, grid, threads);
    report.family = target;
    write_text_file((out_dir / "norms.csv").string(), norm_report_csv(report));
    write_text_file((out_dir / "norms.json").string(), norm_report_json(report));
    log_line(LogLevel::Info, "norms: total " + format_double(report.total()));
    return 0;
}

int run_sew_rate(const json& cfg, const std::filesystem::path& out_dir, int threads,
                 bool gnuplot) {
    const json* section = cfg.contains("sew_rate") ? &cfg.at("sew_rate") : nullptr;
    const double beta = section != nullptr ? jnum(*section, "beta", 1.45) : 1.45;
    const double kappa = section != nullptr ? jnum(*section, "kappa", 0.25) : 0.25;
    const double span = section != nullptr ? jnum(*section, "t", 1.0) : 1.0;
    const int max_level = section != nullptr ? jint(*section, "max_level", 12) : 12;
    if (!(beta > 1.0)) throw ConfigError("constraint violated: sew-rate beta must exceed 1");
    SewingExponents exps;
    exps.beta = beta;
    exps.kappa = kappa;
    exps.theta = 0.0;
    exps.alpha = 0.8;
    exps.gamma = kappa;
    exps.validate(false);
    SewOptions opts;
    opts.tol = -1.0;
    opts.max_level = max_level;
    opts.threads = threads;
    auto germ = [beta](double s, double t, double tau) {
        const double width = t - s;
        return Tensor::scalar(std::pow(width, beta) * (1.0 + 0.25 * std::cos(tau + s)));
    };
    SewResult res = sew_single(germ, exps, 0.0, span, span, opts);
    write_text_file((out_dir / "sew_rate.csv").string(), sew_rate_csv(res.diagnostics));
    write_text_file((out_dir / "sew_rate.json").string(), sewing_json(res.diagnostics));
    if (gnuplot) emit_gnuplot(out_dir, "sew_rate.csv", "2");
    log_line(LogLevel::Info, "sew-rate: slope " +
                                 (res.diagnostics.slope_available
                                      ? format_double(res.diagnostics.fitted_slope)
                                      : std::string("unavailable")));
    return 0;
}

int run_integrate(const json& cfg, const std::filesystem::path& out_dir, int threads,
                  bool gnuplot) {
    Kernel k = build_kernel(cfg);
    DrivingPath x = build_driver(cfg);
    ExponentTriple e = read_exponents(cfg, k, x);
    require_regularity(e);
    VolterraSignature sig(k, x);
    const json& section = require_section(cfg, "integrate");
    SmoothFunction f = build_function(section, x.dim());
    const double t_end = jnum(section, "t", x.horizon());
    const double tol = jnum(section, "tol", 1e-7);
    const int level = grid_level(cfg, 4);
    TimeGrid grid = TimeGrid::dyadic(0.0, t_end, level);
    IntegrateOptions opts;
    opts.alpha = e.alpha;
    opts.max_level = jint(section, "max_level", 14);
    opts.threads = threads;
    if (section.contains("tau_slices")) opts.tau_slices = jvec(section, "tau_slices");
    ControlledPath y = compose(f, ControlledPath::canonical_lift(sig));
    RoughIntegralResult result = integrate_to_controlled(sig, y, grid, tol, opts);
    write_text_file((out_dir / "integral_trace.csv").string(),
                    integral_trace_csv(result.samples));
    write_text_file((out_dir / "integral_diagnostics.json").string(),
                    sewing_json(result.diagnostics));
    if (gnuplot) emit_gnuplot(out_dir, "integral_trace.csv", "4");
    log_line(LogLevel::Info,
             "integrate: " + std::to_string(result.samples.size()) + " samples");
    return 0;
}

int run_solve(const json& cfg, const std::filesystem::path& out_dir, int threads,
              bool gnuplot) {
    Kernel k = build_kernel(cfg);
    DrivingPath x = build_driver(cfg);
    ExponentTriple e = read_exponents(cfg, k, x);
    require_regularity(e);
    VolterraSignature sig(k, x);
    const json& section = require_section(cfg, "solve");
    SmoothFunction f = build_function(section, x.dim());
    std::vector<double> y0_flat = jvec(section, "y0");
    if (static_cast<int>(y0_flat.size()) != f.m())
        throw ConfigError("y0 must have m entries");
    Tensor y0({f.m()});
    for (int i = 0; i < y0.size(); ++i) y0[i] = y0_flat[static_cast<std::size_t>(i)];
    const double horizon = jnum(section, "T", x.horizon());
    SolverOptions opts;
    opts.alpha = e.alpha;
    opts.gamma = e.gamma;
    opts.beta = e.beta;
    opts.grid_level = grid_level(cfg, 10);
    if (cfg.contains("tolerances"))
        opts.picard_tol = jnum(cfg.at("tolerances"), "picard", opts.picard_tol);
    opts.threads = threads;
    if (section.contains("tau_slices")) opts.tau_slices = jvec(section, "tau_slices");
    SolutionTrace trace = solve(sig, f, y0, horizon, opts);
    write_text_file((out_dir / "solution.csv").string(), solution_csv(trace));
    write_text_file((out_dir / "solve_diagnostics.json").string(), solver_steps_json(trace));
    if (!trace.slices.empty()) {
        std::ostringstream slices;
        slices << "# " << kArtifactVersion << "\n";
        slices << "tau,t,component,value\n";
        for (std::size_t si = 0; si < trace.slices.size(); ++si) {
            const double tau = trace.slice_taus[si];
            for (std::size_t i = 0; i < trace.slices[si].size(); ++i) {
                const Tensor& v = trace.slices[si][i];
                for (int c = 0; c < v.size(); ++c) {
                    slices << format_double(tau) << ',' << format_double(trace.times[i])
                           << ',' << c << ',' << format_double(v[c]) << '\n';
                }
            }
        }
        write_text_file((out_dir / "slices.csv").string(), slices.str());
    }
    if (gnuplot) emit_gnuplot(out_dir, "solution.csv", "3");
    log_line(LogLevel::Info, "solve: " + std::to_string(trace.steps.size()) + " steps");
    return 0;
}

int run_kernel_audit(const json& cfg, const std::filesystem::path& out_dir, int threads,
                     bool gnuplot) {
    (void)gnuplot;
    Kernel k = build_kernel(cfg);
    const int level = grid_level(cfg, 4);
    const double horizon =
        cfg.contains("driver") ? jnum(cfg.at("driver"), "horizon", 1.0) : 1.0;
    TimeGrid grid = TimeGrid::dyadic(0.0, horizon, level);
    KernelAuditReport report = audit_kernel_bounds(k, grid, threads);
    write_text_file((out_dir / "kernel_audit.json").string(), kernel_audit_json(report));
    log_line(LogLevel::Info, "kernel-audit: max constant " +
                                 format_double(report.max_constant()));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rough Volterra toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path = ".";
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;
    std::vector<std::string> sets;
    bool gnuplot = false;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--out", out_path, "output directory");
    app.add_option("--threads", threads, "worker thread cap");
    app.add_option("--set", sets, "override config entries, key=value")->take_all();
    app.add_flag("--gnuplot", gnuplot, "also emit a gnuplot stub");

    const struct {
        const char* name;
        const char* help;
        int (*run)(const json&, const std::filesystem::path&, int, bool);
    } commands[] = {
        {"signature", "evaluate signature blocks", run_signature},
        {"chen-check", "residuals of the algebraic identities", run_chen_check},
        {"norms", "weighted norm report for a signature block", run_norms},
        {"sew-rate", "dyadic decay of a synthetic germ", run_sew_rate},
        {"integrate", "rough integral trace", run_integrate},
        {"solve", "fixed-point solve", run_solve},
        {"kernel-audit", "empirical kernel bound constants", run_kernel_audit},
    };
    for (const auto& c : commands) app.add_subcommand(c.name, c.help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err);
    }

    std::filesystem::path out_dir(out_path);
    auto fail = [&out_dir](int code, const std::string& kind, const std::string& message) {
        const std::string doc = error_json(code, kind, message);
        std::cerr << doc;
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (!ec) {
            try {
                write_text_file((out_dir / "error.json").string(), doc);
            } catch (const std::exception&) {
            }
        }
        return code;
    };

    try {
        if (threads < 1) throw ConfigError("--threads must be at least 1");
        const json cfg = load_config(config_path, sets);
        std::filesystem::create_directories(out_dir);
        for (const auto& c : commands) {
            if (app.get_subcommand(c.name)->parsed()) return c.run(cfg, out_dir, threads, gnuplot);
        }
        throw ConfigError("no command selected");
    } catch (const NumericalError& err) {
        return fail(3, err.code(), err.what());
    } catch (const std::invalid_argument& err) {
        return fail(2, "invalid_config", err.what());
    } catch (const json::exception& err) {
        return fail(2, "invalid_config", err.what());
    } catch (const std::exception& err) {
        return fail(2, "error", err.what());
    }
}
