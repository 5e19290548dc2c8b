#include "volterra/serialize.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace volterra {

namespace {

using nlohmann::json;

LogLevel parse_level() {
    const char* raw = std::getenv("VOLTERRA_ROUGH_LOG");
    if (raw == nullptr) return LogLevel::Error;
    const std::string v(raw);
    if (v == "debug") return LogLevel::Debug;
    if (v == "info") return LogLevel::Info;
    return LogLevel::Error;
}

json tuple_json(const AttainingTuple& at) {
    return json{{"s", at.s},     {"u", at.u},     {"t", at.t}, {"tau1", at.tau1},
                {"tau2", at.tau2}, {"eta", at.eta}, {"zeta", at.zeta}};
}

void append_norm_row(std::ostringstream& out, const std::string& family,
                     const std::string& part, const NormPart& p) {
    const AttainingTuple& at = p.at;
    out << family << ',' << part << ',' << format_double(p.value) << ','
        << format_double(at.s) << ',' << format_double(at.u) << ','
        << format_double(at.t) << ',' << format_double(at.tau1) << ','
        << format_double(at.tau2) << ',' << format_double(at.eta) << ','
        << format_double(at.zeta) << '\n';
}

}  // namespace

LogLevel log_level() {
    static const LogLevel level = parse_level();
    return level;
}

void log_line(LogLevel level, const std::string& message) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    const char* tag = level == LogLevel::Error ? "error" : level == LogLevel::Info ? "info" : "debug";
    std::cerr << "[volterra:" << tag << "] " << message << '\n';
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    }
    return std::string(buf, ptr);
}

std::string signature_json(const std::vector<SignatureRecord>& records) {
    json out;
    out["version"] = kArtifactVersion;
    out["records"] = json::array();
    for (const SignatureRecord& rec : records) {
        json r;
        r["sigma"] = rec.sigma;
        r["s"] = rec.s;
        r["t"] = rec.t;
        r["tau"] = rec.tau;
        r["shape"] = rec.tensor.shape();
        std::vector<double> flat(rec.tensor.data(), rec.tensor.data() + rec.tensor.size());
        r["tensor"] = flat;
        out["records"].push_back(std::move(r));
    }
    return out.dump(2) + "\n";
}

std::string chen_residual_csv(const std::vector<ChenResidualRow>& rows) {
    std::ostringstream out;
    out << "# " << kArtifactVersion << "\n";
    out << "sigma,s,u,t,tau,residual\n";
    for (const ChenResidualRow& row : rows) {
        out << row.sigma << ',' << format_double(row.s) << ',' << format_double(row.u)
            << ',' << format_double(row.t) << ',' << format_double(row.tau) << ','
            << format_double(row.residual) << '\n';
    }
    return out.str();
}

std::string norm_report_csv(const NormReport& report) {
    std::ostringstream out;
    out << "# " << kArtifactVersion << "\n";
    out << "family,part,value,s,u,t,tau1,tau2,eta,zeta\n";
    append_norm_row(out, report.family, "1", report.norm_1);
    for (const auto& [label, part] : report.parts)
        append_norm_row(out, report.family, label, part);
    return out.str();
}

std::string norm_report_json(const NormReport& report) {
    json out;
    out["version"] = kArtifactVersion;
    out["family"] = report.family;
    out["grid_level"] = report.grid_level;
    out["norm_1"] = {{"value", report.norm_1.value}, {"at", tuple_json(report.norm_1.at)}};
    out["parts"] = json::array();
    for (const auto& [label, part] : report.parts)
        out["parts"].push_back(
            {{"label", label}, {"value", part.value}, {"at", tuple_json(part.at)}});
    out["norm_12"] = report.norm_12();
    out["norm_123"] = report.norm_123();
    out["total"] = report.total();
    out["infinite"] = report.infinite();
    return out.dump(2) + "\n";
}

std::string sew_rate_csv(const SewingDiagnostics& diag) {
    std::ostringstream out;
    out << "# " << kArtifactVersion << "\n";
    out << "level,diff,slope\n";
    const std::string slope =
        diag.slope_available ? format_double(diag.fitted_slope) : std::string("nan");
    for (std::size_t i = 0; i < diag.level_diffs.size(); ++i) {
        out << i << ',' << format_double(diag.level_diffs[i]) << ',' << slope << '\n';
    }
    return out.str();
}

std::string sewing_json(const SewingDiagnostics& diag) {
    json out;
    out["version"] = kArtifactVersion;
    json levels = json::array();
    json diffs = json::array();
    for (std::size_t i = 0; i < diag.level_diffs.size(); ++i) {
        levels.push_back(i);
        diffs.push_back(diag.level_diffs[i]);
    }
    out["levels"] = std::move(levels);
    out["diffs"] = std::move(diffs);
    if (diag.slope_available)
        out["slope"] = diag.fitted_slope;
    else
        out["slope"] = nullptr;
    out["converged"] = diag.converged;
    out["levels_used"] = diag.levels_used;
    return out.dump(2) + "\n";
}

std::string integral_trace_csv(const std::vector<IntegralSample>& samples) {
    std::ostringstream out;
    out << "# " << kArtifactVersion << "\n";
    out << "t,tau,component_index,value\n";
    for (const IntegralSample& sample : samples) {
        for (int c = 0; c < sample.value.size(); ++c) {
            out << format_double(sample.t) << ',' << format_double(sample.tau) << ','
                << c << ',' << format_double(sample.value[c]) << '\n';
        }
    }
    return out.str();
}

std::string solution_csv(const SolutionTrace& trace) {
    std::ostringstream out;
    out << "# " << kArtifactVersion << "\n";
    out << "t,component,value\n";
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
        const Tensor& v = trace.diagonal[i];
        for (int c = 0; c < v.size(); ++c) {
            out << format_double(trace.times[i]) << ',' << c << ','
                << format_double(v[c]) << '\n';
        }
    }
    return out.str();
}

std::string solver_steps_json(const SolutionTrace& trace) {
    json out;
    out["version"] = kArtifactVersion;
    out["steps"] = json::array();
    for (const StepDiagnostics& step : trace.steps) {
        out["steps"].push_back({{"t0", step.t0},
                                {"t1", step.t1},
                                {"iters", step.iters},
                                {"q_hat", step.q_hat}});
    }
    return out.dump(2) + "\n";
}

std::string kernel_audit_json(const KernelAuditReport& report) {
    json out;
    out["version"] = kArtifactVersion;
    out["gamma"] = report.gamma;
    out["band"] = report.band;
    out["max_constant"] = report.max_constant();
    out["bounds"] = json::array();
    for (const KernelBoundResult& b : report.bounds) {
        out["bounds"].push_back({{"label", b.label},
                                 {"constant", b.constant},
                                 {"tuple", b.tuple},
                                 {"sweep_value", b.sweep_value},
                                 {"skipped", b.skipped}});
    }
    return out.dump(2) + "\n";
}

std::string error_json(int exit_code, const std::string& code, const std::string& message) {
    json out;
    out["error"] = {{"exit", exit_code}, {"code", code}, {"message", message}};
    return out.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace volterra
