#pragma once

#include <string>
#include <vector>

#include "volterra/integrator.hpp"
#include "volterra/kernel.hpp"
#include "volterra/norms.hpp"
#include "volterra/sewing.hpp"
#include "volterra/solver.hpp"
#include "volterra/tensor.hpp"

namespace volterra {

// Stamp written into every artifact. CSV bodies carry no timestamps, so a rerun
// with the same config is byte-identical.
inline constexpr const char* kArtifactVersion = "volterra-rough 0.1.0";

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

// Level parsed once from VOLTERRA_ROUGH_LOG (error | info | debug, default error).
LogLevel log_level();
void log_line(LogLevel level, const std::string& message);

// Shortest representation that round-trips the exact double.
std::string format_double(double v);

struct SignatureRecord {
    std::string sigma;
    double s = 0.0;
    double t = 0.0;
    double tau = 0.0;
    Tensor tensor;
};

struct ChenResidualRow {
    std::string sigma;
    double s = 0.0;
    double u = 0.0;
    double t = 0.0;
    double tau = 0.0;
    double residual = 0.0;
};

std::string signature_json(const std::vector<SignatureRecord>& records);
std::string chen_residual_csv(const std::vector<ChenResidualRow>& rows);

std::string norm_report_csv(const NormReport& report);
std::string norm_report_json(const NormReport& report);

std::string sew_rate_csv(const SewingDiagnostics& diag);
std::string sewing_json(const SewingDiagnostics& diag);

std::string integral_trace_csv(const std::vector<IntegralSample>& samples);

std::string solution_csv(const SolutionTrace& trace);
std::string solver_steps_json(const SolutionTrace& trace);

std::string kernel_audit_json(const KernelAuditReport& report);

std::string error_json(int exit_code, const std::string& code, const std::string& message);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace volterra
