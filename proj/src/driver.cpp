#include "volterra/driver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "volterra/errors.hpp"

namespace volterra {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        while (!field.empty() && field.front() == ' ') field.erase(field.begin());
        fields.push_back(field);
    }
    return fields;
}

}  // namespace

DrivingPath DrivingPath::piecewise_linear(std::vector<double> times, std::vector<double> values,
                                          int dim, double alpha_hint) {
    if (dim < 1) throw std::invalid_argument("driving path dimension must be positive");
    if (times.size() < 2) throw std::invalid_argument("piecewise-linear path needs at least two samples");
    if (values.size() != times.size() * static_cast<size_t>(dim))
        throw std::invalid_argument("sample value count does not match times x dim");
    if (times.front() != 0.0) throw std::invalid_argument("sample times must start at 0");
    for (size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("sample times must be strictly increasing");
    if (!(alpha_hint > 0.0 && alpha_hint <= 1.0))
        throw std::invalid_argument("alpha hint must lie in (0,1]");

    DrivingPath p;
    p.kind_ = Kind::PiecewiseLinear;
    p.dim_ = dim;
    p.horizon_ = times.back();
    p.alpha_hint_ = alpha_hint;
    p.times_ = std::move(times);
    p.values_ = std::move(values);
    const size_t n = p.times_.size();
    p.slopes_.resize((n - 1) * static_cast<size_t>(dim));
    for (size_t i = 0; i + 1 < n; ++i) {
        const double dt = p.times_[i + 1] - p.times_[i];
        for (int c = 0; c < dim; ++c)
            p.slopes_[i * dim + c] = (p.values_[(i + 1) * dim + c] - p.values_[i * dim + c]) / dt;
    }
    return p;
}

DrivingPath DrivingPath::analytic(int dim, VectorFn value_fn, VectorFn derivative_fn,
                                  double horizon, double alpha_hint) {
    if (dim < 1) throw std::invalid_argument("driving path dimension must be positive");
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    if (!value_fn || !derivative_fn)
        throw std::invalid_argument("analytic path needs value and derivative closures");
    if (!(alpha_hint > 0.0 && alpha_hint <= 1.0))
        throw std::invalid_argument("alpha hint must lie in (0,1]");

    DrivingPath p;
    p.kind_ = Kind::Analytic;
    p.dim_ = dim;
    p.horizon_ = horizon;
    p.alpha_hint_ = alpha_hint;
    p.value_fn_ = std::move(value_fn);
    p.derivative_fn_ = std::move(derivative_fn);

    // Probe the derivative closure against central differences of the values.
    const int probes = 33;
    const double h = 1e-5 * std::max(1.0, horizon);
    std::vector<double> lo(dim), hi(dim), dv(dim);
    double worst = 0.0;
    double worst_t = 0.0;
    for (int j = 0; j < probes; ++j) {
        const double t = horizon * (j + 0.5) / probes;
        p.value_fn_(t - h, lo.data());
        p.value_fn_(t + h, hi.data());
        p.derivative_fn_(t, dv.data());
        for (int c = 0; c < dim; ++c) {
            const double fd = (hi[c] - lo[c]) / (2.0 * h);
            const double rel = std::abs(fd - dv[c]) / std::max(1.0, std::abs(dv[c]));
            if (rel > worst) {
                worst = rel;
                worst_t = t;
            }
        }
    }
    if (worst > 1e-6) {
        std::ostringstream msg;
        msg << "derivative closure disagrees with central differences: relative error " << worst
            << " at t=" << worst_t;
        throw DerivativeMismatch(msg.str());
    }
    return p;
}

DrivingPath DrivingPath::trig(const std::vector<TrigComponent>& components, double horizon,
                              double alpha_hint) {
    if (components.empty()) throw std::invalid_argument("trig path needs at least one component");
    for (const auto& c : components)
        if (c.shape != "sin" && c.shape != "cos" && c.shape != "linear")
            throw std::invalid_argument("unknown trig component shape: " + c.shape);
    auto comps = components;
    const int d = static_cast<int>(comps.size());
    auto value = [comps](double t, double* out) {
        for (size_t i = 0; i < comps.size(); ++i) {
            const auto& c = comps[i];
            if (c.shape == "sin")
                out[i] = c.amplitude * std::sin(c.frequency * t + c.phase);
            else if (c.shape == "cos")
                out[i] = c.amplitude * std::cos(c.frequency * t + c.phase);
            else
                out[i] = c.amplitude * t + c.phase;
        }
    };
    auto deriv = [comps](double t, double* out) {
        for (size_t i = 0; i < comps.size(); ++i) {
            const auto& c = comps[i];
            if (c.shape == "sin")
                out[i] = c.amplitude * c.frequency * std::cos(c.frequency * t + c.phase);
            else if (c.shape == "cos")
                out[i] = -c.amplitude * c.frequency * std::sin(c.frequency * t + c.phase);
            else
                out[i] = c.amplitude;
        }
    };
    return analytic(d, value, deriv, horizon, alpha_hint);
}

DrivingPath DrivingPath::from_csv(const std::string& path, double alpha_hint) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open driver csv: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("driver csv is empty: " + path);
    const auto header = split_csv_line(line);
    if (header.size() < 2)
        throw std::invalid_argument("driver csv header needs a time column and at least one value column");
    const int d = static_cast<int>(header.size()) - 1;

    std::vector<double> times;
    std::vector<double> values;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            std::ostringstream msg;
            msg << "driver csv line " << lineno << ": expected " << header.size() << " fields, got "
                << fields.size();
            throw std::invalid_argument(msg.str());
        }
        try {
            times.push_back(std::stod(fields[0]));
            for (int c = 0; c < d; ++c) values.push_back(std::stod(fields[1 + c]));
        } catch (const std::exception&) {
            std::ostringstream msg;
            msg << "driver csv line " << lineno << ": cannot parse numeric field";
            throw std::invalid_argument(msg.str());
        }
    }
    return piecewise_linear(std::move(times), std::move(values), d, alpha_hint);
}

void DrivingPath::check_time(double t) const {
    const double slack = 1e-9 * std::max(1.0, horizon_);
    if (t < -slack || t > horizon_ + slack)
        throw std::invalid_argument("time outside the path domain [0,T]");
}

void DrivingPath::value_into(double t, double* out) const {
    check_time(t);
    if (kind_ == Kind::Analytic) {
        value_fn_(t, out);
        return;
    }
    const int seg = segment_of(t);
    const double dt = t - times_[seg];
    for (int c = 0; c < dim_; ++c)
        out[c] = values_[static_cast<size_t>(seg) * dim_ + c] +
                 slopes_[static_cast<size_t>(seg) * dim_ + c] * dt;
}

void DrivingPath::derivative_into(double t, double* out) const {
    check_time(t);
    if (kind_ == Kind::Analytic) {
        derivative_fn_(t, out);
        return;
    }
    const int seg = segment_of(t);
    for (int c = 0; c < dim_; ++c) out[c] = slopes_[static_cast<size_t>(seg) * dim_ + c];
}

Tensor DrivingPath::value(double t) const {
    Tensor out({dim_});
    value_into(t, out.data());
    return out;
}

Tensor DrivingPath::derivative(double t) const {
    Tensor out({dim_});
    derivative_into(t, out.data());
    return out;
}

Tensor DrivingPath::increment(double s, double t) const {
    if (s > t + 1e-9 * std::max(1.0, horizon_))
        throw std::invalid_argument("increment requires s <= t");
    Tensor a({dim_}), b({dim_});
    value_into(s, a.data());
    value_into(t, b.data());
    b -= a;
    return b;
}

const std::vector<double>& DrivingPath::times() const {
    if (kind_ != Kind::PiecewiseLinear)
        throw std::logic_error("analytic paths have no sample times");
    return times_;
}

int DrivingPath::segment_count() const {
    if (kind_ != Kind::PiecewiseLinear) throw std::logic_error("analytic paths have no segments");
    return static_cast<int>(times_.size()) - 1;
}

int DrivingPath::segment_of(double t) const {
    if (kind_ != Kind::PiecewiseLinear) throw std::logic_error("analytic paths have no segments");
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    int seg = static_cast<int>(it - times_.begin()) - 1;
    seg = std::clamp(seg, 0, static_cast<int>(times_.size()) - 2);
    return seg;
}

double DrivingPath::segment_slope(int seg, int comp) const {
    if (kind_ != Kind::PiecewiseLinear) throw std::logic_error("analytic paths have no segments");
    if (seg < 0 || seg >= segment_count()) throw std::out_of_range("segment index out of range");
    if (comp < 0 || comp >= dim_) throw std::out_of_range("component index out of range");
    return slopes_[static_cast<size_t>(seg) * dim_ + comp];
}

double DrivingPath::holder_norm(double alpha, const TimeGrid& grid) const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0,1]");
    const int n = grid.size();
    std::vector<double> vals(static_cast<size_t>(n) * dim_);
    for (int i = 0; i < n; ++i) value_into(grid[i], vals.data() + static_cast<size_t>(i) * dim_);
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double sq = 0.0;
            for (int c = 0; c < dim_; ++c) {
                const double diff = vals[static_cast<size_t>(j) * dim_ + c] -
                                    vals[static_cast<size_t>(i) * dim_ + c];
                sq += diff * diff;
            }
            const double ratio = std::sqrt(sq) / std::pow(grid[j] - grid[i], alpha);
            best = std::max(best, ratio);
        }
    }
    return best;
}

namespace {

// mt19937_64 + explicit Box-Muller so sampled paths are identical across platforms.
class GaussianDraw {
public:
    explicit GaussianDraw(std::uint64_t seed) : gen_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    double uniform01() {
        return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
    }

    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace

DrivingPath sample_fbm(double hurst, int n, std::uint64_t seed, double horizon) {
    if (!(hurst > 0.0 && hurst < 1.0)) throw std::invalid_argument("hurst must lie in (0,1)");
    if (n < 1 || n > (1 << 16)) throw std::invalid_argument("fbm sample count out of range [1, 65536]");
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");

    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) t[i] = horizon * (i + 1) / n;

    // Covariance of fBm at t_1..t_n, then its lower Cholesky factor in place.
    const double h2 = 2.0 * hurst;
    std::vector<double> L(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j)
            L[static_cast<size_t>(i) * n + j] =
                0.5 * (std::pow(t[i], h2) + std::pow(t[j], h2) - std::pow(t[i] - t[j], h2));
    for (int j = 0; j < n; ++j) {
        double diag = L[static_cast<size_t>(j) * n + j];
        for (int k = 0; k < j; ++k) {
            const double v = L[static_cast<size_t>(j) * n + k];
            diag -= v * v;
        }
        if (!(diag > 0.0)) {
            std::ostringstream msg;
            msg << "fbm covariance is numerically not positive definite at pivot " << j
                << " (value " << diag << "); reduce n or move hurst away from the endpoints";
            throw NumericalError("covariance_not_pd", msg.str());
        }
        const double root = std::sqrt(diag);
        L[static_cast<size_t>(j) * n + j] = root;
        for (int i = j + 1; i < n; ++i) {
            double v = L[static_cast<size_t>(i) * n + j];
            for (int k = 0; k < j; ++k)
                v -= L[static_cast<size_t>(i) * n + k] * L[static_cast<size_t>(j) * n + k];
            L[static_cast<size_t>(i) * n + j] = v / root;
        }
    }

    GaussianDraw draw(seed);
    std::vector<double> z(n);
    for (int i = 0; i < n; ++i) z[i] = draw.next();

    std::vector<double> times(n + 1), values(n + 1);
    times[0] = 0.0;
    values[0] = 0.0;
    for (int i = 0; i < n; ++i) {
        times[i + 1] = t[i];
        double x = 0.0;
        for (int j = 0; j <= i; ++j) x += L[static_cast<size_t>(i) * n + j] * z[j];
        values[i + 1] = x;
    }
    return DrivingPath::piecewise_linear(std::move(times), std::move(values), 1, hurst);
}

}  // namespace volterra
