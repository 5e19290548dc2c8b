#include "volterra/kernel.hpp"

#include <cmath>
#include <stdexcept>

#include "volterra/parallel.hpp"

namespace volterra {

Kernel::Kernel(KernelFamily f, double gamma, double lambda, std::string name)
    : family_(f), gamma_(gamma), lambda_(lambda), name_(std::move(name)) {}

Kernel Kernel::fractional(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("fractional kernel requires gamma in (0,1)");
    return Kernel(KernelFamily::Fractional, gamma, 0.0, "fractional");
}

Kernel Kernel::constant() { return Kernel(KernelFamily::Constant, 0.0, 0.0, "constant"); }

Kernel Kernel::damped_fractional(double gamma, double lambda) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("damped_fractional kernel requires gamma in (0,1)");
    if (!(lambda >= 0.0)) throw std::invalid_argument("damping rate must be nonnegative");
    return Kernel(KernelFamily::DampedFractional, gamma, lambda, "damped_fractional");
}

double Kernel::eval_dist(double dist) const {
    switch (family_) {
        case KernelFamily::Constant:
            return 1.0;
        case KernelFamily::Fractional:
            if (!(dist > 0.0)) throw std::invalid_argument("kernel evaluated at or past the diagonal");
            return std::pow(dist, -gamma_);
        case KernelFamily::DampedFractional:
            if (!(dist > 0.0)) throw std::invalid_argument("kernel evaluated at or past the diagonal");
            return std::pow(dist, -gamma_) * std::exp(-lambda_ * dist);
    }
    return 0.0;
}

bool Kernel::has_primitive() const { return family_ != KernelFamily::DampedFractional; }

double Kernel::moment0(double tau, double a, double b) const {
    if (!(a <= b)) throw std::invalid_argument("moment0 requires a <= b");
    if (!(b <= tau + 1e-14 * std::max(1.0, std::abs(tau))))
        throw std::invalid_argument("moment0 requires b <= tau");
    switch (family_) {
        case KernelFamily::Constant:
            return b - a;
        case KernelFamily::Fractional: {
            const double e = 1.0 - gamma_;
            return (std::pow(tau - a, e) - std::pow(std::max(tau - b, 0.0), e)) / e;
        }
        case KernelFamily::DampedFractional:
            throw std::logic_error("damped_fractional kernel has no closed-form primitive");
    }
    return 0.0;
}

double Kernel::moment1(double tau, double a, double b, double c) const {
    switch (family_) {
        case KernelFamily::Constant: {
            const double wa = a - c, wb = b - c;
            return 0.5 * (wb * wb - wa * wa);
        }
        case KernelFamily::Fractional: {
            // (r - c) = (tau - c) - (tau - r); both pieces have power primitives.
            const double e1 = 1.0 - gamma_;
            const double e2 = 2.0 - gamma_;
            const double da = tau - a;
            const double db = std::max(tau - b, 0.0);
            const double p1 = (std::pow(da, e1) - std::pow(db, e1)) / e1;
            const double p2 = (std::pow(da, e2) - std::pow(db, e2)) / e2;
            return (tau - c) * p1 - p2;
        }
        case KernelFamily::DampedFractional:
            throw std::logic_error("damped_fractional kernel has no closed-form primitive");
    }
    return 0.0;
}

double KernelAuditReport::max_constant() const {
    double m = 0.0;
    for (const auto& b : bounds) m = std::max(m, b.constant);
    return m;
}

namespace {

struct BoundAccum {
    double constant = 0.0;
    std::array<double, 4> tuple{};
    double sweep = 0.0;
    long skipped = 0;

    void offer(double ratio, double s, double r, double q, double tau, double sweep_value) {
        if (ratio > constant) {
            constant = ratio;
            tuple = {s, r, q, tau};
            sweep = sweep_value;
        }
    }
};

}  // namespace

KernelAuditReport audit_kernel_bounds(const Kernel& k, const TimeGrid& grid, int threads) {
    static const double sweep[] = {0.0, 0.25, 0.5, 0.75, 1.0};
    const double T = grid.b() - grid.a();
    const int level = grid.level() >= 0 ? grid.level() : 3;
    const double band = T * std::pow(2.0, -(level + 2));
    const double g = k.order();

    const auto tuples = simplex_tuples(grid.size(), 4, false);
    std::vector<std::array<BoundAccum, 5>> partial(
        static_cast<size_t>(std::max(1, threads)));

    parallel_for(static_cast<int>(tuples.size()), threads, [&](int ti, int slot) {
        auto& acc = partial[static_cast<size_t>(slot)];
        const auto& t4 = tuples[static_cast<size_t>(ti)];
        const double s = grid[t4[0]], r = grid[t4[1]], q = grid[t4[2]], tau = grid[t4[3]];
        if (tau - r < band) {
            for (auto& a : acc) ++a.skipped;
            return;
        }
        const double k_tau_r = k(tau, r);
        const double k_tau_s = k(tau, s);
        // Bound 1: |k(tau,r)| <= C |tau-r|^-gamma.
        acc[0].offer(std::abs(k_tau_r) * std::pow(tau - r, g), s, r, q, tau, 0.0);
        const bool have_q = q > r && tau > q;
        double k_q_r = 0.0, k_q_s = 0.0;
        if (have_q) {
            k_q_r = k(q, r);
            k_q_s = k(q, s);
        }
        const bool have_s = r > s;
        for (double e : sweep) {
            // Bound 2: |k(tau,r)-k(q,r)| <= C |q-r|^-(gamma+eta) |tau-q|^eta.
            if (have_q) {
                const double w2 = std::pow(q - r, -(g + e)) * std::pow(tau - q, e);
                if (w2 > 0.0 && std::isfinite(w2))
                    acc[1].offer(std::abs(k_tau_r - k_q_r) / w2, s, r, q, tau, e);
                else
                    ++acc[1].skipped;
            }
            // Bound 3: |k(tau,r)-k(tau,s)| <= C |tau-r|^-(gamma+eta) |r-s|^eta.
            if (have_s) {
                const double w3 = std::pow(tau - r, -(g + e)) * std::pow(r - s, e);
                if (w3 > 0.0 && std::isfinite(w3))
                    acc[2].offer(std::abs(k_tau_r - k_tau_s) / w3, s, r, q, tau, e);
                else
                    ++acc[2].skipped;
            }
            if (have_q && have_s) {
                const double rect = std::abs(k_tau_r - k_q_r - k_tau_s + k_q_s);
                // Bound 4: rectangle increment <= C |q-r|^-(gamma+beta) |r-s|^beta.
                const double w4 = std::pow(q - r, -(g + e)) * std::pow(r - s, e);
                if (w4 > 0.0 && std::isfinite(w4))
                    acc[3].offer(rect / w4, s, r, q, tau, e);
                else
                    ++acc[3].skipped;
                // Bound 5: rectangle increment <= C |q-r|^-(gamma+eta) |tau-q|^eta.
                const double w5 = std::pow(q - r, -(g + e)) * std::pow(tau - q, e);
                if (w5 > 0.0 && std::isfinite(w5))
                    acc[4].offer(rect / w5, s, r, q, tau, e);
                else
                    ++acc[4].skipped;
            }
        }
    });

    static const char* labels[] = {
        "diagonal", "upper_shift", "lower_shift", "rectangle_lower", "rectangle_upper"};
    KernelAuditReport rep;
    rep.gamma = g;
    rep.band = band;
    for (int b = 0; b < 5; ++b) {
        BoundAccum best;
        for (const auto& slot : partial) {
            const auto& a = slot[static_cast<size_t>(b)];
            best.skipped += a.skipped;
            if (a.constant > best.constant) {
                best.constant = a.constant;
                best.tuple = a.tuple;
                best.sweep = a.sweep;
            }
        }
        rep.bounds.push_back({labels[b], best.constant, best.tuple, best.sweep, best.skipped});
    }
    return rep;
}

}  // namespace volterra
