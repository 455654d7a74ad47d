#pragma once

#include "csv.hpp"
#include "family.hpp"
#include "mat2.hpp"

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

namespace parajacobi {

// Uses a_{-1} := 1 in B_0 whatever the family's own convention for b_0.
inline Matrix2 transfer_B(const FamilyDescriptor& fam, Index n, double x) {
    const double an = fam.a(n);
    const double am = n == 0 ? 1.0 : fam.a(n - 1);
    return {0.0, 1.0, -am / an, (x - fam.b(n)) / an};
}

inline Matrix2 transfer_X(const FamilyDescriptor& fam, Index n, double x) {
    return ordered_product([&](Index k) { return transfer_B(fam, k, x); }, n, n + fam.period() - 1);
}

// gamma_{(j+1)N+i-1} discr X_{jN+i}(x); tends to 4 tau(x) alpha_{i-1}.
inline double scaled_discriminant(const FamilyDescriptor& fam, Index i, Index j, double x) {
    const Index N = fam.period();
    return fam.gamma((j + 1) * N + i - 1) * discr(transfer_X(fam, j * N + i, x));
}

struct TraceOptions {
    bool log_tracking = false;
};

struct EigenTrace {
    double x = 0.0;
    double eta_angle = 0.0;
    Vec2 eta;
    std::vector<double> u;          // u_0 .. u_n, scaled by exp(log_scale[n]) when tracking
    std::vector<double> log_scale;  // empty unless log tracking is on
    Index overflow_index = -1;      // first index that would have overflowed, -1 if none
    std::string family_label;

    Index size() const { return static_cast<Index>(u.size()); }
    bool truncated() const { return overflow_index >= 0; }
    double log_scale_at(Index n) const { return log_scale.empty() ? 0.0 : log_scale[static_cast<std::size_t>(n)]; }
    // True value u_n (may overflow when log tracking was needed).
    double value(Index n) const {
        return log_scale.empty() ? u[static_cast<std::size_t>(n)] : u[static_cast<std::size_t>(n)] * std::exp(log_scale[n]);
    }
    // u_{-1} slot, i.e. the first component of eta.
    double before_start() const { return eta.x; }
    // The vector (u_{n-1}, u_n) with u_{-1} = eta_1.
    Vec2 vec(Index n) const { return n == 0 ? eta : Vec2{value(n - 1), value(n)}; }
};

// Generalized eigenvector with initial vector eta = (cos, sin): u_{-1} = eta_1, u_0 = eta_2,
// a_n u_{n+1} = (x - b_n) u_n - a_{n-1} u_{n-1}.
inline EigenTrace eigenvector_trace(const FamilyDescriptor& fam, Vec2 eta, double x, Index n_max,
                                    const TraceOptions& opt = {}) {
    EigenTrace t;
    t.x = x;
    t.eta_angle = std::atan2(eta.y, eta.x);
    t.eta = eta;
    t.family_label = fam.label;
    t.u.reserve(static_cast<std::size_t>(n_max + 1));
    if (opt.log_tracking) t.log_scale.reserve(static_cast<std::size_t>(n_max + 1));
    double prev = t.eta.x, cur = t.eta.y, L = 0.0;
    t.u.push_back(cur);
    if (opt.log_tracking) t.log_scale.push_back(0.0);
    for (Index n = 0; n < n_max; ++n) {
        const double am = n == 0 ? 1.0 : fam.a(n - 1);
        const double next = ((x - fam.b(n)) * cur - am * prev) / fam.a(n);
        prev = cur;
        cur = next;
        if (opt.log_tracking) {
            const double m = std::max(std::abs(prev), std::abs(cur));
            if (m > 1e100 || (m < 1e-100 && m > 0.0)) {
                prev /= m;
                cur /= m;
                L += std::log(m);
            }
            t.u.push_back(cur);
            t.log_scale.push_back(L);
        } else {
            if (!std::isfinite(cur) || std::abs(cur) > 1e300) {
                t.overflow_index = n + 1;
                break;
            }
            t.u.push_back(cur);
        }
    }
    return t;
}

inline EigenTrace eigenvector_trace(const FamilyDescriptor& fam, double eta_angle, double x, Index n_max,
                                    const TraceOptions& opt = {}) {
    auto t = eigenvector_trace(fam, Vec2{std::cos(eta_angle), std::sin(eta_angle)}, x, n_max, opt);
    t.eta_angle = eta_angle;
    return t;
}

// p_n(x), the trace started from eta = e_2.
inline double orthopoly(const FamilyDescriptor& fam, double x, Index n) {
    const auto t = eigenvector_trace(fam, Vec2{0.0, 1.0}, x, n);
    return t.value(n);
}

// max over interior n of |a_n u_{n+1} + b_n u_n + a_{n-1} u_{n-1} - x u_n| / local scale.
inline double recurrence_residual(const FamilyDescriptor& fam, const EigenTrace& t) {
    double worst = 0.0;
    for (Index n = 0; n + 1 < t.size(); ++n) {
        const double am = n == 0 ? 1.0 : fam.a(n - 1);
        const double um = n == 0 ? t.before_start() : t.value(n - 1);
        const double c1 = fam.a(n) * t.value(n + 1), c2 = fam.b(n) * t.value(n), c3 = am * um, c4 = t.x * t.value(n);
        const double scale = std::abs(c1) + std::abs(c2) + std::abs(c3) + std::abs(c4);
        if (scale > 0) worst = std::max(worst, std::abs(c1 + c2 + c3 - c4) / scale);
    }
    return worst;
}

inline void write_trace_csv(std::ostream& os, const EigenTrace& t) {
    CsvWriter w(os, {"n", "u_n", "log_scale", "flags"});
    for (Index n = 0; n < t.size(); ++n) {
        const bool last = n + 1 == t.size();
        w.row(static_cast<long long>(n), t.u[n], t.log_scale_at(n), std::string(last && t.truncated() ? "overflow" : ""));
    }
}

} // namespace parajacobi
