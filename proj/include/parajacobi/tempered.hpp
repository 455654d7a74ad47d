#pragma once

#include "error.hpp"
#include "family.hpp"
#include "parabolic.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace parajacobi {

struct LimitOptions {
    Index window = 64;        // samples per checkpoint window, per residue
    double spread_tol = 0.25; // relative spread of the last two windows that counts as non-convergent
};

struct LimitEstimate {
    double value = 0.0;
    double last_window = 0.0; // plain average of the last window
    double spread = 0.0;      // |A3 - A2|
    double ratio = 0.0;       // (A3 - A2)/(A2 - A1); nan when undefined
    double tolerance = 0.0;   // max(1e-3, spread)
    Index checkpoint = 0;     // centre of the last window
    bool extrapolated = false;
};

namespace detail {

template <class Term>
double window_average(Term&& term, Index centre, Index residue, Index N, Index K) {
    Index start = centre - (K / 2) * N;
    start += mod_index(residue - start, N);
    double s = 0.0;
    for (Index k = 0; k < K; ++k) s += term(start + k * N);
    return s / static_cast<double>(K);
}

} // namespace detail

// Averages over windows centred at c/4, c/2, c (one residue class mod N), then a single
// Aitken step across the geometric checkpoints. Pure power-law corrections n^-p are
// removed exactly for any p > 0, which covers 1/n and the slower rates of bd_power.
template <class Term>
LimitEstimate extract_limit(Term&& term, Index residue, Index N, Index n_max, const LimitOptions& opt = {}) {
    const Index half = (opt.window / 2 + 1) * N;
    const Index c3 = n_max - half;
    if (c3 / 4 < half + 1)
        throw Error(ErrorKind::extraction, "n_max " + std::to_string(n_max) + " too small for the checkpoint windows");
    const double A1 = detail::window_average(term, c3 / 4, residue, N, opt.window);
    const double A2 = detail::window_average(term, c3 / 2, residue, N, opt.window);
    const double A3 = detail::window_average(term, c3, residue, N, opt.window);
    LimitEstimate e;
    e.checkpoint = c3;
    e.last_window = A3;
    e.value = A3;
    const double d1 = A2 - A1, d2 = A3 - A2;
    const double scale = std::max(1.0, std::abs(A3));
    e.spread = std::abs(d2);
    e.tolerance = std::max(1e-3, e.spread);
    e.ratio = d1 != 0.0 ? d2 / d1 : std::numeric_limits<double>::quiet_NaN();
    if (!std::isfinite(A1) || !std::isfinite(A2) || !std::isfinite(A3))
        throw Error(ErrorKind::extraction, "non-finite window average");
    if (std::abs(d2) <= 1e-13 * scale || d1 == 0.0) return e;
    if (e.ratio > 0.0 && e.ratio < 1.0) {
        e.value = A3 + d2 * e.ratio / (1.0 - e.ratio);
        e.extrapolated = true;
    } else if (e.ratio >= 1.0 && std::abs(d2) > 1e-3 * scale) {
        throw Error(ErrorKind::extraction, "tail is not contracting: checkpoint ratio " + std::to_string(e.ratio) +
                                               ", spread " + std::to_string(e.spread));
    }
    // A ratio this close to 1 is a decay slower than n^-0.04 (or none at all, e.g. log n);
    // the extrapolated correction would dwarf the spread.
    if (e.extrapolated && e.ratio > 0.97 && std::abs(d2) > 1e-3 * scale) {
        throw Error(ErrorKind::extraction, "tail is not contracting: checkpoint ratio " + std::to_string(e.ratio) +
                                               ", spread " + std::to_string(e.spread));
    }
    if (e.spread / scale > opt.spread_tol)
        throw Error(ErrorKind::extraction, "relative spread " + std::to_string(e.spread / scale) + " exceeds tolerance");
    return e;
}

struct TemperedLimits {
    std::vector<double> s, r, u;
    double t_raw = 0.0;
    int t = 0;
    double S = 0.0, U = 0.0;
    double S_direct = 0.0, U_direct = 0.0;
    int epsilon = 1;
    double trace_derivative = 0.0;
    double tau_slope = 0.0;
    double tau_intercept = 0.0;
    std::optional<double> x0;
    std::vector<double> alpha; // alpha_{i-1} lookup is done through this copy
    Index n_max = 0;
    Index checkpoint = 0;
    double max_spread = 0.0;
    std::vector<std::string> notes;

    Index period() const { return static_cast<Index>(alpha.size()); }
    double alpha_at(Index n) const { return alpha[static_cast<std::size_t>(mod_index(n, period()))]; }
};

inline double tau(const TemperedLimits& L, double x) { return L.tau_slope * x + L.tau_intercept; }

// upsilon = S^2/4 - tau, the combination entering the limit matrix of R_j.
inline double upsilon(const TemperedLimits& L, double x) { return 0.25 * L.S * L.S - tau(L, x); }

struct LimitSequences {
    const FamilyDescriptor& fam;
    const ParabolicDecomposition& d;

    double diff_a(Index n) const { return fam.alpha(n - 1) / fam.alpha(n) - fam.a(n - 1) / fam.a(n); }
    double diff_b(Index n) const { return fam.beta(n) / fam.alpha(n) - fam.b(n) / fam.a(n); }
    double s(Index n) const { return std::sqrt(fam.alpha(n) * fam.gamma(n)) * diff_a(n); }
    double r(Index n) const { return std::sqrt(fam.alpha(n) * fam.gamma(n)) * diff_b(n); }
    double t(Index n) const { return fam.gamma(n) / fam.a(n); }
    double u(Index n) const {
        const Matrix2& X = d.X(n);
        const double e = d.epsilon;
        const double g = fam.gamma(n);
        return g * (1.0 - e * X.m11) * diff_a(n) - g * e * X.m21 * diff_b(n);
    }
};

inline TemperedLimits estimate_limits(const FamilyDescriptor& fam, const ParabolicDecomposition& d, Index n_max,
                                      const LimitOptions& opt = {}) {
    if (n_max < 1000) throw Error(ErrorKind::config, "n_max must be at least 1000");
    const Index N = fam.period();
    LimitSequences q{fam, d};
    TemperedLimits L;
    L.n_max = n_max;
    L.epsilon = d.epsilon;
    L.trace_derivative = d.trace_derivative;
    L.alpha = fam.periodic.alpha;
    L.s.resize(N);
    L.r.resize(N);
    L.u.resize(N);
    double t_acc = 0.0;
    auto track = [&](const LimitEstimate& e) {
        L.max_spread = std::max(L.max_spread, e.spread);
        L.checkpoint = e.checkpoint;
        return e.value;
    };
    for (Index i = 0; i < N; ++i) {
        L.s[i] = track(extract_limit([&](Index n) { return q.s(n); }, i, N, n_max, opt));
        L.r[i] = track(extract_limit([&](Index n) { return q.r(n); }, i, N, n_max, opt));
        L.u[i] = track(extract_limit([&](Index n) { return q.u(n); }, i, N, n_max, opt));
        t_acc += track(extract_limit([&](Index n) { return q.t(n); }, i, N, n_max, opt));
        L.S += L.s[i] / fam.alpha(i - 1);
        L.U += L.u[i] / fam.alpha(i - 1);
    }
    L.t_raw = t_acc / static_cast<double>(N);
    if (L.t_raw >= 0.1 && L.t_raw <= 0.9)
        throw Error(ErrorKind::extraction, "limit of gamma/a is " + std::to_string(L.t_raw) + ", expected 0 or 1");
    L.t = L.t_raw < 0.5 ? 0 : 1;

    // Aggregate limits taken over a full period at once, as a cross-check of the residue sums.
    L.S_direct = extract_limit([&](Index n) {
        double acc = 0.0;
        for (Index k = 0; k < N; ++k) acc += q.s(n + k) / fam.alpha(n + k - 1);
        return acc;
    }, 0, N, n_max - N, opt).value;
    L.U_direct = extract_limit([&](Index n) {
        double acc = 0.0;
        for (Index k = 0; k < N; ++k) acc += q.u(n + k) / fam.alpha(n + k - 1);
        return acc;
    }, 0, N, n_max - N, opt).value;

    L.tau_slope = L.t * d.epsilon * d.trace_derivative;
    L.tau_intercept = 0.25 * L.S * L.S + L.U;
    if (L.t != 0 && L.tau_slope != 0.0) L.x0 = -L.tau_intercept / L.tau_slope;
    if (L.t == 1) L.notes.push_back("t = 1: gamma kept as supplied, not replaced by a");
    return L;
}

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool contains(double x) const { return x > lo && x < hi; }
};

// Finite union of open intervals.
struct IntervalSet {
    std::vector<Interval> parts;
    bool empty() const { return parts.empty(); }
    bool contains(double x) const {
        for (const auto& p : parts)
            if (p.contains(x)) return true;
        return false;
    }
    bool whole_line() const {
        return parts.size() == 1 && std::isinf(parts[0].lo) && std::isinf(parts[0].hi);
    }
    std::string describe() const {
        if (parts.empty()) return "empty";
        std::string s;
        auto fmt = [](double v) {
            if (std::isinf(v)) return std::string(v < 0 ? "-inf" : "inf");
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6g", v);
            return std::string(buf);
        };
        for (std::size_t k = 0; k < parts.size(); ++k) {
            if (k) s += " u ";
            s += "(" + fmt(parts[k].lo) + ", " + fmt(parts[k].hi) + ")";
        }
        return s;
    }
};

struct TauPolynomial {
    double slope = 0.0;
    double intercept = 0.0;
    IntervalSet lambda_minus;
    IntervalSet lambda_plus;
    std::optional<double> x0;

    double operator()(double x) const { return slope * x + intercept; }
};

inline TauPolynomial lambda_sets(const TemperedLimits& L, double zero_tol = 1e-6) {
    TauPolynomial p;
    // Coefficients within zero_tol of 0 are extraction noise and are snapped.
    p.slope = std::abs(L.tau_slope) <= zero_tol ? 0.0 : L.tau_slope;
    p.intercept = std::abs(L.tau_intercept) <= zero_tol ? 0.0 : L.tau_intercept;
    const Interval all{};
    if (p.slope == 0.0 && p.intercept == 0.0) throw Error(ErrorKind::out_of_scope, "tau vanishes identically");
    if (p.slope == 0.0) {
        (p.intercept < 0 ? p.lambda_minus : p.lambda_plus).parts.push_back(all);
        return p;
    }
    const double x0 = 0.0 - p.intercept / p.slope;
    p.x0 = x0;
    const Interval left{-std::numeric_limits<double>::infinity(), x0};
    const Interval right{x0, std::numeric_limits<double>::infinity()};
    if (p.slope < 0) {
        p.lambda_minus.parts.push_back(right);
        p.lambda_plus.parts.push_back(left);
    } else {
        p.lambda_minus.parts.push_back(left);
        p.lambda_plus.parts.push_back(right);
    }
    return p;
}

struct D1Report {
    std::vector<WindowSums> residues;
    bool pass = true;
};

// Per-residue sums of |x_{n+N} - x_n| over doubling windows; monotone decay passes.
inline D1Report d1n_diagnostic(const IndexFn& seq, Index N, int windows, Index first = 64) {
    D1Report r;
    const Index n_max = first << windows;
    for (Index i = 0; i < N; ++i) {
        auto term = [&](Index n) { return mod_index(n, N) == i ? std::abs(seq(n + N) - seq(n)) : 0.0; };
        auto w = doubling_window_sums(term, first, n_max);
        r.pass = r.pass && w.decaying;
        r.residues.push_back(std::move(w));
    }
    return r;
}

struct SCheck {
    std::vector<LimitEstimate> per_residue;
    double residual = 0.0;
    double estimate = 0.0;
};

// Compares S with the limit of sqrt(gamma_n/alpha_n)(1 - a_n/a_{n+N}).
inline SCheck frak_S_check(const FamilyDescriptor& fam, const TemperedLimits& L, Index n_max) {
    SCheck c;
    const Index N = fam.period();
    for (Index i = 0; i < N; ++i) {
        auto e = extract_limit([&](Index n) {
            return std::sqrt(fam.gamma(n) / fam.alpha(n)) * (1.0 - fam.a(n) / fam.a(n + N));
        }, i, N, n_max - N);
        c.residual = std::max(c.residual, std::abs(L.S - e.value));
        c.estimate += e.value / static_cast<double>(N);
        c.per_residue.push_back(e);
    }
    return c;
}

// kappa = lim delta_n (1 - hat_a_{n-1}/hat_a_n) for Kostyuchenko-Mirzoev data.
inline LimitEstimate km_kappa(const IndexFn& hat_a, const IndexFn& delta, Index n_max) {
    return extract_limit([&](Index n) { return delta(n) * (1.0 - hat_a(n - 1) / hat_a(n)); }, 0, 1, n_max);
}

} // namespace parajacobi
