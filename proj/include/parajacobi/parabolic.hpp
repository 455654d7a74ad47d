#pragma once

#include "error.hpp"
#include "family.hpp"
#include "mat2.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace parajacobi {

enum class Case { I, IIa, IIb, III };

inline const char* to_string(Case c) {
    switch (c) {
    case Case::I: return "I";
    case Case::IIa: return "IIa";
    case Case::IIb: return "IIb";
    case Case::III: return "III";
    }
    return "?";
}

inline Matrix2 frak_B(const PeriodicData& p, Index n, double x) {
    const double an = p.alpha_at(n);
    return {0.0, 1.0, -p.alpha_at(n - 1) / an, (x - p.beta_at(n)) / an};
}

// Product of B_j(x) over one period j = n .. n+N-1, latest factor on the left.
inline Matrix2 frak_X(const PeriodicData& p, Index n, double x) {
    return ordered_product([&](Index j) { return frak_B(p, j, x); }, n, n + p.period() - 1);
}

struct Classification {
    Case kase = Case::I;
    double trace = 0.0;
    double trace_gap = 0.0;      // | |tr| - 2 |
    double scalar_distance = 0.0; // max-abs distance to the nearer of +Id, -Id
};

// |tr| decides I / II / III. Inside II, a matrix within tol of +-Id is IIa, one farther
// than 2 tol is IIb; the band in between is reported as ambiguous.
inline Classification classify_detail(const PeriodicData& p, double tol = 1e-9) {
    const Matrix2 X = frak_X(p, 0, 0.0);
    Classification c;
    c.trace = X.trace();
    c.trace_gap = std::abs(std::abs(c.trace) - 2.0);
    c.scalar_distance = std::min(distance(X, Matrix2::identity()), distance(X, -Matrix2::identity()));
    if (std::abs(c.trace) < 2.0 - tol) c.kase = Case::I;
    else if (std::abs(c.trace) > 2.0 + tol) c.kase = Case::III;
    else if (c.scalar_distance <= tol) c.kase = Case::IIa;
    else if (c.scalar_distance > 2.0 * tol) c.kase = Case::IIb;
    else
        throw Error(ErrorKind::ambiguity, "cannot separate IIa from IIb: trace gap " + std::to_string(c.trace_gap) +
                                              ", distance to scalar " + std::to_string(c.scalar_distance));
    return c;
}

inline Case classify(const PeriodicData& p, double tol = 1e-9) { return classify_detail(p, tol).kase; }

struct ParabolicDecomposition {
    PeriodicData periodic;
    int epsilon = 1;
    Matrix2 X0;
    std::vector<Matrix2> T;
    std::vector<Matrix2> Xi;
    Case kase = Case::IIb;
    double trace_derivative = 0.0;

    Index period() const { return periodic.period(); }
    const Matrix2& X(Index i) const { return Xi[static_cast<std::size_t>(mod_index(i, period()))]; }
    const Matrix2& Tm(Index i) const { return T[static_cast<std::size_t>(mod_index(i, period()))]; }
};

// Canonical T_0 = [t1 | t2] with eps X_0(0) T_0 = T_0 J. s spans ker(eps X_0(0) - Id) and is
// scaled so its first nonzero coordinate is 1; t2 is the minimal-norm solution of
// (eps X_0(0) - Id) t2 = s and t1 = s - t2.
inline Matrix2 canonical_T0(const Matrix2& X0, int epsilon) {
    const Matrix2 Nm = double(epsilon) * X0 - Matrix2::identity();
    Vec2 s;
    if (std::abs(Nm.m11) + std::abs(Nm.m12) >= std::abs(Nm.m21) + std::abs(Nm.m22)) s = {Nm.m12, -Nm.m11};
    else s = {Nm.m22, -Nm.m21};
    const double scale = norm(s);
    if (!(scale > 0.0)) throw Error(ErrorKind::unsupported_case, "period matrix is scalar, no Jordan direction");
    const double lead = std::abs(s.x) > 1e-12 * scale ? s.x : s.y;
    s = (1.0 / lead) * s;
    const double f2 = Nm.m11 * Nm.m11 + Nm.m12 * Nm.m12 + Nm.m21 * Nm.m21 + Nm.m22 * Nm.m22;
    // For rank-one Nm the pseudo-inverse is Nm^t / |Nm|_F^2.
    const Vec2 t2 = (1.0 / f2) * (Nm.transpose() * s);
    const Vec2 t1 = s - t2;
    return {t1.x, t2.x, t1.y, t2.y};
}

inline std::vector<Matrix2> conjugator_T(const PeriodicData& p, const Matrix2& X0, int epsilon) {
    std::vector<Matrix2> T(static_cast<std::size_t>(p.period()));
    T[0] = canonical_T0(X0, epsilon);
    for (Index i = 1; i < p.period(); ++i) T[i] = frak_B(p, i - 1, 0.0) * T[i - 1];
    return T;
}

struct TraceDerivative {
    double closed = 0.0;
    double finite_difference = 0.0;
};

// tr X_0'(0) = -sum_i [X_i(0)]_21 / alpha_{i-1}, checked against a central difference.
inline TraceDerivative trace_derivative_detail(const PeriodicData& p) {
    TraceDerivative r;
    for (Index i = 0; i < p.period(); ++i) r.closed -= frak_X(p, i, 0.0).m21 / p.alpha_at(i - 1);
    const double h = 1e-6;
    r.finite_difference = (frak_X(p, 0, h).trace() - frak_X(p, 0, -h).trace()) / (2.0 * h);
    if (std::abs(r.closed - r.finite_difference) > 1e-5 * std::max(1.0, std::abs(r.closed)))
        throw Error(ErrorKind::consistency, "trace derivative: closed sum " + std::to_string(r.closed) +
                                                " vs finite difference " + std::to_string(r.finite_difference));
    return r;
}

inline double trace_derivative(const PeriodicData& p) { return trace_derivative_detail(p).closed; }

inline ParabolicDecomposition decompose(const PeriodicData& p, double tol = 1e-9) {
    ParabolicDecomposition d;
    d.periodic = p;
    d.kase = classify(p, tol);
    if (d.kase != Case::IIb)
        throw Error(ErrorKind::unsupported_case, std::string("period matrix is case ") + to_string(d.kase) + ", need IIb");
    d.X0 = frak_X(p, 0, 0.0);
    d.epsilon = d.X0.trace() > 0 ? 1 : -1;
    for (Index i = 0; i < p.period(); ++i) d.Xi.push_back(frak_X(p, i, 0.0));
    d.T = conjugator_T(p, d.X0, d.epsilon);
    d.trace_derivative = trace_derivative(p);
    return d;
}

struct ConjugatorResiduals {
    double reconstruction = 0.0; // max_i |X_i(0) - eps T_i J T_i^{-1}|
    double identity33 = 0.0;     // ([T]11+[T]12)([T]21+[T]22)/det T - (1 - eps [X_i]11)
    double identity34 = 0.0;     // ([T]21+[T]22)^2/det T + eps [X_i]21
};

inline ConjugatorResiduals conjugator_residuals(const ParabolicDecomposition& d) {
    ConjugatorResiduals r;
    const double e = d.epsilon;
    for (Index i = 0; i < d.period(); ++i) {
        const Matrix2& T = d.Tm(i);
        const Matrix2& X = d.X(i);
        r.reconstruction = std::max(r.reconstruction, distance(X, e * (T * Matrix2::J() * T.inverse())));
        const double dt = T.det();
        const double top = T.m11 + T.m12, bot = T.m21 + T.m22;
        r.identity33 = std::max(r.identity33, std::abs(top * bot / dt - (1.0 - e * X.m11)));
        r.identity34 = std::max(r.identity34, std::abs(bot * bot / dt + e * X.m21));
    }
    return r;
}

// w_k = (-1)^k (ta_0 ta_2 ... ta_{2k-2}) / (ta_1 ta_3 ... ta_{2k-1}), indices mod 2N.
inline std::vector<double> tilde_weights(const std::vector<double>& ta, Index n) {
    const Index M = static_cast<Index>(ta.size());
    std::vector<double> w(static_cast<std::size_t>(n + 1));
    w[0] = 1.0;
    for (Index k = 1; k <= n; ++k)
        w[k] = -w[k - 1] * ta[mod_index(2 * k - 2, M)] / ta[mod_index(2 * k - 1, M)];
    return w;
}

// Closed form of the periodic orthogonal polynomial at zero for tilde data.
inline double periodic_poly_at_zero(const std::vector<double>& ta, Index n) {
    const auto w = tilde_weights(ta, n);
    double s = 0.0;
    for (double v : w) s += v * v;
    const Index M = static_cast<Index>(ta.size());
    return ta[0] / (ta[mod_index(2 * n, M)] * w[n]) * s;
}

// Three-term recurrence alpha_n p_{n+1} = (x - beta_n) p_n - alpha_{n-1} p_{n-1}, p_{-1} = 0.
inline double periodic_poly(const PeriodicData& p, Index n, double x) {
    double prev = 0.0, cur = 1.0;
    for (Index k = 0; k < n; ++k) {
        const double next = ((x - p.beta_at(k)) * cur - (k > 0 ? p.alpha_at(k - 1) * prev : 0.0)) / p.alpha_at(k);
        prev = cur;
        cur = next;
    }
    return cur;
}

inline double bd_identity_check(const std::vector<double>& ta) {
    const PeriodicData p = tilde_periodic(ta);
    const Index N = p.period();
    const Index M = static_cast<Index>(ta.size());
    const double e = (N % 2 == 0) ? 1.0 : -1.0;
    double worst = 0.0;
    for (Index n = 0; n < N; ++n) {
        const Matrix2 X = frak_X(p, n, 0.0);
        const double t0 = ta[mod_index(2 * n, M)], t1 = ta[mod_index(2 * n + 1, M)], t2 = ta[mod_index(2 * n + 2, M)];
        const double lhs = (1.0 - e * X.m11) * p.alpha_at(n - 1) / p.alpha_at(n) - t0 * t0 / (t1 * t2) * e * X.m21;
        worst = std::max(worst, std::abs(lhs));
    }
    return worst;
}

// Closed form of tr X_0'(0) for balanced tilde data.
inline double bd_trace_derivative(const std::vector<double>& ta) {
    const PeriodicData p = tilde_periodic(ta);
    const Index N = p.period();
    const Index M = static_cast<Index>(ta.size());
    const double e = (N % 2 == 0) ? 1.0 : -1.0;
    auto t = [&](Index k) { return ta[mod_index(k, M)]; };
    double total = 0.0;
    for (Index i = 0; i < N; ++i) {
        double inner = 0.0, ratio = 1.0;
        for (Index k = 0; k < N; ++k) {
            inner += ratio * ratio;
            ratio *= t(2 * i + 2 * k) / t(2 * i + 2 * k + 1);
        }
        // Weighted by 1/alpha_{i-1}; weighting by 1/alpha_i disagrees with the trace derivative once N >= 2.
        total += inner * t(2 * i) / (t(2 * i - 1) * p.alpha_at(i - 1));
    }
    return -e * total;
}

} // namespace parajacobi
