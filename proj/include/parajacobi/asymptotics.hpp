#pragma once

#include "error.hpp"
#include "evolve.hpp"
#include "family.hpp"
#include "mat2.hpp"
#include "numerics.hpp"
#include "parabolic.hpp"
#include "tempered.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace parajacobi {

// Everything needed to conjugate the N-step transfer matrices along one residue class i at a fixed x.
struct ConjugationContext {
    FamilyDescriptor fam;
    ParabolicDecomposition decomp;
    Index i = 0;
    Index N = 1;
    double x = 0.0;
    double tau_x = 0.0;
    double abs_tau = 0.0;
    double alpha_prev = 1.0; // alpha_{i-1}
    int epsilon = 1;
    Matrix2 T, T_inv;

    double gamma_shift(Index j) const { return fam.gamma((j + 1) * N + i - 1); }
    // theta_j = sqrt(alpha_{i-1} |tau(x)| / gamma_{(j+1)N+i-1})
    double vartheta(Index j) const { return std::sqrt(alpha_prev * abs_tau / gamma_shift(j)); }
    // Scale sqrt(alpha_{i-1} / gamma_{(j+1)N+i-1}) in front of Q_j and R_j.
    double h(Index j) const { return std::sqrt(alpha_prev / gamma_shift(j)); }

    static Matrix2 W(double th) { return {1.0, 1.0, std::exp(th), std::exp(-th)}; }
    static Matrix2 W_inv(double th) {
        const double d = -2.0 * std::sinh(th);
        return {std::exp(-th) / d, -1.0 / d, -std::exp(th) / d, 1.0 / d};
    }
    Matrix2 Z(Index j) const { return T * W(vartheta(j)); }
};

inline ConjugationContext make_context(const FamilyDescriptor& fam, const ParabolicDecomposition& d,
                                       const TemperedLimits& L, Index i, double x) {
    ConjugationContext c;
    c.fam = fam;
    c.decomp = d;
    c.N = fam.period();
    c.i = mod_index(i, c.N);
    c.x = x;
    c.tau_x = tau(L, x);
    c.abs_tau = std::abs(c.tau_x);
    if (!(c.abs_tau > 1e-12))
        throw Error(ErrorKind::singular_point, "tau vanishes at x = " + std::to_string(x));
    c.alpha_prev = fam.alpha(c.i - 1);
    c.epsilon = d.epsilon;
    c.T = d.Tm(c.i);
    c.T_inv = c.T.inverse();
    return c;
}

struct ConjugationStep {
    Index j = 0;
    Index i = 0;
    double vartheta = 0.0;
    double h = 0.0;
    int epsilon = 1;
    Matrix2 Z, Q, R, Y;
};

inline ConjugationStep conjugation_step(const ConjugationContext& c, Index j) {
    ConjugationStep s;
    s.j = j;
    s.i = c.i;
    s.epsilon = c.epsilon;
    const double th = c.vartheta(j), th1 = c.vartheta(j + 1);
    s.vartheta = th;
    s.h = c.h(j);
    s.Z = c.T * ConjugationContext::W(th);
    if (std::abs(s.Z.det()) < 1e-300) throw Error(ErrorKind::underflow, "det Z_j underflows at j = " + std::to_string(j));
    // Z_j^{-1} Z_{j+1} - Id only involves W; differences of exponentials go through expm1.
    const double D = -2.0 * std::sinh(th);
    auto ediff = [](double a, double b) { return std::exp(b) * std::expm1(a - b); };
    const Matrix2 Qh{ediff(th, th1) / D, ediff(-th, -th1) / D, ediff(th1, th) / D, ediff(-th1, -th) / D};
    s.Q = Qh / s.h;
    const Matrix2 X = transfer_X(c.fam, j * c.N + c.i, c.x);
    const Matrix2 G = c.T_inv * X * c.T;
    s.Y = ConjugationContext::W_inv(th1) * G * ConjugationContext::W(th);
    s.R = (double(c.epsilon) * s.Y - Matrix2::identity()) / s.h;
    return s;
}

// Closed-form limit of R_j, built from upsilon = S^2/4 - tau.
inline Matrix2 r_infinity(const TemperedLimits& L, double x) {
    const double t = tau(L, x);
    if (!(std::abs(t) > 1e-14)) throw Error(ErrorKind::singular_point, "tau vanishes at x = " + std::to_string(x));
    const double sq = std::sqrt(std::abs(t));
    const double ups = upsilon(L, x);
    const double S = L.S;
    const Matrix2 A{1.0, -1.0, 1.0, -1.0}, B{1.0, 1.0, -1.0, -1.0}, C{1.0, -1.0, -1.0, 1.0};
    return (0.5 * sq) * A - (ups / (2.0 * sq)) * B - (0.5 * S) * C;
}

struct DiagonalizedStep {
    Index j = 0;
    cplx lambda;
    cplx xi;
    CMatrix2 C;
    double theta = 0.0;
    double cos_arg = 0.0; // tr Y / (2 sqrt(det Y))
    Index j0 = 0;
    double delta = 0.0;
};

inline DiagonalizedStep diagonalize(const ConjugationStep& s, Index j0 = 0, double delta = 0.0) {
    const Matrix2& R = s.R;
    const double dR = discr(R);
    if (!(dR < 0.0)) throw Error(ErrorKind::outside_lambda_minus, "discr R_j >= 0 at j = " + std::to_string(s.j));
    if (R.m12 == 0.0) throw Error(ErrorKind::degenerate, "[R_j]_12 vanishes at j = " + std::to_string(s.j));
    DiagonalizedStep d;
    d.j = s.j;
    d.j0 = j0;
    d.delta = delta;
    d.xi = cplx(0.5 * R.trace(), 0.5 * s.epsilon * std::sqrt(-dR));
    d.lambda = double(s.epsilon) * (1.0 + s.h * d.xi);
    d.C = {1.0, 1.0, (d.xi - R.m11) / R.m12, (std::conj(d.xi) - R.m11) / R.m12};
    const double detY = s.Y.det();
    d.cos_arg = s.Y.trace() / (2.0 * std::sqrt(detY));
    if (std::abs(d.cos_arg) > 1.0 && std::abs(d.cos_arg) - 1.0 > 1e-12)
        throw Error(ErrorKind::j0_too_small, "|tr Y / 2 sqrt(det Y)| exceeds 1 at j = " + std::to_string(s.j));
    // arccos of the clamped argument, evaluated through the eigenvalue for accuracy near +-1;
    // Im lambda > 0 so this lies in (0, pi).
    d.theta = std::atan2(d.lambda.imag(), d.lambda.real());
    return d;
}

// The small angle: theta itself when eps = 1, pi - theta when eps = -1.
inline double reduced_theta(const DiagonalizedStep& d, int epsilon) {
    return epsilon > 0 ? d.theta : std::numbers::pi - d.theta;
}

struct J0Choice {
    Index j0 = -1;
    double delta = 0.0;
};

inline double default_delta(const TemperedLimits& L, double x) {
    const Matrix2 Rinf = r_infinity(L, x);
    return 0.5 * std::min(std::abs(discr(Rinf)) / 4.0, std::abs(Rinf.m12));
}

// Smallest j >= 1 such that the next `run` steps all satisfy discr R < -delta and |R_12| > delta.
inline J0Choice select_j0(const ConjugationContext& c, double delta, Index j_limit, Index run = 32) {
    Index streak = 0;
    for (Index j = 1; j <= j_limit; ++j) {
        const auto s = conjugation_step(c, j);
        if (discr(s.R) < -delta && std::abs(s.R.m12) > delta) {
            if (++streak == run) return {j - run + 1, delta};
        } else {
            streak = 0;
        }
    }
    throw Error(ErrorKind::j0_too_small, "no uniform diagonalization window found up to j = " + std::to_string(j_limit));
}

struct PhaseOptions {
    std::optional<Index> j0;
    std::optional<double> delta;
    double tail_tol = 0.1; // relative drift of phi between the halves of the last quarter
};

struct PhaseAmplitude {
    Index i = 0;
    double x = 0.0;
    double eta_angle = 0.0;
    cplx phi;
    double phi_abs = 0.0;
    double phi_arg = 0.0;
    double phi_abs_C = 0.0;   // amplitude in the sqrt(a/sqrt(gamma)) normalization
    Index j0 = 0;
    double delta = 0.0;
    double alpha_prev = 1.0;
    double abs_tau = 0.0;
    double j0_scale = 0.0;    // a_{j0 N+i-1} sinh(theta_{j0})
    bool degenerate = false;
    std::vector<Index> js;
    std::vector<double> theta_sum;   // sum_{k=j0}^{j-1} theta_k
    std::vector<double> log_prod;    // sum_{k=j0}^{j-1} log|lambda_k|
    std::vector<double> residual;    // E_j, normalized form
    std::vector<double> residual_C;  // E_j, sqrt(a/sqrt(gamma)) form
    std::vector<cplx> phi_series;    // sqrt(gamma_{(j+1)N+i-1}) phi_j
    std::size_t rejected = 0;

    double sup_residual(Index lo, Index hi) const {
        double m = 0.0;
        for (std::size_t k = 0; k < js.size(); ++k)
            if (js[k] >= lo && js[k] <= hi) m = std::max(m, std::abs(residual[k]));
        return m;
    }
};

inline PhaseAmplitude extract_phase(const FamilyDescriptor& fam, const ParabolicDecomposition& d,
                                    const TemperedLimits& L, Index i, double eta_angle, double x, Index j_max,
                                    const PhaseOptions& opt = {}) {
    const auto c = make_context(fam, d, L, i, x);
    PhaseAmplitude p;
    p.i = c.i;
    p.x = x;
    p.eta_angle = eta_angle;
    p.alpha_prev = c.alpha_prev;
    p.abs_tau = c.abs_tau;
    if (c.tau_x >= 0.0) throw Error(ErrorKind::outside_lambda_minus, "x = " + std::to_string(x) + " is not in Lambda_-");
    if (std::abs(d.X(c.i).m21) <= 1e-12) {
        p.degenerate = true;
        return p;
    }
    p.delta = opt.delta.value_or(default_delta(L, x));
    p.j0 = opt.j0 ? *opt.j0 : select_j0(c, p.delta, j_max).j0;
    if (j_max < p.j0 + 100)
        throw Error(ErrorKind::j0_too_small, "j_max must exceed j0 = " + std::to_string(p.j0) + " by 100 steps");
    const Index N = c.N;
    const auto tr = eigenvector_trace(fam, eta_angle, x, (j_max + 1) * N + c.i + 1);
    if (tr.truncated()) throw Error(ErrorKind::extraction, "eigenvector trace overflowed");

    p.j0_scale = fam.a(p.j0 * N + c.i - 1) * std::sinh(c.vartheta(p.j0));
    double theta_sum = 0.0, log_prod = 0.0;
    std::vector<double> u_now;
    for (Index j = p.j0; j <= j_max; ++j) {
        const auto s = conjugation_step(c, j);
        const auto dg = diagonalize(s, p.j0, p.delta);
        const double u0 = tr.value(j * N + c.i), u1 = tr.value((j + 1) * N + c.i);
        const cplx prod = std::exp(cplx(log_prod, theta_sum));
        const cplx phi_j = (u1 - std::conj(dg.lambda) * u0) / prod;
        p.js.push_back(j);
        p.theta_sum.push_back(theta_sum);
        p.log_prod.push_back(log_prod);
        p.phi_series.push_back(std::sqrt(c.gamma_shift(j)) * phi_j);
        u_now.push_back(u0);
        theta_sum += dg.theta;
        log_prod += std::log(std::abs(dg.lambda));
    }

    const std::size_t M = p.js.size();
    const std::size_t q0 = M - M / 4;
    std::vector<cplx> tail(p.phi_series.begin() + static_cast<std::ptrdiff_t>(q0), p.phi_series.end());
    const auto rm = robust_mean(tail);
    p.phi = rm.mean;
    p.rejected = rm.rejected;
    const std::size_t half = tail.size() / 2;
    const auto first = robust_mean({tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(half)}).mean;
    const auto second = robust_mean({tail.begin() + static_cast<std::ptrdiff_t>(half), tail.end()}).mean;
    if (std::abs(first - second) > opt.tail_tol * std::abs(p.phi))
        throw Error(ErrorKind::extraction, "phi_j tail has not settled (relative drift " +
                                               std::to_string(std::abs(first - second) / std::abs(p.phi)) + ")");
    p.phi_abs = std::abs(p.phi);
    p.phi_arg = std::arg(p.phi);
    const double at = c.alpha_prev * c.abs_tau;
    p.phi_abs_C = p.phi_abs * std::sqrt(p.j0_scale) / std::pow(at, 0.75);

    p.residual.resize(M);
    p.residual_C.resize(M);
    for (std::size_t k = 0; k < M; ++k) {
        const Index j = p.js[k];
        const double sn = std::sin(p.theta_sum[k] + p.phi_arg);
        p.residual[k] = u_now[k] / std::exp(p.log_prod[k]) - p.phi_abs / std::sqrt(at) * sn;
        const Index m = j * N + c.i - 1;
        p.residual_C[k] = std::sqrt(fam.a(m) / std::sqrt(fam.gamma(m))) * u_now[k] - p.phi_abs_C * sn;
    }
    return p;
}

// prod_{k=j0}^{j-1} |lambda_k|^2 in closed form: (sinh theta_{j0}/sinh theta_j) a_{j0 N+i-1}/a_{jN+i-1}.
inline double lambda_product_sq(const ConjugationContext& c, Index j0, Index j) {
    return std::sinh(c.vartheta(j0)) / std::sinh(c.vartheta(j)) * c.fam.a(j0 * c.N + c.i - 1) /
           c.fam.a(j * c.N + c.i - 1);
}

// S_n = a_{n+N-1} sqrt(gamma_{n+N-1}) <E u_{n+N}, u_n> = a sqrt(gamma) (u_{n+N-1} u_n - u_{n+N} u_{n-1}).
inline double turan(const FamilyDescriptor& fam, const EigenTrace& t, Index n) {
    const Index N = fam.period();
    const Index m = n + N - 1;
    const Vec2 v = t.vec(n + N), w = t.vec(n);
    const double inner = dot(Matrix2::E() * v, w);
    return fam.a(m) * std::sqrt(fam.gamma(m)) * inner;
}

// (a_{(j+1)N+i-1}/sqrt(gamma_{(j+1)N+i-1})) |Z_j^{-1} u_{jN+i}|^2, bounded above and below on Lambda_-.
inline double cor62_quantity(const ConjugationContext& c, const EigenTrace& t, Index j) {
    const Vec2 v = c.Z(j).inverse() * t.vec(j * c.N + c.i);
    const Index m = (j + 1) * c.N + c.i - 1;
    return c.fam.a(m) / std::sqrt(c.fam.gamma(m)) * dot(v, v);
}

struct Christoffel {
    double K = 0.0;
    double rho = 0.0;
};

inline Christoffel christoffel(const FamilyDescriptor& fam, const EigenTrace& t, Index n) {
    Christoffel c;
    for (Index m = 0; m <= n; ++m) {
        const double u = t.value(m);
        c.K += u * u;
        c.rho += std::sqrt(fam.alpha(m) * fam.gamma(m)) / fam.a(m);
    }
    return c;
}

// K_n / rho_n for every n covered by the trace.
inline std::vector<double> christoffel_ratio_series(const FamilyDescriptor& fam, const EigenTrace& t) {
    std::vector<double> r(static_cast<std::size_t>(t.size()));
    double K = 0.0, rho = 0.0;
    for (Index m = 0; m < t.size(); ++m) {
        const double u = t.value(m);
        K += u * u;
        rho += std::sqrt(fam.alpha(m) * fam.gamma(m)) / fam.a(m);
        r[m] = K / rho;
    }
    return r;
}

// Limit of K_n/rho_n assembled from the per-residue amplitudes:
// (1/2N) sum_i |phi_i|^2 a_{j0 N+i-1} sinh(theta_{j0}) / (sqrt(alpha_{i-1}) (alpha_{i-1}|tau|)^{3/2}).
inline double kernel_limit_from_phases(const std::vector<PhaseAmplitude>& phases) {
    if (phases.empty()) return 0.0;
    const double N = static_cast<double>(phases.size());
    double s = 0.0;
    for (const auto& p : phases) {
        if (p.degenerate) continue;
        s += p.phi_abs * p.phi_abs * p.j0_scale / (std::sqrt(p.alpha_prev) * std::pow(p.alpha_prev * p.abs_tau, 1.5));
    }
    return s / (2.0 * N);
}

struct OscillatoryAverage {
    double value = 0.0;
    double Delta = 0.0;
    std::vector<std::string> warnings;
};

// (1/Delta_n) sum_{k<=n} (sqrt(gamma_k)/a_k) cos(Xi_k) with Xi_k = sum_{j<=k} xi_j and
// Delta_n = sum_{k<=n} sqrt(gamma_k)/a_k.
inline OscillatoryAverage oscillatory_average(const IndexFn& gamma, const IndexFn& a, const IndexFn& xi, Index n) {
    OscillatoryAverage r;
    double Xi = 0.0, num = 0.0, half_Delta = 0.0;
    for (Index k = 0; k <= n; ++k) {
        Xi += xi(k);
        const double w = std::sqrt(gamma(k)) / a(k);
        num += w * std::cos(Xi);
        r.Delta += w;
        if (k == n / 2) half_Delta = r.Delta;
    }
    r.value = num / r.Delta;
    if (!(gamma(n) > 1.5 * gamma(n / 4))) r.warnings.push_back("gamma_n does not appear to tend to infinity");
    if (!(r.Delta - half_Delta > 1e-3 * r.Delta)) r.warnings.push_back("sum sqrt(gamma)/a does not appear to diverge");
    const double psi_n = std::sqrt(gamma(n)) * xi(n), psi_h = std::sqrt(gamma(n / 2)) * xi(n / 2);
    if (!(std::abs(psi_n) > 1e-3 && std::abs(psi_n) < 1e3) || std::abs(psi_n - psi_h) > 0.1 * std::abs(psi_n))
        r.warnings.push_back("sqrt(gamma_n) xi_n does not settle to a limit bounded away from 0 and infinity");
    auto ratio = [&](Index k) { return gamma(k) / a(k); };
    if (!d1n_diagnostic(ratio, 1, 10).pass) r.warnings.push_back("gamma/a fails the D1 diagnostic");
    return r;
}

// M_j = (B_j ... B_0)^{-1} (B~_j ... B~_0). Both products share one running scale factor,
// which cancels in M_j.
inline std::vector<Matrix2> perturbation_M_series(const FamilyDescriptor& base, const PerturbedFamily& pert, Index j_max,
                                                 double x) {
    std::vector<Matrix2> out;
    out.reserve(static_cast<std::size_t>(j_max + 1));
    Matrix2 P = Matrix2::identity(), Pt = Matrix2::identity();
    for (Index j = 0; j <= j_max; ++j) {
        P = transfer_B(base, j, x) * P;
        Pt = transfer_B(pert.effective, j, x) * Pt;
        const double m = std::max(max_abs(P), max_abs(Pt));
        if (m > 1e100 || m < 1e-100) {
            P = P / m;
            Pt = Pt / m;
        }
        out.push_back(P.inverse() * Pt);
    }
    return out;
}

inline Matrix2 perturbation_M(const FamilyDescriptor& base, const PerturbedFamily& pert, Index j, double x) {
    return perturbation_M_series(base, pert, j, x).back();
}

} // namespace parajacobi
