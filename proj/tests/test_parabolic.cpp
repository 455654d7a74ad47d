#include "parajacobi/family.hpp"
#include "parajacobi/parabolic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace parajacobi;

namespace {

void expect_near(const Matrix2& a, const Matrix2& b, double tol) {
    EXPECT_NEAR(a.m11, b.m11, tol);
    EXPECT_NEAR(a.m12, b.m12, tol);
    EXPECT_NEAR(a.m21, b.m21, tol);
    EXPECT_NEAR(a.m22, b.m22, tol);
}

// Random balanced tilde sequence of length 2N: the last odd entry fixes the balance.
std::vector<double> random_balanced(std::mt19937_64& rng, int N) {
    std::uniform_real_distribution<double> u(0.5, 2.0);
    std::vector<double> ta(2 * N);
    for (auto& v : ta) v = u(rng);
    double even = 1.0, odd = 1.0;
    for (int k = 0; k < 2 * N; ++k) (k % 2 == 0 ? even : odd) *= ta[k];
    ta[2 * N - 1] *= even / odd;
    return ta;
}

std::vector<PeriodicData> catalog_periodic() {
    return {PeriodicData({1.0}, {2.0}), PeriodicData({1.0}, {-2.0}), tilde_periodic({1.0, std::sqrt(2.0), std::sqrt(2.0), 1.0}),
            PeriodicData({2.0, 1.0}, {3.0, 3.0}), tilde_periodic(symmetric_tilde_alpha({1.0, 3.0, 0.5}))};
}

} // namespace

TEST(FrakB, Examples) {
    const PeriodicData p1({1.0}, {2.0});
    EXPECT_EQ(frak_B(p1, 0, 0.0), (Matrix2{0, 1, -1, -2}));
    const PeriodicData p2({2.0, 1.0}, {3.0, 3.0});
    EXPECT_EQ(frak_B(p2, 1, 0.0), (Matrix2{0, 1, -2, -3}));
    for (Index n = -3; n < 5; ++n) EXPECT_DOUBLE_EQ(frak_B(p2, n, 0.7).det(), p2.alpha_at(n - 1) / p2.alpha_at(n));
}

TEST(FrakX, Examples) {
    const PeriodicData p1({1.0}, {2.0});
    EXPECT_EQ(frak_X(p1, 0, 0.3), frak_B(p1, 0, 0.3));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.3, 3.0);
    for (int N = 1; N <= 5; ++N) {
        std::vector<double> a(N), b(N);
        for (int k = 0; k < N; ++k) {
            a[k] = u(rng);
            b[k] = u(rng) - 1.5;
        }
        const PeriodicData p(a, b);
        for (Index n = 0; n < N; ++n) EXPECT_NEAR(frak_X(p, n, 0.4).det(), 1.0, 1e-12);
        // Trace does not depend on the starting index.
        for (Index n = 1; n < N; ++n) EXPECT_NEAR(frak_X(p, n, 0.0).trace(), frak_X(p, 0, 0.0).trace(), 1e-12);
    }
    EXPECT_NEAR(frak_X(tilde_periodic({1.0, std::sqrt(2.0), std::sqrt(2.0), 1.0}), 0, 0.0).trace(), 2.0, 1e-14);
}

TEST(Classify, Examples) {
    EXPECT_EQ(classify(PeriodicData({1.0}, {2.0})), Case::IIb);
    EXPECT_EQ(classify(PeriodicData({1.0}, {3.0})), Case::III);
    EXPECT_EQ(classify(PeriodicData({1.0}, {1.0})), Case::I);
    // alpha = 1, beta = 0, N = 2: X = -Id.
    EXPECT_EQ(classify(PeriodicData({1.0, 1.0}, {0.0, 0.0})), Case::IIa);
}

TEST(Classify, AmbiguityBand) {
    // X_0(0) for alpha=(1,1), beta=(e,0) is [[-1,0],[e,-1]]: tr = -2, distance e to -Id.
    const double tol = 1e-9;
    try {
        classify(PeriodicData({1.0, 1.0}, {1.5e-9, 0.0}), tol);
        FAIL() << "expected an ambiguity error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ambiguity);
    }
    EXPECT_EQ(classify(PeriodicData({1.0, 1.0}, {0.5e-9, 0.0}), tol), Case::IIa);
    EXPECT_EQ(classify(PeriodicData({1.0, 1.0}, {3e-9, 0.0}), tol), Case::IIb);
}

TEST(Conjugator, CanonicalExample) {
    const auto d = decompose(PeriodicData({1.0}, {2.0}));
    EXPECT_EQ(d.epsilon, -1);
    const Matrix2 T0 = d.Tm(0);
    expect_near(T0, Matrix2{1.5, -0.5, -0.5, -0.5}, 1e-14);
    EXPECT_NEAR(T0.det(), -1.0, 1e-14);
    const double e = d.epsilon;
    const Vec2 t1{T0.m11, T0.m21}, t2{T0.m12, T0.m22};
    const Vec2 a = e * (d.X0 * t1), b = e * (d.X0 * t2);
    EXPECT_NEAR(a.x, -t2.x, 1e-14);
    EXPECT_NEAR(a.y, -t2.y, 1e-14);
    EXPECT_NEAR(b.x, t1.x + 2 * t2.x, 1e-14);
    EXPECT_NEAR(b.y, t1.y + 2 * t2.y, 1e-14);
    const double bot = T0.m21 + T0.m22, top = T0.m11 + T0.m12;
    EXPECT_NEAR(bot * bot / T0.det(), -e * d.X0.m21, 1e-14);
    EXPECT_NEAR(top * bot / T0.det(), 1 - e * d.X0.m11, 1e-14);
    EXPECT_NEAR(top * bot / T0.det(), 1.0, 1e-14);
}

TEST(Conjugator, IdentitiesOnCatalog) {
    for (const auto& p : catalog_periodic()) {
        const auto d = decompose(p);
        const auto r = conjugator_residuals(d);
        EXPECT_LE(r.reconstruction, 1e-10);
        EXPECT_LE(r.identity33, 1e-10);
        EXPECT_LE(r.identity34, 1e-10);
        for (Index i = 0; i < d.period(); ++i) {
            EXPECT_NEAR(d.X(i).det(), 1.0, 1e-10);
            // X_i(0) = B_{i-1}...B_0 X_0 B_0^{-1}...B_{i-1}^{-1}
            const Matrix2 P = ordered_product([&](Index k) { return frak_B(p, k, 0.0); }, 0, i - 1);
            EXPECT_LE(distance(d.X(i), P * d.X0 * P.inverse()), 1e-10);
        }
        EXPECT_GT(std::abs(d.trace_derivative), 1e-8);
    }
}

TEST(Conjugator, UnsupportedCase) {
    try {
        decompose(PeriodicData({1.0}, {1.0}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::unsupported_case);
    }
}

TEST(TraceDerivative, Examples) {
    EXPECT_NEAR(trace_derivative(PeriodicData({1.0}, {2.0})), 1.0, 1e-14);
    for (double c : {0.5, 1.0, 1.7}) {
        const auto td = trace_derivative_detail(tilde_periodic({c, c}));
        EXPECT_NEAR(td.closed, 1.0 / (c * c), 1e-12);
        EXPECT_NEAR(td.finite_difference, td.closed, 1e-6);
    }
    // alpha = (2,1), beta = (3,3): tr X_0(x) = -5/2 + (x-3)^2/2 by hand, so the derivative at 0 is -3.
    EXPECT_NEAR(trace_derivative(PeriodicData({2.0, 1.0}, {3.0, 3.0})), -3.0, 1e-13);
}

TEST(Lemma, PeriodicPolyAtZero) {
    EXPECT_DOUBLE_EQ(periodic_poly_at_zero({1.0, 1.0}, 0), 1.0);
    const auto p11 = tilde_periodic({1.0, 1.0});
    EXPECT_NEAR(periodic_poly_at_zero({1.0, 1.0}, 1), -p11.beta[0] / p11.alpha[0], 1e-14);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        const auto ta = random_balanced(rng, 3);
        const auto p = tilde_periodic(ta);
        for (Index n = 0; n <= 6; ++n) {
            const double ref = periodic_poly(p, n, 0.0);
            EXPECT_NEAR(periodic_poly_at_zero(ta, n), ref, 1e-12 * std::max(1.0, std::abs(ref)));
        }
    }
}

TEST(Lemma, IdentityResidual) {
    EXPECT_EQ(bd_identity_check({1.0, 1.0}), 0.0);
    EXPECT_LE(bd_identity_check({1.0, std::sqrt(2.0), std::sqrt(2.0), 1.0}), 1e-12);
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) EXPECT_LE(bd_identity_check(random_balanced(rng, 4)), 1e-10);
}

TEST(Lemma, TraceAndDerivativeOnRandomBalanced) {
    std::mt19937_64 rng(7);
    for (int N = 1; N <= 4; ++N) {
        for (int trial = 0; trial < 5; ++trial) {
            const auto ta = random_balanced(rng, N);
            const auto p = tilde_periodic(ta);
            const double eps = N % 2 == 0 ? 1.0 : -1.0;
            EXPECT_NEAR(frak_X(p, 0, 0.0).trace(), 2 * eps, 1e-10);
            const auto td = trace_derivative_detail(p);
            EXPECT_NEAR(bd_trace_derivative(ta), td.finite_difference, 1e-6) << "N=" << N;
            // Not both consecutive [X_i(0)]_21 vanish.
            for (Index i = 0; i < N; ++i)
                EXPECT_FALSE(std::abs(frak_X(p, i - 1, 0.0).m21) < 1e-12 && std::abs(frak_X(p, i, 0.0).m21) < 1e-12);
        }
    }
}

TEST(Lemma, SymmetricBdSlope) {
    // With ta_{2n+1} = ta_{2n+2} = sqrt(alpha_n) the closed form collapses to -eps N sum 1/alpha.
    for (const std::vector<double>& alpha : {std::vector<double>{2.0, 1.0}, {1.0, 3.0, 0.5}, {1.0, 2.0, 1.5, 0.7}}) {
        const auto ta = symmetric_tilde_alpha(alpha);
        const double eps = alpha.size() % 2 == 0 ? 1.0 : -1.0;
        double inv = 0.0;
        for (double a : alpha) inv += 1.0 / a;
        EXPECT_NEAR(bd_trace_derivative(ta), -eps * static_cast<double>(alpha.size()) * inv, 1e-12);
        EXPECT_NEAR(trace_derivative(tilde_periodic(ta)), -eps * static_cast<double>(alpha.size()) * inv, 1e-12);
    }
}
