#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <ostream>

namespace parajacobi {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
    friend double norm(Vec2 a) { return std::hypot(a.x, a.y); }
};

// Row-major 2x2 real matrix, [Y]_ij = m_ij.
struct Matrix2 {
    double m11 = 0.0, m12 = 0.0, m21 = 0.0, m22 = 0.0;

    static constexpr Matrix2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static constexpr Matrix2 zero() { return {}; }
    // E = [[0,-1],[1,0]], the symplectic form used for Turan determinants.
    static constexpr Matrix2 E() { return {0.0, -1.0, 1.0, 0.0}; }
    // Model Jordan block J = [[0,1],[-1,2]].
    static constexpr Matrix2 J() { return {0.0, 1.0, -1.0, 2.0}; }

    constexpr double trace() const { return m11 + m22; }
    constexpr double det() const { return m11 * m22 - m12 * m21; }
    constexpr Matrix2 transpose() const { return {m11, m21, m12, m22}; }

    Matrix2 inverse() const {
        const double d = det();
        return {m22 / d, -m12 / d, -m21 / d, m11 / d};
    }

    bool finite() const {
        return std::isfinite(m11) && std::isfinite(m12) && std::isfinite(m21) && std::isfinite(m22);
    }

    constexpr Matrix2& operator+=(const Matrix2& o) {
        m11 += o.m11; m12 += o.m12; m21 += o.m21; m22 += o.m22;
        return *this;
    }
    constexpr Matrix2& operator-=(const Matrix2& o) {
        m11 -= o.m11; m12 -= o.m12; m21 -= o.m21; m22 -= o.m22;
        return *this;
    }

    friend constexpr Matrix2 operator+(Matrix2 a, const Matrix2& b) { return a += b; }
    friend constexpr Matrix2 operator-(Matrix2 a, const Matrix2& b) { return a -= b; }
    friend constexpr Matrix2 operator-(const Matrix2& a) { return {-a.m11, -a.m12, -a.m21, -a.m22}; }
    friend constexpr Matrix2 operator*(double s, const Matrix2& a) {
        return {s * a.m11, s * a.m12, s * a.m21, s * a.m22};
    }
    friend constexpr Matrix2 operator*(const Matrix2& a, double s) { return s * a; }
    friend constexpr Matrix2 operator/(const Matrix2& a, double s) {
        return {a.m11 / s, a.m12 / s, a.m21 / s, a.m22 / s};
    }
    friend constexpr Matrix2 operator*(const Matrix2& a, const Matrix2& b) {
        return {a.m11 * b.m11 + a.m12 * b.m21, a.m11 * b.m12 + a.m12 * b.m22,
                a.m21 * b.m11 + a.m22 * b.m21, a.m21 * b.m12 + a.m22 * b.m22};
    }
    friend constexpr Vec2 operator*(const Matrix2& a, Vec2 v) {
        return {a.m11 * v.x + a.m12 * v.y, a.m21 * v.x + a.m22 * v.y};
    }
    friend constexpr bool operator==(const Matrix2&, const Matrix2&) = default;

    friend std::ostream& operator<<(std::ostream& os, const Matrix2& a) {
        return os << "[[" << a.m11 << ", " << a.m12 << "], [" << a.m21 << ", " << a.m22 << "]]";
    }
};

inline constexpr double trace(const Matrix2& m) { return m.trace(); }
inline constexpr double det(const Matrix2& m) { return m.det(); }

// (tr M)^2 - 4 det M, written to avoid squaring the trace when it is large.
inline double discr(const Matrix2& m) {
    const double d = m.m11 - m.m22;
    return d * d + 4.0 * m.m12 * m.m21;
}

inline constexpr Matrix2 sym(const Matrix2& m) {
    const double off = 0.5 * (m.m12 + m.m21);
    return {m.m11, off, off, m.m22};
}

inline double max_abs(const Matrix2& m) {
    return std::max(std::max(std::abs(m.m11), std::abs(m.m12)),
                    std::max(std::abs(m.m21), std::abs(m.m22)));
}

inline double frobenius(const Matrix2& m) {
    return std::sqrt(m.m11 * m.m11 + m.m12 * m.m12 + m.m21 * m.m21 + m.m22 * m.m22);
}

// Largest singular value.
inline double op_norm(const Matrix2& m) {
    const double f2 = m.m11 * m.m11 + m.m12 * m.m12 + m.m21 * m.m21 + m.m22 * m.m22;
    const double d = std::abs(m.det());
    const double disc = std::max(0.0, f2 * f2 - 4.0 * d * d);
    return std::sqrt(0.5 * (f2 + std::sqrt(disc)));
}

inline double distance(const Matrix2& a, const Matrix2& b) { return max_abs(a - b); }

using cplx = std::complex<double>;

struct CMatrix2 {
    cplx m11{}, m12{}, m21{}, m22{};

    static CMatrix2 from_real(const Matrix2& m) { return {m.m11, m.m12, m.m21, m.m22}; }
    static CMatrix2 diag(cplx d1, cplx d2) { return {d1, 0.0, 0.0, d2}; }

    cplx trace() const { return m11 + m22; }
    cplx det() const { return m11 * m22 - m12 * m21; }
    CMatrix2 inverse() const {
        const cplx d = det();
        return {m22 / d, -m12 / d, -m21 / d, m11 / d};
    }
    CMatrix2 conj() const { return {std::conj(m11), std::conj(m12), std::conj(m21), std::conj(m22)}; }

    friend CMatrix2 operator*(const CMatrix2& a, const CMatrix2& b) {
        return {a.m11 * b.m11 + a.m12 * b.m21, a.m11 * b.m12 + a.m12 * b.m22,
                a.m21 * b.m11 + a.m22 * b.m21, a.m21 * b.m12 + a.m22 * b.m22};
    }
    friend CMatrix2 operator-(const CMatrix2& a, const CMatrix2& b) {
        return {a.m11 - b.m11, a.m12 - b.m12, a.m21 - b.m21, a.m22 - b.m22};
    }
    double max_abs() const {
        return std::max(std::max(std::abs(m11), std::abs(m12)), std::max(std::abs(m21), std::abs(m22)));
    }
};

enum class ProductMode { plain, compensated };

struct ProductReport {
    bool empty_range = false;
    std::int64_t factors = 0;
};

namespace detail {

// Error-free transformations: a*b = p + e and a+b = s + e exactly.
inline void two_prod(double a, double b, double& p, double& e) {
    p = a * b;
    e = std::fma(a, b, -p);
}

inline void two_sum(double a, double b, double& s, double& e) {
    s = a + b;
    const double bb = s - a;
    e = (a - (s - bb)) + (b - bb);
}

// a1*b1 + a2*b2 as value plus rounding error.
inline void dot2(double a1, double b1, double a2, double b2, double& s, double& err) {
    double p1, e1, p2, e2, e3;
    two_prod(a1, b1, p1, e1);
    two_prod(a2, b2, p2, e2);
    two_sum(p1, p2, s, e3);
    err = e1 + e2 + e3;
}

} // namespace detail

// C_{n1} C_{n1-1} ... C_{n0}. An empty range yields the identity and sets the report flag.
// Compensated mode carries the rounding error of each multiply in a separate correction matrix.
template <class Factor>
Matrix2 ordered_product(Factor&& factor, std::int64_t n0, std::int64_t n1,
                        ProductMode mode = ProductMode::plain, ProductReport* report = nullptr) {
    if (report) {
        report->empty_range = n0 > n1;
        report->factors = n0 > n1 ? 0 : n1 - n0 + 1;
    }
    if (n0 > n1) return Matrix2::identity();
    Matrix2 p = factor(n0);
    if (mode == ProductMode::plain) {
        for (std::int64_t k = n0 + 1; k <= n1; ++k) p = factor(k) * p;
        return p;
    }
    Matrix2 c = Matrix2::zero();
    for (std::int64_t k = n0 + 1; k <= n1; ++k) {
        const Matrix2 f = factor(k);
        Matrix2 np, e;
        detail::dot2(f.m11, p.m11, f.m12, p.m21, np.m11, e.m11);
        detail::dot2(f.m11, p.m12, f.m12, p.m22, np.m12, e.m12);
        detail::dot2(f.m21, p.m11, f.m22, p.m21, np.m21, e.m21);
        detail::dot2(f.m21, p.m12, f.m22, p.m22, np.m22, e.m22);
        c = f * c + e;
        p = np;
    }
    return p + c;
}

} // namespace parajacobi
