#pragma once

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

namespace parajacobi {

using Index = std::int64_t;
using IndexFn = std::function<double(Index)>;

inline Index mod_index(Index n, Index N) {
    const Index r = n % N;
    return r < 0 ? r + N : r;
}

// Lazily evaluated sequence with a memo cache for n >= 0. The cache grows in
// chunks as larger indices are requested and is safe for concurrent readers.
class Sequence {
public:
    Sequence() = default;
    explicit Sequence(IndexFn fn) : state_(std::make_shared<State>()) { state_->fn = std::move(fn); }

    double operator()(Index n) const {
        if (n < 0) return state_->fn(n);
        const auto k = static_cast<std::size_t>(n);
        {
            std::shared_lock lock(state_->mu);
            if (k < state_->cache.size()) return state_->cache[k];
        }
        std::unique_lock lock(state_->mu);
        auto& c = state_->cache;
        if (k >= c.size()) {
            const std::size_t target = k + 1 + std::min<std::size_t>(4096, k / 8);
            c.reserve(target);
            for (std::size_t m = c.size(); m < target; ++m) c.push_back(state_->fn(static_cast<Index>(m)));
        }
        return c[k];
    }

    explicit operator bool() const { return static_cast<bool>(state_); }
    IndexFn function() const { return state_->fn; }

private:
    struct State {
        IndexFn fn;
        std::shared_mutex mu;
        std::vector<double> cache;
    };
    std::shared_ptr<State> state_;
};

struct PeriodicData {
    std::vector<double> alpha;
    std::vector<double> beta;

    PeriodicData() = default;
    PeriodicData(std::vector<double> a, std::vector<double> b) : alpha(std::move(a)), beta(std::move(b)) {
        if (alpha.empty() || alpha.size() != beta.size())
            throw Error(ErrorKind::config, "periodic data needs alpha and beta of equal positive length");
        for (double v : alpha)
            if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorKind::config, "alpha must be positive");
        for (double v : beta)
            if (!std::isfinite(v)) throw Error(ErrorKind::config, "beta must be finite");
    }

    Index period() const { return static_cast<Index>(alpha.size()); }
    double alpha_at(Index n) const { return alpha[static_cast<std::size_t>(mod_index(n, period()))]; }
    double beta_at(Index n) const { return beta[static_cast<std::size_t>(mod_index(n, period()))]; }
};

struct FamilyDescriptor {
    Sequence a;
    Sequence b;
    Sequence gamma;
    PeriodicData periodic;
    std::string label;

    Index period() const { return periodic.period(); }
    double alpha(Index n) const { return periodic.alpha_at(n); }
    double beta(Index n) const { return periodic.beta_at(n); }
};

inline FamilyDescriptor make_family(IndexFn a, IndexFn b, IndexFn gamma, PeriodicData periodic, std::string label) {
    return {Sequence(std::move(a)), Sequence(std::move(b)), Sequence(std::move(gamma)), std::move(periodic),
            std::move(label)};
}

inline FamilyDescriptor build_yafaev(double kappa, double f, double g) {
    if (!(kappa > 1.0)) throw Error(ErrorKind::config, "yafaev: kappa must exceed 1");
    if (!(f > -1.0) || !(g > -1.0)) throw Error(ErrorKind::config, "yafaev: f and g must exceed -1");
    auto a = [=](Index n) {
        const double m = static_cast<double>(n) + 1.0;
        return std::pow(m, kappa) * (1.0 + f / m);
    };
    auto b = [=](Index n) {
        const double m = static_cast<double>(n) + 1.0;
        return 2.0 * std::pow(m, kappa) * (1.0 + g / m);
    };
    auto gamma = [](Index n) { return static_cast<double>(n) + 1.0; };
    return make_family(a, b, gamma, PeriodicData({1.0}, {2.0}),
                       "yafaev(" + std::to_string(kappa) + "," + std::to_string(f) + "," + std::to_string(g) + ")");
}

// Birth-death chain a_n = (n+1)^kappa, b_n = a_{n-1} + a_n with a_{-1} := 0, so b_0 = 1.
inline FamilyDescriptor build_bd_power(double kappa) {
    if (!(kappa > 1.0 && kappa < 2.0)) throw Error(ErrorKind::config, "bd_power: kappa must lie in (1,2)");
    auto a = [=](Index n) { return n < 0 ? 0.0 : std::pow(static_cast<double>(n) + 1.0, kappa); };
    auto b = [=](Index n) {
        const double an = std::pow(static_cast<double>(n) + 1.0, kappa);
        const double am = n > 0 ? std::pow(static_cast<double>(n), kappa) : 0.0;
        return am + an;
    };
    return make_family(a, b, a, PeriodicData({1.0}, {2.0}), "bd_power(" + std::to_string(kappa) + ")");
}

// Periodic data (alpha, beta) obtained from a 2N-periodic tilde sequence:
// alpha_n = ta_{2n+1} ta_{2n+2}, beta_n = ta_{2n}^2 + ta_{2n+1}^2.
inline PeriodicData tilde_periodic(const std::vector<double>& ta) {
    if (ta.empty() || ta.size() % 2 != 0) throw Error(ErrorKind::config, "tilde_alpha needs an even, positive length");
    for (double v : ta)
        if (!(v > 0.0)) throw Error(ErrorKind::config, "tilde_alpha entries must be positive");
    const Index M = static_cast<Index>(ta.size());
    const Index N = M / 2;
    auto t = [&](Index k) { return ta[static_cast<std::size_t>(mod_index(k, M))]; };
    std::vector<double> alpha(N), beta(N);
    for (Index n = 0; n < N; ++n) {
        alpha[n] = t(2 * n + 1) * t(2 * n + 2);
        beta[n] = t(2 * n) * t(2 * n) + t(2 * n + 1) * t(2 * n + 1);
    }
    return PeriodicData(alpha, beta);
}

// Relative mismatch between the products of even and odd tilde entries.
inline double tilde_balance_defect(const std::vector<double>& ta) {
    double le = 0.0, lo = 0.0;
    for (std::size_t k = 0; k < ta.size(); ++k) (k % 2 == 0 ? le : lo) += std::log(ta[k]);
    return std::abs(std::expm1(le - lo));
}

// Tilde sequence with ta_{2n+1} = ta_{2n+2} = sqrt(alpha_n). It is balanced and yields
// beta_n = alpha_{n-1} + alpha_n.
inline std::vector<double> symmetric_tilde_alpha(const std::vector<double>& alpha) {
    const std::size_t N = alpha.size();
    std::vector<double> ta(2 * N);
    for (std::size_t n = 0; n < N; ++n) {
        const double r = std::sqrt(alpha[n]);
        ta[(2 * n + 1) % (2 * N)] = r;
        ta[(2 * n + 2) % (2 * N)] = r;
    }
    return ta;
}

// Symmetric birth-death family a_n = gamma_n, b_n = gamma_{n-1} + gamma_n.
// gamma_{-1} defaults to 0. The tilde data must be balanced and give beta = alpha_{-1} + alpha.
inline FamilyDescriptor build_symmetric_bd(const std::vector<double>& tilde_alpha, IndexFn gamma,
                                           std::optional<double> gamma_minus1 = std::nullopt) {
    const PeriodicData pd = tilde_periodic(tilde_alpha);
    if (tilde_balance_defect(tilde_alpha) > 1e-12)
        throw Error(ErrorKind::config, "symmetric_bd: tilde_alpha is not balanced (even and odd products differ)");
    for (Index n = 0; n < pd.period(); ++n) {
        const double want = pd.alpha_at(n - 1) + pd.alpha_at(n);
        if (std::abs(pd.beta_at(n) - want) > 1e-12 * want)
            throw Error(ErrorKind::config, "symmetric_bd: tilde_alpha does not yield beta_n = alpha_{n-1} + alpha_n");
    }
    std::vector<double> beta(pd.alpha.size());
    for (Index n = 0; n < pd.period(); ++n) beta[n] = pd.alpha_at(n - 1) + pd.alpha_at(n);
    const double gm1 = gamma_minus1.value_or(0.0);
    Sequence g(gamma);
    auto a = [g](Index n) { return g(n); };
    auto b = [g, gm1](Index n) { return (n == 0 ? gm1 : g(n - 1)) + g(n); };
    FamilyDescriptor fam{Sequence(a), Sequence(b), g, PeriodicData(pd.alpha, beta), "symmetric_bd"};
    return fam;
}

struct KmSpec {
    PeriodicData periodic;
    IndexFn hat_a;
    IndexFn delta;
    IndexFn f;
    IndexFn g;
};

// a_n = alpha_n hat_a_n (1 + f_n/delta_n), b_n = beta_n hat_a_n (1 + g_n/delta_n), gamma_n = alpha_n delta_n.
inline FamilyDescriptor build_km(const KmSpec& spec) {
    const PeriodicData pd = spec.periodic;
    auto check = [](double v, const char* what, Index n) {
        if (!(v > 0.0))
            throw Error(ErrorKind::config, std::string("km: ") + what + " must be positive (n=" + std::to_string(n) + ")");
        return v;
    };
    for (Index n = 0; n < 64; ++n) {
        check(spec.hat_a(n), "hat_a", n);
        check(spec.delta(n), "delta", n);
    }
    auto a = [=](Index n) {
        const double d = check(spec.delta(n), "delta", n);
        return pd.alpha_at(n) * check(spec.hat_a(n), "hat_a", n) * (1.0 + spec.f(n) / d);
    };
    auto b = [=](Index n) {
        const double d = check(spec.delta(n), "delta", n);
        return pd.beta_at(n) * check(spec.hat_a(n), "hat_a", n) * (1.0 + spec.g(n) / d);
    };
    auto gamma = [=](Index n) { return pd.alpha_at(n) * check(spec.delta(n), "delta", n); };
    return make_family(a, b, gamma, pd, "km");
}

struct PerturbedFamily {
    FamilyDescriptor base;
    Sequence xi;
    Sequence zeta;
    FamilyDescriptor effective;
};

// Multiplicative perturbation a~ = a(1+xi), b~ = b(1+zeta). A zero perturbation
// evaluates bit-identically to the base family.
inline PerturbedFamily perturb_l1(const FamilyDescriptor& base, IndexFn xi, IndexFn zeta) {
    Sequence sx(std::move(xi)), sz(std::move(zeta));
    const Sequence ba = base.a, bb = base.b;
    auto a = [ba, sx](Index n) {
        const double s = 1.0 + sx(n);
        if (!(s > 0.0)) throw Error(ErrorKind::config, "perturbation: 1 + xi_n must stay positive (n=" + std::to_string(n) + ")");
        return ba(n) * s;
    };
    auto b = [bb, sz](Index n) { return bb(n) * (1.0 + sz(n)); };
    FamilyDescriptor eff{Sequence(a), Sequence(b), base.gamma, base.periodic, base.label + "+l1"};
    return {base, sx, sz, eff};
}

struct WindowSums {
    std::vector<Index> starts;   // window k covers [starts[k], 2 starts[k])
    std::vector<double> sums;
    bool decaying = false;
};

// Sums over doubling windows [n0, 2 n0) starting at `first` until 2 n0 > n_max.
// "Decaying" means the window sums strictly decrease (beyond roundoff) or are negligible.
template <class Term>
WindowSums doubling_window_sums(Term&& term, Index first, Index n_max) {
    WindowSums w;
    for (Index n0 = std::max<Index>(first, 1); 2 * n0 <= n_max; n0 *= 2) {
        double s = 0.0;
        for (Index n = n0; n < 2 * n0; ++n) s += term(n);
        w.starts.push_back(n0);
        w.sums.push_back(s);
    }
    w.decaying = w.sums.size() >= 2;
    for (std::size_t k = 1; k < w.sums.size(); ++k) {
        const double prev = w.sums[k - 1];
        if (!(w.sums[k] <= (1.0 - 1e-6) * prev || w.sums[k] <= 1e-14)) w.decaying = false;
    }
    return w;
}

struct SummabilityReport {
    WindowSums windows;
    double partial_sum = 0.0;
    bool accepted = false;
    std::string warning;
};

inline SummabilityReport perturbation_summability(const PerturbedFamily& p, Index n_max = 100000) {
    SummabilityReport r;
    auto term = [&](Index n) { return std::sqrt(p.base.gamma(n)) * (std::abs(p.xi(n)) + std::abs(p.zeta(n))); };
    for (Index n = 0; n <= n_max; ++n) r.partial_sum += term(n);
    r.windows = doubling_window_sums(term, 64, n_max);
    r.accepted = r.windows.decaying;
    if (!r.accepted) r.warning = "sum sqrt(gamma)(|xi|+|zeta|) is not numerically Cauchy on the window";
    return r;
}

struct FamilyCheck {
    bool positive = true;
    Index first_bad = -1;
    WindowSums ratio_a;   // windowed sup of |alpha_{n-1}/alpha_n - a_{n-1}/a_n|
    WindowSums ratio_b;   // windowed sup of |beta_n/alpha_n - b_n/a_n|
    bool modulated = false;
};

inline FamilyCheck check_family(const FamilyDescriptor& fam, Index n_max = 100000) {
    FamilyCheck c;
    for (Index n = 0; n <= n_max; ++n) {
        if (!(fam.a(n) > 0.0) || !(fam.gamma(n) > 0.0)) {
            c.positive = false;
            c.first_bad = n;
            break;
        }
    }
    auto sup_window = [&](auto&& term) {
        WindowSums w;
        for (Index n0 = 64; 2 * n0 <= n_max; n0 *= 2) {
            double s = 0.0;
            for (Index n = n0; n < 2 * n0; ++n) s = std::max(s, term(n));
            w.starts.push_back(n0);
            w.sums.push_back(s);
        }
        w.decaying = w.sums.size() >= 2;
        for (std::size_t k = 1; k < w.sums.size(); ++k)
            if (!(w.sums[k] <= (1.0 - 1e-6) * w.sums[k - 1] || w.sums[k] <= 1e-14)) w.decaying = false;
        return w;
    };
    c.ratio_a = sup_window([&](Index n) {
        return std::abs(fam.alpha(n - 1) / fam.alpha(n) - fam.a(n - 1) / fam.a(n));
    });
    c.ratio_b = sup_window([&](Index n) {
        return std::abs(fam.beta(n) / fam.alpha(n) - fam.b(n) / fam.a(n));
    });
    c.modulated = c.ratio_a.decaying && c.ratio_b.decaying;
    return c;
}

} // namespace parajacobi
