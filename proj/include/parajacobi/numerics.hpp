#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

namespace parajacobi {

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

struct RobustMean {
    std::complex<double> mean;
    std::size_t kept = 0;
    std::size_t rejected = 0;
};

// Mean of complex samples after dropping those farther than 3 median absolute
// deviations from the coordinatewise median.
inline RobustMean robust_mean(const std::vector<std::complex<double>>& z) {
    RobustMean r;
    if (z.empty()) return r;
    std::vector<double> re, im;
    for (const auto& w : z) {
        re.push_back(w.real());
        im.push_back(w.imag());
    }
    const std::complex<double> med(median(re), median(im));
    std::vector<double> dist;
    for (const auto& w : z) dist.push_back(std::abs(w - med));
    const double mad = median(dist);
    const double cut = 3.0 * mad + 1e-300;
    for (std::size_t k = 0; k < z.size(); ++k) {
        if (dist[k] <= cut) {
            r.mean += z[k];
            ++r.kept;
        } else {
            ++r.rejected;
        }
    }
    if (r.kept) r.mean /= static_cast<double>(r.kept);
    else r.mean = med;
    return r;
}

// (max - min)/|mean| over a window.
inline double relative_fluctuation(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::infinity();
    double lo = v[0], hi = v[0], s = 0.0;
    for (double w : v) {
        lo = std::min(lo, w);
        hi = std::max(hi, w);
        s += w;
    }
    const double mean = s / static_cast<double>(v.size());
    return (hi - lo) / std::abs(mean);
}

// Least-squares slope of y against x.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sx += x[k];
        sy += y[k];
        sxx += x[k] * x[k];
        sxy += x[k] * y[k];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace parajacobi
