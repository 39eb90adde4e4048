#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace ammfg {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

inline MeanSe mean_se(std::span<const double> xs) {
    MeanSe r;
    r.n = xs.size();
    if (r.n == 0) return r;
    double s = 0.0;
    for (double x : xs) s += x;
    r.mean = s / static_cast<double>(r.n);
    if (r.n < 2) return r;
    double ss = 0.0;
    for (double x : xs) {
        const double d = x - r.mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(r.n - 1);
    r.se = std::sqrt(var / static_cast<double>(r.n));
    return r;
}

// Finite discrete probability measure; support ascending, weights sum to 1.
struct DiscreteMeasure {
    std::vector<double> support;
    std::vector<double> weights;
};

// Collapses duplicate support points and sorts ascending.
inline DiscreteMeasure make_discrete_measure(std::vector<double> support,
                                             std::vector<double> weights) {
    if (support.size() != weights.size())
        throw std::invalid_argument("support/weights size mismatch");
    std::vector<std::size_t> idx(support.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return support[a] < support[b]; });
    DiscreteMeasure m;
    for (std::size_t i : idx) {
        if (!m.support.empty() && m.support.back() == support[i]) {
            m.weights.back() += weights[i];
        } else {
            m.support.push_back(support[i]);
            m.weights.push_back(weights[i]);
        }
    }
    return m;
}

// Wasserstein-1 distance between discrete measures on the line, computed in
// closed form as the integral of |F_a - F_b| over the merged support.
inline double w1_distance(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    std::vector<double> pts;
    pts.reserve(a.support.size() + b.support.size());
    pts.insert(pts.end(), a.support.begin(), a.support.end());
    pts.insert(pts.end(), b.support.begin(), b.support.end());
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    double dist = 0.0;
    double cdf_a = 0.0, cdf_b = 0.0;
    std::size_t ia = 0, ib = 0;
    for (std::size_t p = 0; p + 1 < pts.size(); ++p) {
        while (ia < a.support.size() && a.support[ia] <= pts[p]) cdf_a += a.weights[ia++];
        while (ib < b.support.size() && b.support[ib] <= pts[p]) cdf_b += b.weights[ib++];
        dist += std::abs(cdf_a - cdf_b) * (pts[p + 1] - pts[p]);
    }
    return dist;
}

// Two-sample Kolmogorov-Smirnov statistic, sup_x |F_a(x) - F_b(x)|.
inline double ks_distance(std::span<const double> xs, std::span<const double> ys) {
    if (xs.empty() || ys.empty()) throw std::invalid_argument("ks_distance: empty sample");
    std::vector<double> a(xs.begin(), xs.end());
    std::vector<double> b(ys.begin(), ys.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na -
                                 static_cast<double>(j) / nb));
    }
    return d;
}

} // namespace ammfg
