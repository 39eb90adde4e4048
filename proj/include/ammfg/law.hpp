#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ammfg/errors.hpp"
#include "ammfg/rng.hpp"

namespace ammfg {

// Initial inventory law lambda_0. All three families have finite exponential
// moments of every order.
enum class LawFamily { Dirac, Gaussian, Uniform };

struct InitialLaw {
    LawFamily family = LawFamily::Dirac;
    double c = 0.0;    // Dirac point
    double mu = 0.0;   // Gaussian mean
    double sd = 1.0;   // Gaussian sd, > 0
    double lo = 0.0;   // Uniform bounds, lo < hi
    double hi = 1.0;

    static InitialLaw dirac(double point) {
        InitialLaw l; l.family = LawFamily::Dirac; l.c = point; return l;
    }
    static InitialLaw gaussian(double mean, double stdev) {
        InitialLaw l; l.family = LawFamily::Gaussian; l.mu = mean; l.sd = stdev; return l;
    }
    static InitialLaw uniform(double a, double b) {
        InitialLaw l; l.family = LawFamily::Uniform; l.lo = a; l.hi = b; return l;
    }

    void validate() const {
        if (family == LawFamily::Gaussian && !(sd > 0.0))
            throw config_error("law0.sd must be > 0");
        if (family == LawFamily::Uniform && !(lo < hi))
            throw config_error("law0.lo must be < law0.hi");
    }

    double mean() const {
        switch (family) {
        case LawFamily::Dirac: return c;
        case LawFamily::Gaussian: return mu;
        case LawFamily::Uniform: return 0.5 * (lo + hi);
        }
        return 0.0;
    }

    double stdev() const {
        switch (family) {
        case LawFamily::Dirac: return 0.0;
        case LawFamily::Gaussian: return sd;
        case LawFamily::Uniform: return (hi - lo) / std::sqrt(12.0);
        }
        return 0.0;
    }

    double sample(RandomStream& rs) const {
        switch (family) {
        case LawFamily::Dirac: return c;
        case LawFamily::Gaussian: return mu + sd * rs.normal();
        case LawFamily::Uniform: return rs.uniform(lo, hi);
        }
        return 0.0;
    }

    // Antithetic pair sharing one underlying draw, mirrored around the law's
    // center of symmetry.
    std::pair<double, double> sample_pair(RandomStream& rs) const {
        switch (family) {
        case LawFamily::Dirac: return {c, c};
        case LawFamily::Gaussian: {
            const double z = rs.normal();
            return {mu + sd * z, mu - sd * z};
        }
        case LawFamily::Uniform: {
            const double u = rs.uniform();
            return {lo + (hi - lo) * u, hi - (hi - lo) * u};
        }
        }
        return {0.0, 0.0};
    }
};

namespace detail {
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

// Integral of the linear segment y(x) = y_l + slope (x - x_l) against
// N(mu, sd) restricted to [x_l, x_r].
inline double gauss_segment_integral(double x_l, double x_r, double y_l, double slope,
                                     double mu, double sd) {
    const double zl = (x_l - mu) / sd;
    const double zr = (x_r - mu) / sd;
    const double dPhi = normal_cdf(zr) - normal_cdf(zl);
    const double mean_part = mu * dPhi + sd * (normal_pdf(zl) - normal_pdf(zr));
    return y_l * dPhi + slope * (mean_part - x_l * dPhi);
}
} // namespace detail

// Exact expectation E[f(X)] under the law, for f given as a piecewise-linear
// grid function (constant extension beyond the grid ends). Used to compare
// grid value functions against Monte Carlo policy evaluation.
inline double law_average_piecewise_linear(const InitialLaw& law,
                                           std::span<const double> xs,
                                           std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("law_average: need matching grids with >= 2 nodes");
    auto interp = [&](double x) {
        if (x <= xs.front()) return ys.front();
        if (x >= xs.back()) return ys.back();
        std::size_t j = 1;
        while (j < xs.size() && xs[j] < x) ++j;
        const double t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
        return ys[j - 1] * (1.0 - t) + ys[j] * t;
    };
    switch (law.family) {
    case LawFamily::Dirac:
        return interp(law.c);
    case LawFamily::Uniform: {
        // Exact integral of the piecewise-linear function over [lo, hi].
        const double lo = law.lo, hi = law.hi;
        double acc = 0.0;
        auto add_linear = [&](double a, double b) {
            if (b <= a) return;
            acc += 0.5 * (interp(a) + interp(b)) * (b - a);
        };
        add_linear(lo, std::min(hi, xs.front()));
        for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
            const double a = std::max(lo, xs[j]);
            const double b = std::min(hi, xs[j + 1]);
            add_linear(a, b);
        }
        add_linear(std::max(lo, xs.back()), hi);
        return acc / (hi - lo);
    }
    case LawFamily::Gaussian: {
        const double mu = law.mu, sd = law.sd;
        double acc = 0.0;
        // constant tails
        acc += ys.front() * detail::normal_cdf((xs.front() - mu) / sd);
        acc += ys.back() * (1.0 - detail::normal_cdf((xs.back() - mu) / sd));
        for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
            const double slope = (ys[j + 1] - ys[j]) / (xs[j + 1] - xs[j]);
            acc += detail::gauss_segment_integral(xs[j], xs[j + 1], ys[j], slope, mu, sd);
        }
        return acc;
    }
    }
    return 0.0;
}

} // namespace ammfg
