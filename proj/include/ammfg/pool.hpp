#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "ammfg/errors.hpp"

namespace ammfg {

// Constant-product pool: invariant k, spot price k / reserve^2. The pool's
// risky-token reserve is assumed to stay above the floor eps0 at all times;
// the admissibility bound below makes that automatic.
struct PoolConfig {
    double k;      // constant-product invariant, > 0
    double x0;     // initial risky-token reserve, > x_eps0
    double eps0;   // reserve floor, in (0, x0)
    double sigma0; // price noise volatility, >= 0

    void validate() const {
        if (!(k > 0.0)) throw config_error("pool.k must be > 0");
        if (!(eps0 > 0.0)) throw config_error("pool.eps0 must be > 0");
        if (!(x0 > eps0)) throw config_error("pool.x0 must exceed pool.eps0");
        if (!(sigma0 >= 0.0)) throw config_error("pool.sigma0 must be >= 0");
    }
};

// Compact control interval A = [a_min, a_max] containing the origin.
struct ControlInterval {
    double a_min; // <= 0
    double a_max; // >= 0

    double max_abs() const { return std::max(-a_min, a_max); }
    double range() const { return a_max - a_min; }

    void validate() const {
        if (!(a_min <= 0.0 && 0.0 <= a_max))
            throw config_error("control interval must contain 0 (a_min <= 0 <= a_max)");
    }
};

// Uniform grid t_j = j * dt on [0, horizon].
struct TimeGrid {
    double horizon; // > 0
    int steps;      // >= 1

    double dt() const { return horizon / steps; }
    int nodes() const { return steps + 1; }
    double node(int j) const { return dt() * j; }

    // Index of the grid node at or just below t; tolerant of the usual
    // t = j*dt rounding.
    int floor_index(double t) const {
        const int j = static_cast<int>(std::floor(t / dt() + 1e-9));
        return std::clamp(j, 0, steps);
    }

    void validate() const {
        if (!(horizon > 0.0)) throw config_error("time.horizon must be > 0");
        if (steps < 1) throw config_error("time.steps must be >= 1");
    }

    bool operator==(const TimeGrid&) const = default;
};

// Mean control flow qbar_t, piecewise linear between grid nodes. This is the
// object the mean-field fixed point iterates on.
struct MeanFlow {
    TimeGrid grid;
    std::vector<double> values; // one per node

    static MeanFlow zero(const TimeGrid& g) {
        return MeanFlow{g, std::vector<double>(static_cast<std::size_t>(g.nodes()), 0.0)};
    }
    static MeanFlow constant(const TimeGrid& g, double v) {
        return MeanFlow{g, std::vector<double>(static_cast<std::size_t>(g.nodes()), v)};
    }

    void validate() const {
        if (static_cast<int>(values.size()) != grid.nodes())
            throw std::invalid_argument("MeanFlow: values size does not match grid");
    }

    double value_at(double t) const {
        const double dt = grid.dt();
        if (t <= 0.0) return values.front();
        if (t >= grid.horizon) return values.back();
        int j = static_cast<int>(std::floor(t / dt));
        j = std::clamp(j, 0, grid.steps - 1);
        const double theta = (t - grid.node(j)) / dt;
        return values[j] * (1.0 - theta) + values[j + 1] * theta;
    }

    // Cumulative trapezoid integral at every node; exact for the piecewise
    // linear flow.
    std::vector<double> cumulative_integral() const {
        std::vector<double> cum(values.size(), 0.0);
        const double dt = grid.dt();
        for (std::size_t j = 1; j < values.size(); ++j)
            cum[j] = cum[j - 1] + 0.5 * (values[j - 1] + values[j]) * dt;
        return cum;
    }

    double integral_to(double t) const {
        const double dt = grid.dt();
        const double tc = std::clamp(t, 0.0, grid.horizon);
        int j = static_cast<int>(std::floor(tc / dt));
        j = std::clamp(j, 0, grid.steps);
        double acc = 0.0;
        for (int m = 1; m <= j; ++m) acc += 0.5 * (values[m - 1] + values[m]) * dt;
        const double rem = tc - grid.node(j);
        if (rem > 0.0 && j < grid.steps)
            acc += 0.5 * (values[j] + value_at(tc)) * rem;
        return acc;
    }
};

// Spot price k / reserve^2; strictly decreasing in the reserve.
inline double spot_price(const PoolConfig& pool, double reserve) {
    if (!(reserve > 0.0))
        throw std::domain_error("spot_price: reserve must be > 0");
    return pool.k / (reserve * reserve);
}

struct ReservePath {
    std::vector<double> values; // reserve at every grid node
    bool floor_ok = true;       // min over nodes >= eps0
    double min_reserve = 0.0;
};

// Pool reserve X(t_j) = x0 - integral of qbar up to t_j. Floor violations are
// flagged, not clamped.
inline ReservePath reserve_path(const PoolConfig& pool, const MeanFlow& flow) {
    flow.validate();
    ReservePath path;
    const auto cum = flow.cumulative_integral();
    path.values.resize(cum.size());
    path.min_reserve = pool.x0;
    for (std::size_t j = 0; j < cum.size(); ++j) {
        path.values[j] = pool.x0 - cum[j];
        path.min_reserve = std::min(path.min_reserve, path.values[j]);
    }
    path.floor_ok = path.min_reserve >= pool.eps0;
    return path;
}

// Permanent price-impact drift 2k qbar_t / (x0 - int_0^t qbar)^3.
inline double impact_drift(const PoolConfig& pool, const MeanFlow& flow, double t) {
    if (t < 0.0 || t > flow.grid.horizon * (1.0 + 1e-12))
        throw std::invalid_argument("impact_drift: t outside [0, horizon]");
    const double reserve = pool.x0 - flow.integral_to(t);
    if (reserve < pool.eps0) {
        std::ostringstream os;
        os << "impact_drift: reserve " << reserve << " below floor " << pool.eps0
           << " at t = " << t;
        throw floor_error(os.str());
    }
    return 2.0 * pool.k * flow.value_at(t) / (reserve * reserve * reserve);
}

struct AdmissibilityReport {
    bool pass = false;
    double max_abs_control = 0.0; // max_{a in A} |a|
    double bound = 0.0;           // (x0 - eps0) / horizon
};

// The floor holds for every admissible flow iff max|a| < (x0 - eps0) / T,
// strictly: equality leaves no margin at t = T.
inline AdmissibilityReport validate_admissibility(const PoolConfig& pool,
                                                  const ControlInterval& ctrl,
                                                  const TimeGrid& grid) {
    AdmissibilityReport r;
    r.max_abs_control = ctrl.max_abs();
    r.bound = (pool.x0 - pool.eps0) / grid.horizon;
    r.pass = r.max_abs_control < r.bound;
    return r;
}

// Uniform bound 2k max|a| / eps0^3 on |impact_drift| over admissible flows.
inline double impact_bound(const PoolConfig& pool, const ControlInterval& ctrl) {
    return 2.0 * pool.k * ctrl.max_abs() / (pool.eps0 * pool.eps0 * pool.eps0);
}

// Price trajectory P(t_j) = k / X(t_j)^2 + sigma0 * W0(t_j) where W0 is the
// cumulative sum of the supplied Wiener increments (one per step).
inline std::vector<double> price_path(const PoolConfig& pool, const MeanFlow& flow,
                                      std::span<const double> increments) {
    flow.validate();
    if (static_cast<int>(increments.size()) != flow.grid.steps)
        throw std::invalid_argument("price_path: need one increment per step");
    const auto reserves = reserve_path(pool, flow);
    if (!reserves.floor_ok) {
        std::ostringstream os;
        os << "price_path: reserve " << reserves.min_reserve << " below floor "
           << pool.eps0;
        throw floor_error(os.str());
    }
    std::vector<double> prices(reserves.values.size());
    double w0 = 0.0;
    for (std::size_t j = 0; j < prices.size(); ++j) {
        if (j > 0) w0 += increments[j - 1];
        prices[j] = spot_price(pool, reserves.values[j]) + pool.sigma0 * w0;
    }
    return prices;
}

} // namespace ammfg
