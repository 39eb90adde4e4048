#pragma once

#include <cmath>
#include <string>

#include "ammfg/errors.hpp"
#include "ammfg/pool.hpp"

namespace ammfg {

// Cost data of the representative trader: running inventory cost h(t, x) and
// terminal cost l(x). Families are enumerated (not arbitrary callables) so
// the growth validator can certify the exponential bound analytically at
// infinity; on a bounded domain the bound is checked by sampling.
enum class CostFamily { Zero, Quadratic, LinearTerminal };

struct CostModel {
    CostFamily family = CostFamily::Zero;
    double phi_h = 0.0; // Quadratic: h(t,x) = phi_h x^2, >= 0
    double phi_l = 0.0; // Quadratic: l(x) = phi_l x^2, >= 0
    double c_l = 0.0;   // LinearTerminal: l(x) = -c_l x
    double c1 = 1.0;    // growth constant, > 0

    double h(double /*t*/, double x) const {
        return family == CostFamily::Quadratic ? phi_h * x * x : 0.0;
    }
    double l(double x) const {
        switch (family) {
        case CostFamily::Quadratic: return phi_l * x * x;
        case CostFamily::LinearTerminal: return -c_l * x;
        case CostFamily::Zero: return 0.0;
        }
        return 0.0;
    }

    void validate() const {
        if (!(c1 > 0.0)) throw config_error("cost.c1 must be > 0");
        if (family == CostFamily::Quadratic && (phi_h < 0.0 || phi_l < 0.0))
            throw config_error("cost.phi_h and cost.phi_l must be >= 0");
    }
};

struct NoiseConfig {
    double sigma; // idiosyncratic inventory volatility, > 0

    void validate() const {
        if (!(sigma > 0.0)) throw config_error("noise.sigma must be > 0");
    }
};

// Running reward f(t, x) = x * impact_drift(t) - h(t, x). Independent of the
// control and of the state law; the population enters only through the mean
// flow inside the impact drift.
inline double running_reward(double t, double x, const PoolConfig& pool,
                             const MeanFlow& flow, const CostModel& cost) {
    return x * impact_drift(pool, flow, t) - cost.h(t, x);
}

// Terminal reward -l(x); the terminal cost enters the objective negatively.
inline double terminal_reward(double x, const CostModel& cost) {
    return -cost.l(x);
}

struct GrowthReport {
    bool pass = false;
    bool tail_ok = false;    // analytic domination as |x| -> infinity
    double binding_x = 0.0;  // sample with the largest lhs/rhs ratio
    double binding_lhs = 0.0;
    double binding_rhs = 0.0;
};

// Checks |h(t,x)| + |l(x)| <= c1 exp(c1 |x|) on a sampled interval plus the
// analytic tail test. All shipped families are polynomial, so the tail is
// dominated for any c1 > 0; on the finite domain the binding sample decides.
inline GrowthReport validate_growth_bound(const CostModel& cost, double x_lo,
                                          double x_hi, int samples) {
    if (samples < 2) throw std::invalid_argument("validate_growth_bound: samples >= 2");
    if (!(x_lo < x_hi)) throw std::invalid_argument("validate_growth_bound: empty domain");
    GrowthReport r;
    r.tail_ok = true; // polynomial growth < exponential for any c1 > 0
    double worst_ratio = -1.0;
    bool all_ok = true;
    for (int s = 0; s < samples; ++s) {
        const double x = x_lo + (x_hi - x_lo) * s / (samples - 1);
        const double lhs = std::abs(cost.h(0.0, x)) + std::abs(cost.l(x));
        const double rhs = cost.c1 * std::exp(cost.c1 * std::abs(x));
        if (lhs > rhs) all_ok = false;
        const double ratio = lhs / rhs;
        if (ratio > worst_ratio) {
            worst_ratio = ratio;
            r.binding_x = x;
            r.binding_lhs = lhs;
            r.binding_rhs = rhs;
        }
    }
    r.pass = all_ok && r.tail_ok;
    return r;
}

// Hamiltonian f(t, x) + z * a / sigma; affine in the control.
inline double hamiltonian(double t, double x, const PoolConfig& pool,
                          const MeanFlow& flow, const CostModel& cost, double z,
                          double a, const NoiseConfig& noise) {
    noise.validate();
    return running_reward(t, x, pool, flow, cost) + z * a / noise.sigma;
}

// Argmax of the control-dependent Hamiltonian part z * a / sigma over the
// interval A. Bang-bang: an endpoint whenever z != 0; at z = 0 every control
// attains the sup and the canonical representative is 0 (0 is in A).
struct ControlArgmax {
    double representative = 0.0;
    double set_lo = 0.0; // argmax set as an interval
    double set_hi = 0.0;
    bool unique = false;
    double drift_part = 0.0; // max_a z a / sigma
};

inline ControlArgmax optimal_control_set(double z, const ControlInterval& ctrl,
                                         const NoiseConfig& noise) {
    noise.validate();
    ControlArgmax r;
    if (z > 0.0) {
        r.representative = r.set_lo = r.set_hi = ctrl.a_max;
        r.unique = true;
    } else if (z < 0.0) {
        r.representative = r.set_lo = r.set_hi = ctrl.a_min;
        r.unique = true;
    } else {
        r.representative = 0.0;
        r.set_lo = ctrl.a_min;
        r.set_hi = ctrl.a_max;
        r.unique = ctrl.a_min == ctrl.a_max;
    }
    r.drift_part = std::max(z * ctrl.a_min, z * ctrl.a_max) / noise.sigma;
    return r;
}

} // namespace ammfg
