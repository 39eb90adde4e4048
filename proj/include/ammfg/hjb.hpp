#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

#include "ammfg/errors.hpp"
#include "ammfg/law.hpp"
#include "ammfg/parallel.hpp"
#include "ammfg/pool.hpp"
#include "ammfg/reward.hpp"
#include "ammfg/rng.hpp"
#include "ammfg/stats.hpp"

namespace ammfg {

// Threshold on the value gradient below which the feedback control ties to 0.
inline constexpr double kTolZ = 1e-8;

struct SpatialGrid {
    double x_lo;
    double x_hi;
    int n_x; // >= 3

    double dx() const { return (x_hi - x_lo) / (n_x - 1); }
    double node(int i) const { return x_lo + dx() * i; }
    int nearest_index(double x) const {
        const int i = static_cast<int>(std::lround((x - x_lo) / dx()));
        return std::clamp(i, 0, n_x - 1);
    }

    void validate() const {
        if (!(x_lo < x_hi)) throw config_error("grid.x_lo must be < grid.x_hi");
        if (n_x < 3) throw config_error("grid.n_x must be >= 3");
    }
};

// Default spatial domain from the initial law and reachability:
// mean +/- (6 sd + max|a| T + 6 sigma sqrt(T)).
inline SpatialGrid default_spatial_grid(const InitialLaw& law0, const ControlInterval& ctrl,
                                        const NoiseConfig& noise, double horizon,
                                        int n_x = 101) {
    const double span = 6.0 * law0.stdev() + ctrl.max_abs() * horizon +
                        6.0 * noise.sigma * std::sqrt(horizon);
    return SpatialGrid{law0.mean() - span, law0.mean() + span, n_x};
}

// Value function on the time x inventory grid, its spatial derivative, and
// the bang-bang feedback policy (values in {a_min, 0, a_max}).
struct ValueSurface {
    TimeGrid tgrid;
    SpatialGrid sgrid;
    ControlInterval ctrl;
    std::vector<double> v;      // (steps+1) * n_x, row-major in time
    std::vector<double> dvdx;   // same layout
    std::vector<double> policy; // same layout

    std::size_t idx(int j, int i) const {
        return static_cast<std::size_t>(j) * sgrid.n_x + i;
    }
    double value(int j, int i) const { return v[idx(j, i)]; }

    // Out-of-grid feedback lookups clamp to the boundary; the count is a
    // diagnostic for undersized domains.
    mutable std::atomic<std::uint64_t> clamp_count{0};

    ValueSurface() = default;
    ValueSurface(const ValueSurface& o)
        : tgrid(o.tgrid), sgrid(o.sgrid), ctrl(o.ctrl), v(o.v), dvdx(o.dvdx),
          policy(o.policy), clamp_count(o.clamp_count.load()) {}
    ValueSurface& operator=(const ValueSurface& o) {
        tgrid = o.tgrid; sgrid = o.sgrid; ctrl = o.ctrl;
        v = o.v; dvdx = o.dvdx; policy = o.policy;
        clamp_count.store(o.clamp_count.load());
        return *this;
    }
    ValueSurface(ValueSurface&& o) noexcept
        : tgrid(o.tgrid), sgrid(o.sgrid), ctrl(o.ctrl), v(std::move(o.v)),
          dvdx(std::move(o.dvdx)), policy(std::move(o.policy)),
          clamp_count(o.clamp_count.load()) {}
    ValueSurface& operator=(ValueSurface&& o) noexcept {
        tgrid = o.tgrid; sgrid = o.sgrid; ctrl = o.ctrl;
        v = std::move(o.v); dvdx = std::move(o.dvdx); policy = std::move(o.policy);
        clamp_count.store(o.clamp_count.load());
        return *this;
    }
};

namespace detail {

// Central-difference gradient with second-order one-sided stencils at the
// boundary rows, then the three-valued policy from its sign.
inline void fill_dvdx_policy(ValueSurface& s, int j) {
    const int n = s.sgrid.n_x;
    const double dx = s.sgrid.dx();
    const std::size_t base = s.idx(j, 0);
    const double* vj = s.v.data() + base;
    double* gj = s.dvdx.data() + base;
    double* pj = s.policy.data() + base;
    for (int i = 0; i < n; ++i) {
        double g;
        if (i == 0)
            g = (-3.0 * vj[0] + 4.0 * vj[1] - vj[2]) / (2.0 * dx);
        else if (i == n - 1)
            g = (3.0 * vj[n - 1] - 4.0 * vj[n - 2] + vj[n - 3]) / (2.0 * dx);
        else
            g = (vj[i + 1] - vj[i - 1]) / (2.0 * dx);
        gj[i] = g;
        pj[i] = g > kTolZ ? s.ctrl.a_max : (g < -kTolZ ? s.ctrl.a_min : 0.0);
    }
}

// Impact drift at every time node for a frozen flow; throws on floor breach.
inline std::vector<double> impact_drift_nodes(const PoolConfig& pool, const MeanFlow& flow) {
    const auto reserves = reserve_path(pool, flow);
    if (!reserves.floor_ok) {
        std::ostringstream os;
        os << "flow violates reserve floor: min reserve " << reserves.min_reserve
           << " < eps0 = " << pool.eps0;
        throw floor_error(os.str());
    }
    std::vector<double> d(reserves.values.size());
    for (std::size_t j = 0; j < d.size(); ++j) {
        const double r = reserves.values[j];
        d[j] = 2.0 * pool.k * flow.values[j] / (r * r * r);
    }
    return d;
}

} // namespace detail

// Backward explicit finite-difference solve of
//   V_t + max(a_min V_x, a_max V_x, 0) + 1/2 sigma^2 V_xx + x D(t) - h(t,x) = 0,
//   V(T, .) = -l,
// with monotone upwind differencing for the first-order term (forward
// difference for positive controls, backward for negative) and a central
// second difference for diffusion. Boundary rows continue V linearly in x:
// V_xx = 0 there and the one-sided slope serves both upwind directions.
inline ValueSurface solve_hjb(const PoolConfig& pool, const ControlInterval& ctrl,
                              const CostModel& cost, const NoiseConfig& noise,
                              const MeanFlow& flow, const SpatialGrid& sgrid) {
    pool.validate();
    ctrl.validate();
    cost.validate();
    noise.validate();
    sgrid.validate();
    flow.validate();

    const auto adm = validate_admissibility(pool, ctrl, flow.grid);
    if (!adm.pass) {
        std::ostringstream os;
        os << "admissibility violated: max|a| = " << adm.max_abs_control
           << " >= " << adm.bound;
        throw validation_error(os.str());
    }

    const TimeGrid& tg = flow.grid;
    const int M = tg.steps;
    const int n = sgrid.n_x;
    const double dt = tg.dt();
    const double dx = sgrid.dx();
    const double sig2 = noise.sigma * noise.sigma;

    const double cfl = dt * (sig2 / (dx * dx) + ctrl.max_abs() / dx);
    if (cfl > 1.0) {
        std::ostringstream os;
        os << "CFL condition violated: dt (sigma^2/dx^2 + max|a|/dx) = " << cfl
           << " > 1; refine the time grid";
        throw cfl_error(os.str());
    }

    const auto drift = detail::impact_drift_nodes(pool, flow);

    ValueSurface s;
    s.tgrid = tg;
    s.sgrid = sgrid;
    s.ctrl = ctrl;
    s.v.assign(static_cast<std::size_t>(M + 1) * n, 0.0);
    s.dvdx.assign(s.v.size(), 0.0);
    s.policy.assign(s.v.size(), 0.0);

    for (int i = 0; i < n; ++i)
        s.v[s.idx(M, i)] = terminal_reward(sgrid.node(i), cost);
    detail::fill_dvdx_policy(s, M);

    const double half_diff = 0.5 * sig2 / (dx * dx);
    for (int j = M - 1; j >= 0; --j) {
        const double t = tg.node(j);
        const double dj = drift[j];
        const double* vn = s.v.data() + s.idx(j + 1, 0);
        double* vj = s.v.data() + s.idx(j, 0);
        parallel_for(static_cast<std::size_t>(n), [&](std::size_t ii) {
            const int i = static_cast<int>(ii);
            // Linear continuation supplies the missing neighbour at the edges.
            const double v_up = i + 1 <= n - 1 ? vn[i + 1] : 2.0 * vn[i] - vn[i - 1];
            const double v_dn = i - 1 >= 0 ? vn[i - 1] : 2.0 * vn[i] - vn[i + 1];
            const double fwd = (v_up - vn[i]) / dx;
            const double bwd = (vn[i] - v_dn) / dx;
            const double ham = std::max({ctrl.a_max * fwd, ctrl.a_min * bwd, 0.0});
            const double diffusion =
                (i == 0 || i == n - 1) ? 0.0 : half_diff * (v_up - 2.0 * vn[i] + v_dn);
            const double x = sgrid.node(i);
            const double source = x * dj - cost.h(t, x);
            vj[i] = vn[i] + dt * (ham + diffusion + source);
        }, 2048);
        for (int i = 0; i < n; ++i) {
            if (!std::isfinite(vj[i])) {
                std::ostringstream os;
                os << "non-finite value at node (j = " << j << ", i = " << i
                   << "), t = " << t << ", x = " << sgrid.node(i);
                throw numerical_error(os.str());
            }
        }
        detail::fill_dvdx_policy(s, j);
    }
    return s;
}

// Feedback lookup: piecewise constant in t (floor to the grid node), nearest
// node in x with clamping to the grid.
inline double feedback_policy(const ValueSurface& s, double t, double x) {
    const int j = s.tgrid.floor_index(t);
    if (x < s.sgrid.x_lo || x > s.sgrid.x_hi)
        s.clamp_count.fetch_add(1, std::memory_order_relaxed);
    const int i = s.sgrid.nearest_index(x);
    return s.policy[s.idx(j, i)];
}

// Callable adapter; the surface must outlive it.
struct SurfacePolicy {
    const ValueSurface* surface;
    double operator()(double t, double x) const { return feedback_policy(*surface, t, x); }
};

// Feedback with the value gradient interpolated linearly in x and thresholded
// at the query point, which places the bang-bang switch below grid
// resolution. The finite-N game experiments use this form for every player so
// that payoff comparisons are not skewed by nearest-node quantization.
struct InterpolatedSurfacePolicy {
    const ValueSurface* surface;
    double operator()(double t, double x) const {
        const ValueSurface& s = *surface;
        const int j = s.tgrid.floor_index(t);
        if (x < s.sgrid.x_lo || x > s.sgrid.x_hi)
            s.clamp_count.fetch_add(1, std::memory_order_relaxed);
        const double px =
            std::clamp((x - s.sgrid.x_lo) / s.sgrid.dx(), 0.0, double(s.sgrid.n_x - 1));
        const int ix = std::min(static_cast<int>(px), s.sgrid.n_x - 2);
        const double w = px - ix;
        const double g = s.dvdx[s.idx(j, ix)] * (1.0 - w) + s.dvdx[s.idx(j, ix + 1)] * w;
        return g > kTolZ ? s.ctrl.a_max : (g < -kTolZ ? s.ctrl.a_min : 0.0);
    }
};

struct ConstantPolicy {
    double a;
    double operator()(double, double) const { return a; }
};

// Monte Carlo evaluation of a feedback policy: Euler-Maruyama paths of
// dX = policy(t, X) dt + sigma dW from law0, payoff
// sum_j f(t_j, X_j) dt + terminal_reward(X_M). Per-path counter-based
// substreams keyed by (seed, path) make the result independent of the
// parallel schedule.
template <class Policy>
MeanSe policy_evaluate(const Policy& policy, const PoolConfig& pool, const CostModel& cost,
                       const NoiseConfig& noise, const MeanFlow& flow,
                       const InitialLaw& law0, long n_paths, std::uint64_t seed) {
    if (n_paths < 100) throw std::invalid_argument("policy_evaluate: n_paths >= 100");
    law0.validate();
    const TimeGrid& tg = flow.grid;
    const int M = tg.steps;
    const double dt = tg.dt();
    const double sqdt = std::sqrt(dt);
    const auto drift = detail::impact_drift_nodes(pool, flow);

    std::vector<double> payoffs(static_cast<std::size_t>(n_paths));
    parallel_for(payoffs.size(), [&](std::size_t p) {
        RandomStream rs(seed, p);
        double x = law0.sample(rs);
        double acc = 0.0;
        for (int j = 0; j < M; ++j) {
            const double t = tg.node(j);
            acc += (x * drift[j] - cost.h(t, x)) * dt;
            const double a = policy(t, x);
            x += a * dt + noise.sigma * sqdt * rs.normal();
        }
        payoffs[p] = acc + terminal_reward(x, cost);
    });
    return mean_se(payoffs);
}

struct PairedEval {
    MeanSe a;         // first policy
    MeanSe b;         // second policy
    double diff = 0.0;    // mean of per-path payoff(b) - payoff(a)
    double diff_se = 0.0; // SE of the paired difference
};

// Evaluates two policies on shared noise (common random numbers): both paths
// consume the same initial draw and Wiener increments, so the difference
// estimator has far less variance than two independent runs.
template <class PolicyA, class PolicyB>
PairedEval policy_evaluate_paired(const PolicyA& pa, const PolicyB& pb,
                                  const PoolConfig& pool, const CostModel& cost,
                                  const NoiseConfig& noise, const MeanFlow& flow,
                                  const InitialLaw& law0, long n_paths,
                                  std::uint64_t seed) {
    if (n_paths < 100) throw std::invalid_argument("policy_evaluate_paired: n_paths >= 100");
    law0.validate();
    const TimeGrid& tg = flow.grid;
    const int M = tg.steps;
    const double dt = tg.dt();
    const double sqdt = std::sqrt(dt);
    const auto drift = detail::impact_drift_nodes(pool, flow);

    std::vector<double> pay_a(static_cast<std::size_t>(n_paths));
    std::vector<double> pay_b(pay_a.size());
    parallel_for(pay_a.size(), [&](std::size_t p) {
        RandomStream rs(seed, p);
        double xa = law0.sample(rs);
        double xb = xa;
        double acc_a = 0.0, acc_b = 0.0;
        for (int j = 0; j < M; ++j) {
            const double t = tg.node(j);
            acc_a += (xa * drift[j] - cost.h(t, xa)) * dt;
            acc_b += (xb * drift[j] - cost.h(t, xb)) * dt;
            const double dw = noise.sigma * sqdt * rs.normal();
            xa += pa(t, xa) * dt + dw;
            xb += pb(t, xb) * dt + dw;
        }
        pay_a[p] = acc_a + terminal_reward(xa, cost);
        pay_b[p] = acc_b + terminal_reward(xb, cost);
    });
    PairedEval r;
    r.a = mean_se(pay_a);
    r.b = mean_se(pay_b);
    std::vector<double> diff(pay_a.size());
    for (std::size_t p = 0; p < diff.size(); ++p) diff[p] = pay_b[p] - pay_a[p];
    const auto ms = mean_se(diff);
    r.diff = ms.mean;
    r.diff_se = ms.se;
    return r;
}

// Independent dynamic-programming oracle: exact backward induction on a
// controlled trinomial chain (moves {-dx, 0, +dx}) with upwind transition
// probabilities
//   p_up = (sigma^2/2 + dx max(a,0)) dt/dx^2,
//   p_dn = (sigma^2/2 + dx max(-a,0)) dt/dx^2,
// which match the drift exactly and the variance to first order. The control
// is maximized exhaustively over {a_min, 0, a_max}; moves off the grid land
// on a linearly extrapolated ghost value. Returns V(0, .) on the grid.
inline std::vector<double> brute_force_value(const PoolConfig& pool,
                                             const ControlInterval& ctrl,
                                             const CostModel& cost, const NoiseConfig& noise,
                                             const MeanFlow& flow, const SpatialGrid& sgrid) {
    sgrid.validate();
    flow.validate();
    const TimeGrid& tg = flow.grid;
    if (sgrid.n_x > 101 || tg.steps > 64)
        throw std::invalid_argument("brute_force_value: coarse instance only (n_x <= 101, M <= 64)");

    const int M = tg.steps;
    const int n = sgrid.n_x;
    const double dt = tg.dt();
    const double dx = sgrid.dx();
    const double sig2 = noise.sigma * noise.sigma;

    const double consistency = sig2 * dt / (dx * dx) + ctrl.max_abs() * dt / dx;
    if (consistency > 1.0) {
        std::ostringstream os;
        os << "chain consistency violated: sigma^2 dt/dx^2 + max|a| dt/dx = "
           << consistency << " > 1";
        throw cfl_error(os.str());
    }

    const auto drift = detail::impact_drift_nodes(pool, flow);
    const double candidates[3] = {ctrl.a_min, 0.0, ctrl.a_max};

    std::vector<double> value(n), next(n);
    for (int i = 0; i < n; ++i) next[i] = terminal_reward(sgrid.node(i), cost);

    for (int j = M - 1; j >= 0; --j) {
        const double t = tg.node(j);
        for (int i = 0; i < n; ++i) {
            const double v_up = i + 1 <= n - 1 ? next[i + 1] : 2.0 * next[i] - next[i - 1];
            const double v_dn = i - 1 >= 0 ? next[i - 1] : 2.0 * next[i] - next[i + 1];
            double best = -std::numeric_limits<double>::infinity();
            for (double a : candidates) {
                double p_up = (0.5 * sig2 + dx * std::max(a, 0.0)) * dt / (dx * dx);
                double p_dn = (0.5 * sig2 + dx * std::max(-a, 0.0)) * dt / (dx * dx);
                p_up = std::clamp(p_up, 0.0, 1.0);
                p_dn = std::clamp(p_dn, 0.0, 1.0);
                double p_stay = 1.0 - p_up - p_dn;
                if (p_stay < 0.0) {
                    const double scale = 1.0 / (p_up + p_dn);
                    p_up *= scale;
                    p_dn *= scale;
                    p_stay = 0.0;
                }
                best = std::max(best, p_up * v_up + p_stay * next[i] + p_dn * v_dn);
            }
            const double x = sgrid.node(i);
            value[i] = best + (x * drift[j] - cost.h(t, x)) * dt;
        }
        std::swap(value, next);
    }
    return next;
}

// E[V(0, X0)] under law0, with V(0, .) read off the surface.
inline double initial_value_under_law(const ValueSurface& s, const InitialLaw& law0) {
    std::vector<double> xs(static_cast<std::size_t>(s.sgrid.n_x));
    std::vector<double> ys(xs.size());
    for (int i = 0; i < s.sgrid.n_x; ++i) {
        xs[i] = s.sgrid.node(i);
        ys[i] = s.value(0, i);
    }
    return law_average_piecewise_linear(law0, xs, ys);
}

} // namespace ammfg
