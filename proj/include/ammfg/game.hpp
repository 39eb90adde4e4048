#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

#include "ammfg/errors.hpp"
#include "ammfg/hjb.hpp"
#include "ammfg/law.hpp"
#include "ammfg/parallel.hpp"
#include "ammfg/pool.hpp"
#include "ammfg/reward.hpp"
#include "ammfg/rng.hpp"
#include "ammfg/stats.hpp"

namespace ammfg {

// Empirical measure of a control sample: support ascending, weights are
// multiplicities over the sample size.
inline DiscreteMeasure empirical_measure(std::span<const double> samples) {
    if (samples.empty()) throw std::invalid_argument("empirical_measure: empty sample");
    std::vector<double> support(samples.begin(), samples.end());
    std::vector<double> weights(support.size(), 1.0 / static_cast<double>(support.size()));
    return make_discrete_measure(std::move(support), std::move(weights));
}

struct GameConfig {
    int n = 1;            // player count
    long n_paths = 1000;  // Monte Carlo repetitions, >= 100
    std::uint64_t seed = 2;
    TimeGrid tgrid;
    PoolConfig pool;
    ControlInterval ctrl;
    CostModel cost;
    NoiseConfig noise;
    InitialLaw law0;
    double y0 = 0.0; // initial DAI inventory per player

    void validate() const {
        if (n < 1) throw config_error("game.n must be >= 1");
        if (n_paths < 100) throw config_error("game.n_paths must be >= 100");
        tgrid.validate();
        pool.validate();
        ctrl.validate();
        cost.validate();
        noise.validate();
        law0.validate();
        if (!validate_admissibility(pool, ctrl, tgrid).pass)
            throw validation_error("game config fails the admissibility bound");
    }
};

using PlayerPolicy = std::function<double(double, double)>;

struct GameResult {
    std::vector<double> j_hat; // per-player mean payoff
    std::vector<double> se;    // per-player standard error
    double pooled = 0.0;       // average over players
    double pooled_se = 0.0;
    // diagnostics
    double max_accounting_rel_err = 0.0;
    double min_reserve = 0.0;
    double terminal_reserve_mean = 0.0;
    double terminal_price_mean = 0.0;
};

// Finite-N game simulation with full inventory accounting. Per repetition:
// sample X0^i from lambda_0, step the pool reserve with the empirical average
// control, the price with its common noise, each inventory with its own
// noise, and track the total wealth V^i both directly (Y + X P) and through
// the discrete product-rule increments; the two agree to rounding and the
// worst relative deviation is reported. Payoff: V_M - sum h dt - l(X_M).
inline GameResult simulate_game(const GameConfig& gc, std::span<const PlayerPolicy> policies) {
    gc.validate();
    if (static_cast<int>(policies.size()) != gc.n)
        throw std::invalid_argument("simulate_game: one policy per player required");

    const int n = gc.n;
    const long reps = gc.n_paths;
    const int M = gc.tgrid.steps;
    const double dt = gc.tgrid.dt();
    const double sqdt = std::sqrt(dt);

    std::vector<double> payoffs(static_cast<std::size_t>(reps) * n);
    std::vector<double> rep_acct(static_cast<std::size_t>(reps));
    std::vector<double> rep_min_reserve(static_cast<std::size_t>(reps));
    std::vector<double> rep_term_reserve(static_cast<std::size_t>(reps));
    std::vector<double> rep_term_price(static_cast<std::size_t>(reps));

    parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
        RandomStream common(gc.seed, r, 0);
        std::vector<RandomStream> streams;
        streams.reserve(n);
        std::vector<double> x(n), y(n, gc.y0), v(n), cost_int(n, 0.0), a(n);
        for (int i = 0; i < n; ++i) {
            streams.emplace_back(gc.seed, r, static_cast<std::uint64_t>(i) + 1);
            x[i] = gc.law0.sample(streams[i]);
        }
        double reserve = gc.pool.x0;
        double w0 = 0.0;
        double price = spot_price(gc.pool, reserve);
        for (int i = 0; i < n; ++i) v[i] = y[i] + x[i] * price;

        double min_res = reserve;
        double acct_err = 0.0;
        for (int j = 0; j < M; ++j) {
            const double t = gc.tgrid.node(j);
            double abar = 0.0;
            for (int i = 0; i < n; ++i) {
                a[i] = policies[i](t, x[i]);
                abar += a[i];
                cost_int[i] += gc.cost.h(t, x[i]) * dt;
            }
            abar /= n;
            reserve -= abar * dt;
            min_res = std::min(min_res, reserve);
            if (reserve < gc.pool.eps0) {
                std::ostringstream os;
                os << "simulate_game: pool reserve " << reserve << " below floor "
                   << gc.pool.eps0 << " at step " << j
                   << " (admissibility should prevent this)";
                throw floor_error(os.str());
            }
            w0 += sqdt * common.normal();
            const double price_next = spot_price(gc.pool, reserve) + gc.pool.sigma0 * w0;
            for (int i = 0; i < n; ++i) {
                const double dy = -a[i] * price * dt;
                const double dxi = a[i] * dt + gc.noise.sigma * sqdt * streams[i].normal();
                const double x_next = x[i] + dxi;
                // discrete product rule: d(XP) = X_{j+1} dP + dX P_j
                v[i] += dy + x_next * (price_next - price) + dxi * price;
                y[i] += dy;
                x[i] = x_next;
                const double direct = y[i] + x[i] * price_next;
                acct_err = std::max(acct_err,
                                    std::abs(v[i] - direct) / std::max(1.0, std::abs(direct)));
            }
            price = price_next;
        }
        for (int i = 0; i < n; ++i)
            payoffs[r * n + i] = v[i] - cost_int[i] - gc.cost.l(x[i]);
        rep_acct[r] = acct_err;
        rep_min_reserve[r] = min_res;
        rep_term_reserve[r] = reserve;
        rep_term_price[r] = price;
    }, 16);

    GameResult res;
    res.j_hat.resize(n);
    res.se.resize(n);
    std::vector<double> col(static_cast<std::size_t>(reps));
    for (int i = 0; i < n; ++i) {
        for (long r = 0; r < reps; ++r) col[r] = payoffs[static_cast<std::size_t>(r) * n + i];
        const auto ms = mean_se(col);
        res.j_hat[i] = ms.mean;
        res.se[i] = ms.se;
    }
    for (long r = 0; r < reps; ++r) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += payoffs[static_cast<std::size_t>(r) * n + i];
        col[r] = s / n;
    }
    const auto pooled = mean_se(col);
    res.pooled = pooled.mean;
    res.pooled_se = pooled.se;

    res.min_reserve = std::numeric_limits<double>::infinity();
    double acct = 0.0, tr = 0.0, tp = 0.0;
    for (long r = 0; r < reps; ++r) {
        acct = std::max(acct, rep_acct[r]);
        res.min_reserve = std::min(res.min_reserve, rep_min_reserve[r]);
        tr += rep_term_reserve[r];
        tp += rep_term_price[r];
    }
    res.max_accounting_rel_err = acct;
    res.terminal_reserve_mean = tr / static_cast<double>(reps);
    res.terminal_price_mean = tp / static_cast<double>(reps);
    return res;
}

// Deviator's feedback data on (t, x, c) where c is the cumulative trade.
// Stores the Hamiltonian slope U_x + U_c + x 2k/(n R^3); the bang-bang
// control is recovered at lookup time by bilinear interpolation of the slope
// in (x, c), which resolves the switching surface below grid resolution
// instead of snapping it to the nearest node.
struct DeviatorSurface {
    TimeGrid tgrid;
    SpatialGrid xgrid;
    ControlInterval ctrl;
    double c_lo = 0.0, c_hi = 0.0;
    int n_c = 1;
    std::vector<double> slope; // (steps+1) * n_x * n_c

    double dc() const { return n_c > 1 ? (c_hi - c_lo) / (n_c - 1) : 0.0; }
    std::size_t idx(int j, int ix, int ic) const {
        return (static_cast<std::size_t>(j) * xgrid.n_x + ix) * n_c + ic;
    }

    double slope_at(double t, double x, double c) const {
        const int j = tgrid.floor_index(t);
        const double dx = xgrid.dx();
        const double px = std::clamp((x - xgrid.x_lo) / dx, 0.0, double(xgrid.n_x - 1));
        const int ix = std::min(static_cast<int>(px), xgrid.n_x - 2);
        const double wx = px - ix;
        if (n_c == 1) {
            return slope[idx(j, ix, 0)] * (1.0 - wx) + slope[idx(j, ix + 1, 0)] * wx;
        }
        const double pc = std::clamp((c - c_lo) / dc(), 0.0, double(n_c - 1));
        const int ic = std::min(static_cast<int>(pc), n_c - 2);
        const double wc = pc - ic;
        const double lo = slope[idx(j, ix, ic)] * (1.0 - wx) + slope[idx(j, ix + 1, ic)] * wx;
        const double hi =
            slope[idx(j, ix, ic + 1)] * (1.0 - wx) + slope[idx(j, ix + 1, ic + 1)] * wx;
        return lo * (1.0 - wc) + hi * wc;
    }

    double lookup(double t, double x, double c) const {
        const double s = slope_at(t, x, c);
        return s > kTolZ ? ctrl.a_max : (s < -kTolZ ? ctrl.a_min : 0.0);
    }
};

struct BestResponseResult {
    double j_eq = 0.0;   // deviator payoff under the equilibrium profile
    double se_eq = 0.0;
    double j_dev = 0.0;  // deviator payoff under the best-response deviation
    double se_dev = 0.0;
    double eps_hat = 0.0;    // paired mean of j_dev - j_eq
    double se_paired = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0; // 95% normal CI
    long n_paths = 0;
};

namespace detail {

// Others' mean control per time node, simulated with the exact substreams the
// full game assigns to players != deviator. Since inventories do not feel the
// pool, these are the realized game trajectories.
inline std::vector<double> frozen_others_flow(const GameConfig& gc, const PlayerPolicy& eq,
                                              int deviator) {
    const int M = gc.tgrid.steps;
    std::vector<double> sums(static_cast<std::size_t>(M + 1), 0.0);
    if (gc.n < 2) return sums;
    const double dt = gc.tgrid.dt();
    const double sqdt = std::sqrt(dt);
    std::vector<std::vector<double>> rep_sums(
        static_cast<std::size_t>(gc.n_paths),
        std::vector<double>(static_cast<std::size_t>(M + 1), 0.0));
    parallel_for(static_cast<std::size_t>(gc.n_paths), [&](std::size_t r) {
        for (int i = 0; i < gc.n; ++i) {
            if (i == deviator) continue;
            RandomStream rs(gc.seed, r, static_cast<std::uint64_t>(i) + 1);
            double x = gc.law0.sample(rs);
            for (int j = 0; j < M; ++j) {
                rep_sums[r][j] += eq(gc.tgrid.node(j), x);
                x += eq(gc.tgrid.node(j), x) * dt + gc.noise.sigma * sqdt * rs.normal();
            }
            rep_sums[r][M] += eq(gc.tgrid.horizon, x);
        }
    }, 16);
    for (long r = 0; r < gc.n_paths; ++r)
        for (int j = 0; j <= M; ++j) sums[j] += rep_sums[r][j];
    const double denom = static_cast<double>(gc.n_paths) * (gc.n - 1);
    for (auto& s : sums) s /= denom;
    return sums;
}

} // namespace detail

// Backward solve of the deviator's augmented HJB on (t, x, c), c = own
// cumulative trade. The pool reserve seen by the deviator is
//   R(t, c) = x0 - ((n-1)/n) int qbar_others - c/n,
// and the price-impact reward splits into the others' part
//   D_n(t, c) = 2k ((n-1)/n) qbar_others(t) / R^3   (a source term)
// plus the deviator's own weight x (2k / (n R^3)) a, which is linear in the
// control and joins a U_x + a U_c in the maximized Hamiltonian, so bang-bang
// over {a_min, 0, a_max} stays exact:
//   U_t + max_a a (U_x + U_c + x 2k/(n R^3)) + 1/2 sigma^2 U_xx
//       + x D_n(t, c) - h = 0,  U(T, x, c) = -l(x).
// Upwind in both advected directions, Godunov max; the stored policy uses the
// central slope with the usual tie at 0.
inline DeviatorSurface solve_deviator_hjb(const GameConfig& gc,
                                          std::span<const double> others_flow,
                                          const SpatialGrid& xgrid, int n_c = 51) {
    xgrid.validate();
    const int M = gc.tgrid.steps;
    const int nx = xgrid.n_x;
    const double dt = gc.tgrid.dt();
    const double dx = xgrid.dx();
    const double sig2 = gc.noise.sigma * gc.noise.sigma;
    const double maxa = gc.ctrl.max_abs();

    DeviatorSurface s;
    s.tgrid = gc.tgrid;
    s.xgrid = xgrid;
    s.ctrl = gc.ctrl;
    s.c_lo = gc.ctrl.a_min * gc.tgrid.horizon;
    s.c_hi = gc.ctrl.a_max * gc.tgrid.horizon;
    s.n_c = s.c_hi > s.c_lo ? std::max(n_c, 3) : 1;
    const int nc = s.n_c;
    const double dc = s.dc();

    double cfl = dt * (sig2 / (dx * dx) + maxa / dx);
    if (nc > 1) cfl += dt * maxa / dc;
    if (cfl > 1.0) {
        std::ostringstream os;
        os << "deviator HJB CFL violated: dt (sigma^2/dx^2 + max|a|/dx + max|a|/dc) = "
           << cfl << " > 1; refine the time grid";
        throw cfl_error(os.str());
    }

    // others' cumulative flow and the finite-n impact drift on the (t, c) grid
    const double w_others = gc.n > 1 ? static_cast<double>(gc.n - 1) / gc.n : 0.0;
    std::vector<double> cum(static_cast<std::size_t>(M + 1), 0.0);
    for (int j = 1; j <= M; ++j)
        cum[j] = cum[j - 1] + 0.5 * (others_flow[j - 1] + others_flow[j]) * dt;
    std::vector<double> drift(static_cast<std::size_t>(M + 1) * nc);
    std::vector<double> own_impact(drift.size()); // 2k / (n R^3)
    for (int j = 0; j <= M; ++j) {
        for (int ic = 0; ic < nc; ++ic) {
            const double c = s.c_lo + dc * ic;
            const double reserve = gc.pool.x0 - w_others * cum[j] - c / gc.n;
            if (reserve < gc.pool.eps0) {
                std::ostringstream os;
                os << "deviator reserve " << reserve << " below floor at t = "
                   << gc.tgrid.node(j) << ", c = " << c;
                throw floor_error(os.str());
            }
            const double r3 = reserve * reserve * reserve;
            drift[static_cast<std::size_t>(j) * nc + ic] =
                2.0 * gc.pool.k * w_others * others_flow[j] / r3;
            own_impact[static_cast<std::size_t>(j) * nc + ic] = 2.0 * gc.pool.k / (gc.n * r3);
        }
    }

    std::vector<double> u(static_cast<std::size_t>(nx) * nc), u_next(u.size());
    s.slope.assign(static_cast<std::size_t>(M + 1) * u.size(), 0.0);
    auto flat = [nc](int ix, int ic) { return static_cast<std::size_t>(ix) * nc + ic; };

    auto fill_slope = [&](int j, const std::vector<double>& grid_u) {
        for (int ix = 0; ix < nx; ++ix) {
            const double x = xgrid.node(ix);
            for (int ic = 0; ic < nc; ++ic) {
                double gx;
                if (ix == 0)
                    gx = (-3.0 * grid_u[flat(0, ic)] + 4.0 * grid_u[flat(1, ic)] -
                          grid_u[flat(2, ic)]) / (2.0 * dx);
                else if (ix == nx - 1)
                    gx = (3.0 * grid_u[flat(nx - 1, ic)] - 4.0 * grid_u[flat(nx - 2, ic)] +
                          grid_u[flat(nx - 3, ic)]) / (2.0 * dx);
                else
                    gx = (grid_u[flat(ix + 1, ic)] - grid_u[flat(ix - 1, ic)]) / (2.0 * dx);
                double gc_slope = 0.0;
                if (nc > 2) {
                    if (ic == 0)
                        gc_slope = (-3.0 * grid_u[flat(ix, 0)] + 4.0 * grid_u[flat(ix, 1)] -
                                    grid_u[flat(ix, 2)]) / (2.0 * dc);
                    else if (ic == nc - 1)
                        gc_slope = (3.0 * grid_u[flat(ix, nc - 1)] -
                                    4.0 * grid_u[flat(ix, nc - 2)] +
                                    grid_u[flat(ix, nc - 3)]) / (2.0 * dc);
                    else
                        gc_slope = (grid_u[flat(ix, ic + 1)] - grid_u[flat(ix, ic - 1)]) /
                                   (2.0 * dc);
                }
                s.slope[s.idx(j, ix, ic)] =
                    gx + gc_slope + x * own_impact[static_cast<std::size_t>(j) * nc + ic];
            }
        }
    };

    for (int ix = 0; ix < nx; ++ix)
        for (int ic = 0; ic < nc; ++ic)
            u_next[flat(ix, ic)] = terminal_reward(xgrid.node(ix), gc.cost);
    fill_slope(M, u_next);

    const double half_diff = 0.5 * sig2 / (dx * dx);
    for (int j = M - 1; j >= 0; --j) {
        const double t = gc.tgrid.node(j);
        for (int ix = 0; ix < nx; ++ix) {
            const double x = xgrid.node(ix);
            for (int ic = 0; ic < nc; ++ic) {
                const double here = u_next[flat(ix, ic)];
                const double x_up = ix + 1 <= nx - 1 ? u_next[flat(ix + 1, ic)]
                                                     : 2.0 * here - u_next[flat(ix - 1, ic)];
                const double x_dn = ix - 1 >= 0 ? u_next[flat(ix - 1, ic)]
                                                : 2.0 * here - u_next[flat(ix + 1, ic)];
                double c_up = here, c_dn = here;
                if (nc > 1) {
                    c_up = ic + 1 <= nc - 1 ? u_next[flat(ix, ic + 1)]
                                            : 2.0 * here - u_next[flat(ix, ic - 1)];
                    c_dn = ic - 1 >= 0 ? u_next[flat(ix, ic - 1)]
                                       : 2.0 * here - u_next[flat(ix, ic + 1)];
                }
                const double own = x * own_impact[static_cast<std::size_t>(j) * nc + ic];
                const double fwd =
                    (x_up - here) / dx + (nc > 1 ? (c_up - here) / dc : 0.0) + own;
                const double bwd =
                    (here - x_dn) / dx + (nc > 1 ? (here - c_dn) / dc : 0.0) + own;
                const double ham = std::max({gc.ctrl.a_max * fwd, gc.ctrl.a_min * bwd, 0.0});
                const double diffusion = (ix == 0 || ix == nx - 1)
                                             ? 0.0
                                             : half_diff * (x_up - 2.0 * here + x_dn);
                const double src = x * drift[static_cast<std::size_t>(j) * nc + ic] -
                                   gc.cost.h(t, x);
                u[flat(ix, ic)] = here + dt * (ham + diffusion + src);
                if (!std::isfinite(u[flat(ix, ic)])) {
                    std::ostringstream os;
                    os << "deviator HJB non-finite at (j = " << j << ", ix = " << ix
                       << ", ic = " << ic << ")";
                    throw numerical_error(os.str());
                }
            }
        }
        std::swap(u, u_next);
        fill_slope(j, u_next);
    }
    return s;
}

// Runs the equilibrium and deviation games on shared noise (common random
// numbers) and reports the deviator's paired payoff gap. The deviation policy
// is a feedback on (t, x, c) with c the deviator's cumulative trade.
template <class DeviationPolicy>
BestResponseResult paired_deviation_gap(const GameConfig& gc, const PlayerPolicy& eq,
                                        const DeviationPolicy& dev, int deviator) {
    gc.validate();
    if (deviator < 0 || deviator >= gc.n)
        throw std::invalid_argument("paired_deviation_gap: deviator index out of range");
    const int n = gc.n;
    const int M = gc.tgrid.steps;
    const long reps = gc.n_paths;
    const double dt = gc.tgrid.dt();
    const double sqdt = std::sqrt(dt);

    std::vector<double> j_eq(static_cast<std::size_t>(reps));
    std::vector<double> j_dev(static_cast<std::size_t>(reps));
    parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
        RandomStream common(gc.seed, r, 0);
        std::vector<RandomStream> streams;
        streams.reserve(n);
        std::vector<double> xe(n), xd(n);
        for (int i = 0; i < n; ++i) {
            streams.emplace_back(gc.seed, r, static_cast<std::uint64_t>(i) + 1);
            xe[i] = gc.law0.sample(streams[i]);
            xd[i] = xe[i];
        }
        double res_e = gc.pool.x0, res_d = gc.pool.x0;
        double w0 = 0.0;
        double pe = spot_price(gc.pool, res_e), pd = pe;
        double ye = gc.y0, yd = gc.y0;           // deviator's DAI inventory
        double cd = 0.0;                         // deviator's cumulative trade
        double cost_e = 0.0, cost_d = 0.0;
        std::vector<double> ae(n), ad(n);
        for (int j = 0; j < M; ++j) {
            const double t = gc.tgrid.node(j);
            double abar_e = 0.0, abar_d = 0.0;
            for (int i = 0; i < n; ++i) {
                ae[i] = eq(t, xe[i]);
                ad[i] = i == deviator ? dev(t, xd[i], cd) : eq(t, xd[i]);
                abar_e += ae[i];
                abar_d += ad[i];
            }
            abar_e /= n;
            abar_d /= n;
            cost_e += gc.cost.h(t, xe[deviator]) * dt;
            cost_d += gc.cost.h(t, xd[deviator]) * dt;
            res_e -= abar_e * dt;
            res_d -= abar_d * dt;
            w0 += sqdt * common.normal();
            const double pe_next = spot_price(gc.pool, res_e) + gc.pool.sigma0 * w0;
            const double pd_next = spot_price(gc.pool, res_d) + gc.pool.sigma0 * w0;
            cd += ad[deviator] * dt;
            for (int i = 0; i < n; ++i) {
                const double dw = gc.noise.sigma * sqdt * streams[i].normal();
                if (i == deviator) {
                    ye -= ae[i] * pe * dt;
                    yd -= ad[i] * pd * dt;
                }
                xe[i] += ae[i] * dt + dw;
                xd[i] += ad[i] * dt + dw;
            }
            pe = pe_next;
            pd = pd_next;
        }
        j_eq[r] = ye + xe[deviator] * pe - cost_e - gc.cost.l(xe[deviator]);
        j_dev[r] = yd + xd[deviator] * pd - cost_d - gc.cost.l(xd[deviator]);
    }, 16);

    BestResponseResult out;
    out.n_paths = reps;
    const auto ms_eq = mean_se(j_eq);
    const auto ms_dev = mean_se(j_dev);
    out.j_eq = ms_eq.mean;
    out.se_eq = ms_eq.se;
    out.j_dev = ms_dev.mean;
    out.se_dev = ms_dev.se;
    std::vector<double> diff(j_eq.size());
    for (std::size_t r = 0; r < diff.size(); ++r) diff[r] = j_dev[r] - j_eq[r];
    const auto ms_d = mean_se(diff);
    out.eps_hat = ms_d.mean;
    out.se_paired = ms_d.se;
    out.ci_lo = ms_d.mean - 1.96 * ms_d.se;
    out.ci_hi = ms_d.mean + 1.96 * ms_d.se;
    return out;
}

// Best-response experiment for one deviator: freeze the others' flow, solve
// the augmented HJB for the deviation policy, then measure its paired gap.
inline BestResponseResult best_response_value(const GameConfig& gc, const PlayerPolicy& eq,
                                              int deviator, const SpatialGrid& xgrid,
                                              int n_c = 51) {
    gc.validate();
    if (deviator < 0 || deviator >= gc.n)
        throw std::invalid_argument("best_response_value: deviator index out of range");
    const auto others = detail::frozen_others_flow(gc, eq, deviator);
    const DeviatorSurface beta = solve_deviator_hjb(gc, others, xgrid, n_c);
    return paired_deviation_gap(
        gc, eq, [&beta](double t, double x, double c) { return beta.lookup(t, x, c); },
        deviator);
}

struct NashGapReport {
    struct Row {
        int n = 0;
        double eps_hat = 0.0;
        double ci_lo = 0.0;
        double ci_hi = 0.0;
        long paths = 0;
        double se_paired = 0.0;
    };
    std::vector<Row> rows;
};

// eps_hat(N) over a list of player counts, independent seeds per N.
inline NashGapReport nash_gap_sweep(const GameConfig& gc_template, std::span<const int> n_list,
                                    const PlayerPolicy& eq, const SpatialGrid& xgrid,
                                    int n_c = 51) {
    if (n_list.empty()) throw std::invalid_argument("nash_gap_sweep: empty n_list");
    for (std::size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1])
            throw std::invalid_argument("nash_gap_sweep: n_list must be ascending");
    NashGapReport report;
    for (int n : n_list) {
        GameConfig gc = gc_template;
        gc.n = n;
        gc.seed = derive_key(gc_template.seed, static_cast<std::uint64_t>(n));
        const auto br = best_response_value(gc, eq, 0, xgrid, n_c);
        report.rows.push_back({n, br.eps_hat, br.ci_lo, br.ci_hi, br.n_paths, br.se_paired});
    }
    return report;
}

} // namespace ammfg
