#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
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

// Particle approximation of the state law flow: one array of inventories per
// time node, node 0 sampled i.i.d. from lambda_0.
struct ParticleCloud {
    TimeGrid grid;
    long particles = 0;
    std::vector<std::vector<double>> states; // states[j][p]
};

// Per-node discrete control law on {a_min, 0, a_max} plus its mean.
struct ControlLawFlow {
    TimeGrid grid;
    std::vector<std::array<double, 3>> weights; // (w_min, w_zero, w_max) per node
    std::vector<double> mean;                   // w_min a_min + w_max a_max

    static ControlLawFlow all_zero(const TimeGrid& g) {
        ControlLawFlow f;
        f.grid = g;
        f.weights.assign(static_cast<std::size_t>(g.nodes()), {0.0, 1.0, 0.0});
        f.mean.assign(static_cast<std::size_t>(g.nodes()), 0.0);
        return f;
    }

    DiscreteMeasure measure(std::size_t j, const ControlInterval& ctrl) const {
        return make_discrete_measure({ctrl.a_min, 0.0, ctrl.a_max},
                                     {weights[j][0], weights[j][1], weights[j][2]});
    }
};

inline double max_node_w1(const ControlLawFlow& a, const ControlLawFlow& b,
                          const ControlInterval& ctrl) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.weights.size(); ++j)
        d = std::max(d, w1_distance(a.measure(j, ctrl), b.measure(j, ctrl)));
    return d;
}

enum class FixedPointMode { PicardDamped, FictitiousPlay };

struct FixedPointConfig {
    double damping = 0.5;                       // Picard relaxation, in (0, 1]
    double tol = 1e-3;                          // residual tolerance
    int max_iter = 50;
    FixedPointMode mode = FixedPointMode::PicardDamped;
    long particles = 20000;
    std::uint64_t seed = 1;
    std::optional<MeanFlow> init_flow;          // default: qbar = 0
    std::optional<ControlLawFlow> init_law;     // default: all mass on 0

    void validate() const {
        if (!(damping > 0.0 && damping <= 1.0))
            throw config_error("mfg.damping must be in (0, 1]");
        if (!(tol > 0.0)) throw config_error("mfg.tol must be > 0");
        if (max_iter < 1) throw config_error("mfg.max_iter must be >= 1");
        if (particles < 100) throw config_error("mfg.particles must be >= 100");
    }
};

// Forward Euler-Maruyama propagation of P particles under the feedback
// policy. Particles come in antithetic pairs sharing mirrored noise: this
// halves the variance of the induced control law and makes an odd policy
// under an even initial law induce a mean flow of exactly zero, so the fixed
// point respects the model's symmetry instead of amplifying sampling noise.
// Substreams are keyed by (seed, pair index), so the same seed reproduces the
// same noise regardless of iteration or thread count.
template <class Policy>
ParticleCloud propagate_state_law(const Policy& policy, const NoiseConfig& noise,
                                  const InitialLaw& law0, const TimeGrid& grid,
                                  long particles, std::uint64_t seed) {
    if (particles < 100) throw std::invalid_argument("propagate_state_law: particles >= 100");
    if (!(noise.sigma >= 0.0)) throw std::invalid_argument("propagate_state_law: sigma >= 0");
    law0.validate();
    ParticleCloud cloud;
    cloud.grid = grid;
    cloud.particles = particles;
    const int M = grid.steps;
    cloud.states.assign(static_cast<std::size_t>(M + 1),
                        std::vector<double>(static_cast<std::size_t>(particles)));
    const double dt = grid.dt();
    const double sqdt = std::sqrt(dt);
    const std::size_t pairs = (static_cast<std::size_t>(particles) + 1) / 2;
    parallel_for(pairs, [&](std::size_t q) {
        RandomStream rs(seed, q);
        auto [xa, xb] = law0.sample_pair(rs);
        const std::size_t pa = 2 * q;
        const std::size_t pb = 2 * q + 1;
        const bool has_b = pb < static_cast<std::size_t>(particles);
        cloud.states[0][pa] = xa;
        if (has_b) cloud.states[0][pb] = xb;
        for (int j = 0; j < M; ++j) {
            const double t = grid.node(j);
            const double dw = sqdt * rs.normal();
            xa += policy(t, xa) * dt + noise.sigma * dw;
            cloud.states[j + 1][pa] = xa;
            if (has_b) {
                xb += policy(t, xb) * dt - noise.sigma * dw;
                cloud.states[j + 1][pb] = xb;
            }
        }
    }, 512);
    return cloud;
}

// Empirical frequencies of the three feedback values over the cloud at each
// node. Controls are classified by sign; a zero control lands in the middle
// bucket, which leaves the mean unchanged even when an endpoint equals 0.
template <class Policy>
ControlLawFlow induced_control_law(const Policy& policy, const ParticleCloud& cloud,
                                   const ControlInterval& ctrl) {
    ControlLawFlow law;
    law.grid = cloud.grid;
    const std::size_t nodes = cloud.states.size();
    law.weights.assign(nodes, {0.0, 0.0, 0.0});
    law.mean.assign(nodes, 0.0);
    const double inv_p = 1.0 / static_cast<double>(cloud.particles);
    for (std::size_t j = 0; j < nodes; ++j) {
        const double t = cloud.grid.node(static_cast<int>(j));
        long c_min = 0, c_zero = 0, c_max = 0;
        for (double x : cloud.states[j]) {
            const double a = policy(t, x);
            if (a > 0.0) ++c_max;
            else if (a < 0.0) ++c_min;
            else ++c_zero;
        }
        law.weights[j] = {c_min * inv_p, c_zero * inv_p, c_max * inv_p};
        law.mean[j] = law.weights[j][0] * ctrl.a_min + law.weights[j][2] * ctrl.a_max;
    }
    return law;
}

struct MfgIterate {
    MeanFlow flow;
    ControlLawFlow law;
    double residual = 0.0;
};

struct MfgSolution {
    ValueSurface surface;   // solve of the final flow
    ParticleCloud cloud;    // propagated under the final policy
    ControlLawFlow law;
    MeanFlow flow;          // converged (or last) mean flow
    std::vector<MfgIterate> history;
    bool converged = false;
    int iterations = 0;
};

// Damped fixed-point iteration on the mean control flow:
//   freeze qbar -> solve HJB -> propagate the state law -> induce the
//   control law -> blend. Residual: max_t |dqbar| + max_t W1 of the 3-point
//   laws. The propagation seed is reused across iterations (common random
//   numbers), which turns each sweep into a deterministic map.
inline MfgSolution solve_mfg(const PoolConfig& pool, const ControlInterval& ctrl,
                             const CostModel& cost, const NoiseConfig& noise,
                             const InitialLaw& law0, const TimeGrid& tgrid,
                             const SpatialGrid& sgrid, const FixedPointConfig& fp) {
    pool.validate();
    ctrl.validate();
    cost.validate();
    noise.validate();
    law0.validate();
    tgrid.validate();
    sgrid.validate();
    fp.validate();

    const auto adm = validate_admissibility(pool, ctrl, tgrid);
    if (!adm.pass) {
        std::ostringstream os;
        os << "admissibility violated: max|a| = " << adm.max_abs_control
           << " >= " << adm.bound;
        throw validation_error(os.str());
    }
    const auto growth = validate_growth_bound(cost, sgrid.x_lo, sgrid.x_hi, 201);
    if (!growth.pass) {
        std::ostringstream os;
        os << "growth bound violated: |h|+|l| = " << growth.binding_lhs
           << " > c1 exp(c1 |x|) = " << growth.binding_rhs << " at x = " << growth.binding_x;
        throw validation_error(os.str());
    }

    MeanFlow qbar = fp.init_flow ? *fp.init_flow : MeanFlow::zero(tgrid);
    if (qbar.grid.nodes() != tgrid.nodes())
        throw config_error("mfg initial flow grid does not match the time grid");
    ControlLawFlow law = fp.init_law ? *fp.init_law : ControlLawFlow::all_zero(tgrid);
    if (law.weights.size() != static_cast<std::size_t>(tgrid.nodes()))
        throw config_error("mfg initial law grid does not match the time grid");
    double omega = fp.damping;

    MfgSolution sol;
    for (int k = 0; k < fp.max_iter; ++k) {
        sol.surface = solve_hjb(pool, ctrl, cost, noise, qbar, sgrid);
        const SurfacePolicy policy{&sol.surface};
        sol.cloud = propagate_state_law(policy, noise, law0, tgrid, fp.particles, fp.seed);
        const ControlLawFlow response = induced_control_law(policy, sol.cloud, ctrl);

        auto blend = [&](double w_new) {
            ControlLawFlow next;
            next.grid = tgrid;
            next.weights.resize(law.weights.size());
            next.mean.resize(law.mean.size());
            const double w_old = 1.0 - w_new;
            for (std::size_t j = 0; j < next.weights.size(); ++j) {
                for (int b = 0; b < 3; ++b)
                    next.weights[j][b] = w_old * law.weights[j][b] + w_new * response.weights[j][b];
                next.mean[j] = next.weights[j][0] * ctrl.a_min + next.weights[j][2] * ctrl.a_max;
            }
            return next;
        };

        double step = fp.mode == FixedPointMode::PicardDamped ? omega : 1.0 / (k + 1);
        ControlLawFlow next_law = blend(step);
        MeanFlow next_q{tgrid, next_law.mean};
        int rejections = 0;
        while (!reserve_path(pool, next_q).floor_ok) {
            if (++rejections > 5)
                throw convergence_error("mfg iterate rejected 5 times: flow keeps violating the reserve floor");
            step *= 0.5;
            if (fp.mode == FixedPointMode::PicardDamped) omega = step;
            next_law = blend(step);
            next_q = MeanFlow{tgrid, next_law.mean};
        }

        double dq = 0.0;
        for (std::size_t j = 0; j < next_q.values.size(); ++j)
            dq = std::max(dq, std::abs(next_q.values[j] - qbar.values[j]));
        const double residual = dq + max_node_w1(next_law, law, ctrl);

        qbar = next_q;
        law = next_law;
        sol.history.push_back({qbar, law, residual});
        sol.iterations = k + 1;
        if (residual <= fp.tol) {
            sol.converged = true;
            break;
        }
    }

    // Final consistency artifacts for the converged flow.
    sol.surface = solve_hjb(pool, ctrl, cost, noise, qbar, sgrid);
    const SurfacePolicy policy{&sol.surface};
    sol.cloud = propagate_state_law(policy, noise, law0, tgrid, fp.particles, fp.seed);
    sol.flow = qbar;
    sol.law = law;
    return sol;
}

struct VerifyReport {
    double j_stored = 0.0;  // MC value of the stored policy at the stored flow
    double se_stored = 0.0;
    double j_resolved = 0.0; // MC value of a freshly re-solved best response
    double se_resolved = 0.0;
    double best_response_gap = 0.0; // j_resolved - j_stored
    double gap_se = 0.0;            // SE of the CRN-paired difference
    double law_w1_max = 0.0;        // stored vs freshly induced control law
    double state_ks_max = 0.0;      // stored vs fresh particle cloud
    double tol_consistency = 0.0;   // 0.02 (a_max - a_min)
};

// Quantitative check of the MFG solution definition: the stored policy should
// be a best response to the stored flow (gap within noise), and the stored
// laws should be reproduced by fresh propagation. The two policy values are
// estimated on shared noise, and the gap uncertainty is the SE of the paired
// per-path differences.
inline VerifyReport verify_solution(const MfgSolution& sol, const PoolConfig& pool,
                                    const ControlInterval& ctrl, const CostModel& cost,
                                    const NoiseConfig& noise, const InitialLaw& law0,
                                    std::uint64_t seed, long n_paths = 20000) {
    VerifyReport r;
    r.tol_consistency = 0.02 * ctrl.range();

    const ValueSurface resolved = solve_hjb(pool, ctrl, cost, noise, sol.flow, sol.surface.sgrid);
    const std::uint64_t eval_seed = derive_key(seed, 1);
    const auto eval = policy_evaluate_paired(SurfacePolicy{&sol.surface},
                                             SurfacePolicy{&resolved}, pool, cost, noise,
                                             sol.flow, law0, n_paths, eval_seed);
    r.j_stored = eval.a.mean;
    r.se_stored = eval.a.se;
    r.j_resolved = eval.b.mean;
    r.se_resolved = eval.b.se;
    r.best_response_gap = eval.diff;
    r.gap_se = eval.diff_se;

    const std::uint64_t fresh_seed = derive_key(seed, 2);
    const SurfacePolicy policy{&sol.surface};
    const ParticleCloud fresh =
        propagate_state_law(policy, noise, law0, sol.flow.grid, sol.cloud.particles, fresh_seed);
    const ControlLawFlow fresh_law = induced_control_law(policy, fresh, ctrl);
    r.law_w1_max = max_node_w1(sol.law, fresh_law, ctrl);
    for (std::size_t j = 0; j < fresh.states.size(); ++j)
        r.state_ks_max = std::max(r.state_ks_max,
                                  ks_distance(sol.cloud.states[j], fresh.states[j]));
    return r;
}

struct GirsanovResult {
    double strong = 0.0;   // payoff estimate from the controlled SDE
    double se_strong = 0.0;
    double weak = 0.0;     // payoff estimate from driftless paths, reweighted
    double se_weak = 0.0;
    double combined_se = 0.0;
    double ess = 0.0;      // effective sample size of the weights
    bool low_ess = false;  // ess < 5% of n_paths
};

// Cross-check of the weak formulation: estimate J once by simulating the
// controlled SDE and once by simulating dX = sigma dW and weighting each path
// with the discrete stochastic exponential
//   exp(sum sigma^-1 a dW - 1/2 sum sigma^-2 a^2 dt)
// evaluated along the driftless path. Both estimators share the same noise
// stream, so a zero policy gives a difference of exactly zero.
template <class Policy>
GirsanovResult girsanov_reward_check(const PoolConfig& pool, const ControlInterval& ctrl,
                                     const CostModel& cost, const NoiseConfig& noise,
                                     const MeanFlow& flow, const Policy& policy,
                                     const InitialLaw& law0, long n_paths,
                                     std::uint64_t seed) {
    noise.validate();
    const double cap = ctrl.max_abs() / noise.sigma;
    if (cap > 2.0) {
        std::ostringstream os;
        os << "girsanov_reward_check: drift-to-noise ratio max|a|/sigma = " << cap
           << " exceeds the variance cap 2";
        throw validation_error(os.str());
    }
    if (n_paths < 100) throw std::invalid_argument("girsanov_reward_check: n_paths >= 100");

    const TimeGrid& tg = flow.grid;
    const int M = tg.steps;
    const double dt = tg.dt();
    const double sqdt = std::sqrt(dt);
    const double inv_sig = 1.0 / noise.sigma;
    const auto drift = detail::impact_drift_nodes(pool, flow);

    std::vector<double> strong(static_cast<std::size_t>(n_paths));
    std::vector<double> weighted(strong.size());
    std::vector<double> weights(strong.size());
    parallel_for(strong.size(), [&](std::size_t p) {
        RandomStream rs(seed, p);
        const double x0 = law0.sample(rs);
        double xs = x0, xw = x0;
        double acc_s = 0.0, acc_w = 0.0, log_z = 0.0;
        for (int j = 0; j < M; ++j) {
            const double t = tg.node(j);
            acc_s += (xs * drift[j] - cost.h(t, xs)) * dt;
            acc_w += (xw * drift[j] - cost.h(t, xw)) * dt;
            const double a_s = policy(t, xs);
            const double a_w = policy(t, xw);
            const double dw = sqdt * rs.normal();
            log_z += inv_sig * a_w * dw - 0.5 * inv_sig * inv_sig * a_w * a_w * dt;
            xs += a_s * dt + noise.sigma * dw;
            xw += noise.sigma * dw;
        }
        strong[p] = acc_s + terminal_reward(xs, cost);
        const double z = std::exp(log_z);
        weights[p] = z;
        weighted[p] = z * (acc_w + terminal_reward(xw, cost));
    });

    GirsanovResult r;
    const auto ms = mean_se(strong);
    const auto mw = mean_se(weighted);
    r.strong = ms.mean;
    r.se_strong = ms.se;
    r.weak = mw.mean;
    r.se_weak = mw.se;
    r.combined_se = std::hypot(ms.se, mw.se);
    double sw = 0.0, sw2 = 0.0;
    for (double z : weights) {
        sw += z;
        sw2 += z * z;
    }
    r.ess = sw2 > 0.0 ? sw * sw / sw2 : 0.0;
    r.low_ess = r.ess < 0.05 * static_cast<double>(n_paths);
    return r;
}

} // namespace ammfg
