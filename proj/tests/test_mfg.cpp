#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ammfg/mfg.hpp"

using namespace ammfg;

namespace {

const PoolConfig kPool{100.0, 10.0, 1.0, 0.5};
const ControlInterval kCtrl{-1.0, 1.0};
const TimeGrid kTime{1.0, 40};
const NoiseConfig kNoise{0.5};
const InitialLaw kLaw0 = InitialLaw::gaussian(0.0, 1.0);
const SpatialGrid kGrid{-10.0, 10.0, 101};

CostModel symmetric_cost() {
    CostModel c;
    c.family = CostFamily::Quadratic;
    c.phi_h = 0.1;
    c.phi_l = 1.0;
    c.c1 = 3.0;
    return c;
}

CostModel linear_cost() {
    CostModel c;
    c.family = CostFamily::LinearTerminal;
    c.c_l = 1.0;
    c.c1 = 2.0;
    return c;
}

FixedPointConfig fast_fp() {
    FixedPointConfig fp;
    fp.damping = 0.5;
    fp.tol = 1e-3 * kCtrl.range();
    fp.max_iter = 50;
    fp.particles = 5000;
    fp.seed = 1;
    return fp;
}

} // namespace

TEST_CASE("particle propagation matches the driftless diffusion law") {
    const long P = 20000;
    SECTION("zero policy: mean 0, variance t") {
        const auto cloud = propagate_state_law(ConstantPolicy{0.0}, NoiseConfig{1.0},
                                               InitialLaw::dirac(0.0), kTime, P, 3);
        for (int j : {10, 20, 40}) {
            const auto ms = mean_se(cloud.states[j]);
            const double t = kTime.node(j);
            CHECK(std::abs(ms.mean) <= 3.0 * ms.se + 1e-12);
            double var = 0.0;
            for (double x : cloud.states[j]) var += (x - ms.mean) * (x - ms.mean);
            var /= P - 1;
            // SE of the sample variance of a Gaussian is var sqrt(2/(P-1))
            CHECK(var == Catch::Approx(t).margin(3.0 * t * std::sqrt(2.0 / (P - 1))));
        }
    }
    SECTION("unit policy: mean t") {
        const auto cloud = propagate_state_law(ConstantPolicy{1.0}, NoiseConfig{1.0},
                                               InitialLaw::dirac(0.0), kTime, P, 3);
        for (int j : {10, 40}) {
            const auto ms = mean_se(cloud.states[j]);
            CHECK(ms.mean == Catch::Approx(kTime.node(j)).margin(3.0 * ms.se));
        }
    }
    SECTION("sigma = 0 is a deterministic flow") {
        const auto cloud = propagate_state_law(ConstantPolicy{0.0}, NoiseConfig{0.0},
                                               InitialLaw::dirac(2.5), kTime, 200, 3);
        for (const auto& node : cloud.states)
            for (double x : node) CHECK(x == 2.5);
    }
    SECTION("same seed reproduces the cloud exactly") {
        const auto a = propagate_state_law(ConstantPolicy{0.3}, kNoise, kLaw0, kTime, 500, 9);
        set_max_threads(3);
        const auto b = propagate_state_law(ConstantPolicy{0.3}, kNoise, kLaw0, kTime, 500, 9);
        set_max_threads(0);
        for (std::size_t j = 0; j < a.states.size(); ++j)
            for (long p = 0; p < 500; ++p) CHECK(a.states[j][p] == b.states[j][p]);
    }
}

TEST_CASE("induced control law frequencies") {
    const auto cloud = propagate_state_law(ConstantPolicy{0.0}, NoiseConfig{1.0},
                                           InitialLaw::dirac(0.0), kTime, 20000, 5);
    SECTION("constant policies produce degenerate laws") {
        const auto up = induced_control_law(ConstantPolicy{1.0}, cloud, kCtrl);
        const auto none = induced_control_law(ConstantPolicy{0.0}, cloud, kCtrl);
        for (std::size_t j = 0; j < up.weights.size(); ++j) {
            CHECK(up.weights[j][2] == 1.0);
            CHECK(up.mean[j] == kCtrl.a_max);
            CHECK(none.weights[j][1] == 1.0);
            CHECK(none.mean[j] == 0.0);
        }
    }
    SECTION("sign policy on a symmetric cloud balances") {
        const auto law = induced_control_law(
            [](double, double x) { return x < 0.0 ? 1.0 : (x > 0.0 ? -1.0 : 0.0); },
            cloud, kCtrl);
        const double se = 1.0 / std::sqrt(20000.0); // weights are Bernoulli(1/2)
        for (std::size_t j = 1; j < law.weights.size(); ++j) {
            CHECK(law.weights[j][0] == Catch::Approx(0.5).margin(4.0 * se));
            CHECK(law.weights[j][2] == Catch::Approx(0.5).margin(4.0 * se));
            CHECK(std::abs(law.mean[j]) <= 3.0 * se * kCtrl.range() / 2.0 + 1e-12);
        }
    }
    SECTION("weights always sum to one") {
        const auto law = induced_control_law(
            [](double t, double x) { return x + t < 0.3 ? -1.0 : 1.0; }, cloud, kCtrl);
        for (const auto& w : law.weights)
            CHECK(w[0] + w[1] + w[2] == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("zero-cost fixed point converges immediately") {
    const auto sol = solve_mfg(kPool, kCtrl, CostModel{}, kNoise, kLaw0, kTime, kGrid, fast_fp());
    REQUIRE(sol.converged);
    CHECK(sol.iterations == 1);
    CHECK(sol.history.front().residual == 0.0);
    for (double q : sol.flow.values) CHECK(q == 0.0);
}

TEST_CASE("symmetric config converges to a near-zero mean flow") {
    const auto sol = solve_mfg(kPool, kCtrl, symmetric_cost(), kNoise, kLaw0, kTime, kGrid,
                               fast_fp());
    REQUIRE(sol.converged);
    double max_q = 0.0;
    for (double q : sol.flow.values) max_q = std::max(max_q, std::abs(q));
    CHECK(max_q <= 0.05);
    SECTION("iterates keep the law normalized and the flow admissible") {
        for (const auto& it : sol.history) {
            for (const auto& w : it.law.weights) {
                CHECK(w[0] + w[1] + w[2] == Catch::Approx(1.0).margin(1e-12));
                CHECK(w[0] >= 0.0);
                CHECK(w[1] >= 0.0);
                CHECK(w[2] >= 0.0);
            }
            for (double q : it.flow.values) {
                CHECK(q >= kCtrl.a_min);
                CHECK(q <= kCtrl.a_max);
            }
            CHECK(reserve_path(kPool, it.flow).floor_ok);
        }
    }
    SECTION("restart from the converged flow is immediately stationary") {
        FixedPointConfig fp = fast_fp();
        fp.init_flow = sol.flow;
        fp.init_law = sol.law;
        const auto again = solve_mfg(kPool, kCtrl, symmetric_cost(), kNoise, kLaw0, kTime,
                                     kGrid, fp);
        REQUIRE(again.converged);
        CHECK(again.iterations == 1);
    }
    SECTION("verification: best-response gap within noise, laws reproduced") {
        const auto report = verify_solution(sol, kPool, kCtrl, symmetric_cost(), kNoise,
                                            kLaw0, 123, 20000);
        CHECK(report.best_response_gap <= 2.0 * report.gap_se);
        CHECK(report.law_w1_max <= report.tol_consistency);
        CHECK(report.state_ks_max <= 0.05);
    }
    SECTION("perturbing the flow is detected by the best-response gap") {
        MfgSolution bad = sol;
        for (auto& q : bad.flow.values) q += 0.5;
        const auto report = verify_solution(bad, kPool, kCtrl, symmetric_cost(), kNoise,
                                            kLaw0, 123, 20000);
        CHECK(report.best_response_gap > 3.0 * report.gap_se);
    }
}

TEST_CASE("directional config saturates at a_max exactly under fictitious play") {
    FixedPointConfig fp = fast_fp();
    fp.mode = FixedPointMode::FictitiousPlay;
    const auto sol = solve_mfg(kPool, kCtrl, linear_cost(), kNoise, kLaw0, kTime, kGrid, fp);
    REQUIRE(sol.converged);
    for (double q : sol.flow.values) CHECK(q == kCtrl.a_max);
}

TEST_CASE("fictitious play residuals are non-increasing after burn-in") {
    FixedPointConfig fp = fast_fp();
    fp.mode = FixedPointMode::FictitiousPlay;
    fp.tol = 1e-9; // force a long history
    fp.max_iter = 25;
    SECTION("reference symmetric config") {
        const auto sol = solve_mfg(kPool, kCtrl, symmetric_cost(), kNoise, kLaw0, kTime,
                                   kGrid, fp);
        for (std::size_t k = 5; k < sol.history.size(); ++k)
            CHECK(sol.history[k].residual <= sol.history[k - 1].residual + 1e-12);
    }
    SECTION("asymmetric initial law exercises a long history") {
        const InitialLaw law0 = InitialLaw::gaussian(0.5, 1.0);
        const auto sol = solve_mfg(kPool, kCtrl, symmetric_cost(), kNoise, law0, kTime,
                                   kGrid, fp);
        REQUIRE(sol.history.size() >= 10);
        for (std::size_t k = 5; k < sol.history.size(); ++k)
            CHECK(sol.history[k].residual <= sol.history[k - 1].residual + 1e-12);
    }
}

TEST_CASE("girsanov reweighting agrees with strong simulation") {
    const TimeGrid tg{1.0, 50};
    const MeanFlow flow = MeanFlow::zero(tg);
    const InitialLaw dirac0 = InitialLaw::dirac(0.0);
    SECTION("zero policy gives exactly equal estimates") {
        const auto r = girsanov_reward_check(kPool, kCtrl, symmetric_cost(), NoiseConfig{1.0},
                                             flow, ConstantPolicy{0.0}, dirac0, 2000, 21);
        CHECK(r.strong == r.weak);
        CHECK_FALSE(r.low_ess);
        CHECK(r.ess == Catch::Approx(2000.0));
    }
    SECTION("unit drift, linear terminal: both near E[X_T] = 1") {
        const auto r = girsanov_reward_check(kPool, kCtrl, linear_cost(), NoiseConfig{1.0},
                                             flow, ConstantPolicy{1.0}, dirac0, 20000, 21);
        CHECK(std::abs(r.strong - r.weak) <= 3.0 * r.combined_se);
        CHECK(r.strong == Catch::Approx(1.0).margin(3.0 * r.se_strong));
        CHECK(r.weak == Catch::Approx(1.0).margin(3.0 * r.se_weak));
        CHECK_FALSE(r.low_ess);
    }
    SECTION("drift-to-noise cap enforced") {
        CHECK_THROWS_AS(girsanov_reward_check(kPool, kCtrl, linear_cost(), NoiseConfig{0.25},
                                              flow, ConstantPolicy{1.0}, dirac0, 2000, 21),
                        validation_error);
    }
    SECTION("heavy likelihood ratios raise the low-ESS flag") {
        // at the cap max|a|/sigma = 2 the weight variance is e^4 - 1, so the
        // effective sample size drops to ~1.8% of the paths
        const auto r = girsanov_reward_check(kPool, kCtrl, linear_cost(), NoiseConfig{0.5},
                                             flow, ConstantPolicy{1.0}, dirac0, 10000, 21);
        CHECK(r.low_ess);
        CHECK(r.ess < 0.05 * 10000);
        CHECK(std::abs(r.strong - r.weak) <= 3.0 * r.combined_se);
    }
}
