#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ammfg/game.hpp"
#include "ammfg/mfg.hpp"

using namespace ammfg;

namespace {

GameConfig base_config() {
    GameConfig gc;
    gc.tgrid = TimeGrid{1.0, 40};
    gc.pool = PoolConfig{100.0, 10.0, 1.0, 0.5};
    gc.ctrl = ControlInterval{-1.0, 1.0};
    gc.cost = CostModel{};
    gc.noise = NoiseConfig{0.5};
    gc.law0 = InitialLaw::gaussian(0.0, 1.0);
    gc.n = 4;
    gc.n_paths = 2000;
    gc.seed = 11;
    return gc;
}

CostModel symmetric_cost() {
    CostModel c;
    c.family = CostFamily::Quadratic;
    c.phi_h = 0.1;
    c.phi_l = 1.0;
    c.c1 = 3.0;
    return c;
}

std::vector<PlayerPolicy> constant_policies(int n, double a) {
    return std::vector<PlayerPolicy>(static_cast<std::size_t>(n),
                                     PlayerPolicy([a](double, double) { return a; }));
}

} // namespace

TEST_CASE("empirical measure counts multiplicities") {
    SECTION("duplicates merge") {
        const std::vector<double> xs{1.0, 1.0, 3.0};
        const auto m = empirical_measure(xs);
        REQUIRE(m.support.size() == 2);
        CHECK(m.support[0] == 1.0);
        CHECK(m.support[1] == 3.0);
        CHECK(m.weights[0] == Catch::Approx(2.0 / 3.0));
        CHECK(m.weights[1] == Catch::Approx(1.0 / 3.0));
    }
    SECTION("singleton is a Dirac") {
        const std::vector<double> xs{0.5};
        const auto m = empirical_measure(xs);
        REQUIRE(m.support.size() == 1);
        CHECK(m.support[0] == 0.5);
        CHECK(m.weights[0] == 1.0);
    }
    SECTION("empty sample is an error") {
        CHECK_THROWS_AS(empirical_measure(std::vector<double>{}), std::invalid_argument);
    }
    SECTION("weights sum to one") {
        const std::vector<double> xs{-1.0, 0.0, 0.0, 1.0, 1.0, 1.0};
        const auto m = empirical_measure(xs);
        double s = 0.0;
        for (double w : m.weights) s += w;
        CHECK(s == Catch::Approx(1.0).margin(1e-15));
    }
}

TEST_CASE("zero controls keep the pool reserve fixed") {
    GameConfig gc = base_config();
    const auto res = simulate_game(gc, constant_policies(gc.n, 0.0));
    CHECK(res.min_reserve == gc.pool.x0);
    CHECK(res.terminal_reserve_mean == gc.pool.x0);
}

TEST_CASE("single passive player payoff factorizes") {
    GameConfig gc = base_config();
    gc.n = 1;
    gc.n_paths = 20000;
    gc.law0 = InitialLaw::gaussian(0.5, 0.3);
    gc.y0 = 2.0;
    const auto res = simulate_game(gc, constant_policies(1, 0.0));
    // E[J] = y0 + E[X_T] E[P_T] since the player's noise is independent of
    // the price noise; E[P_T] = k/x0^2 = 1.
    CHECK(res.j_hat[0] == Catch::Approx(2.0 + 0.5 * 1.0).margin(3.0 * res.se[0]));
}

TEST_CASE("discrete accounting identity holds to rounding") {
    GameConfig gc = base_config();
    gc.cost = symmetric_cost();
    const auto sg = default_spatial_grid(gc.law0, gc.ctrl, gc.noise, gc.tgrid.horizon);
    const auto surface =
        solve_hjb(gc.pool, gc.ctrl, gc.cost, gc.noise, MeanFlow::zero(gc.tgrid), sg);
    const std::vector<PlayerPolicy> policies(
        static_cast<std::size_t>(gc.n), PlayerPolicy(InterpolatedSurfacePolicy{&surface}));
    const auto res = simulate_game(gc, policies);
    CHECK(res.max_accounting_rel_err <= 1e-12);
    CHECK(res.min_reserve >= gc.pool.eps0);
}

TEST_CASE("zero-control price is a martingale") {
    GameConfig gc = base_config();
    gc.n_paths = 20000;
    const auto res = simulate_game(gc, constant_policies(gc.n, 0.0));
    const double p0 = gc.pool.k / (gc.pool.x0 * gc.pool.x0);
    // P_T - P_0 = sigma0 W0_T has sd sigma0 sqrt(T) exactly
    const double se = gc.pool.sigma0 * std::sqrt(gc.tgrid.horizon) /
                      std::sqrt(static_cast<double>(gc.n_paths));
    CHECK(std::abs(res.terminal_price_mean - p0) <= 3.0 * se);
}

TEST_CASE("exchangeable players earn the same within noise") {
    GameConfig gc = base_config();
    gc.cost = symmetric_cost();
    gc.n = 4;
    gc.n_paths = 8000;
    const auto sg = default_spatial_grid(gc.law0, gc.ctrl, gc.noise, gc.tgrid.horizon);
    const auto surface =
        solve_hjb(gc.pool, gc.ctrl, gc.cost, gc.noise, MeanFlow::zero(gc.tgrid), sg);
    const std::vector<PlayerPolicy> policies(
        static_cast<std::size_t>(gc.n), PlayerPolicy(InterpolatedSurfacePolicy{&surface}));
    const auto res = simulate_game(gc, policies);
    for (int i = 0; i < gc.n; ++i)
        for (int j = i + 1; j < gc.n; ++j)
            CHECK(std::abs(res.j_hat[i] - res.j_hat[j]) <=
                  3.0 * std::hypot(res.se[i], res.se[j]));
}

TEST_CASE("game determinism under thread counts") {
    GameConfig gc = base_config();
    gc.n_paths = 500;
    set_max_threads(1);
    const auto a = simulate_game(gc, constant_policies(gc.n, 0.3));
    set_max_threads(5);
    const auto b = simulate_game(gc, constant_policies(gc.n, 0.3));
    set_max_threads(0);
    for (int i = 0; i < gc.n; ++i) {
        CHECK(a.j_hat[i] == b.j_hat[i]);
        CHECK(a.se[i] == b.se[i]);
    }
    CHECK(a.terminal_price_mean == b.terminal_price_mean);
}

TEST_CASE("degenerate control set gives exactly zero deviation gain") {
    GameConfig gc = base_config();
    gc.ctrl = ControlInterval{0.0, 0.0};
    gc.n = 3;
    const SpatialGrid sg{-5.0, 5.0, 51};
    const auto br = best_response_value(gc, PlayerPolicy([](double, double) { return 0.0; }),
                                        0, sg);
    CHECK(br.eps_hat == 0.0);
    CHECK(br.se_paired == 0.0);
    CHECK(br.ci_lo == 0.0);
    CHECK(br.ci_hi == 0.0);
}

TEST_CASE("best response on the symmetric config") {
    GameConfig gc = base_config();
    gc.cost = symmetric_cost();
    gc.n = 32;
    gc.n_paths = 2000;
    const SpatialGrid sg{-10.0, 10.0, 101};
    FixedPointConfig fp;
    fp.particles = 5000;
    fp.tol = 2e-3;
    fp.seed = 1;
    const auto sol = solve_mfg(gc.pool, gc.ctrl, gc.cost, gc.noise, gc.law0, gc.tgrid, sg, fp);
    REQUIRE(sol.converged);
    const PlayerPolicy eq{InterpolatedSurfacePolicy{&sol.surface}};
    SECTION("deviation gain is non-negative up to paired noise") {
        const auto br = best_response_value(gc, eq, 0, sg);
        CHECK(br.eps_hat >= -2.0 * br.se_paired);
        CHECK(br.ci_lo <= br.eps_hat);
        CHECK(br.eps_hat <= br.ci_hi);
    }
    SECTION("paired CI width shrinks like 1/sqrt(paths)") {
        // Fixed deviation policy: doubling only the evaluation paths exercises
        // the CLT scaling of the paired estimator. (best_response_value's own
        // CI shrinks faster, since more paths also denoise the frozen flow
        // that shapes the deviation policy.)
        const auto dev = [](double, double x, double) { return x > 0.5 ? -1.0 : 1.0; };
        const auto br1 = paired_deviation_gap(gc, eq, dev, 0);
        GameConfig gc2 = gc;
        gc2.n_paths = 2 * gc.n_paths;
        const auto br2 = paired_deviation_gap(gc2, eq, dev, 0);
        const double w1 = br1.ci_hi - br1.ci_lo;
        const double w2 = br2.ci_hi - br2.ci_lo;
        CHECK(w2 / w1 >= 0.6);
        CHECK(w2 / w1 <= 0.8);
    }
    SECTION("sweep report invariants") {
        const std::vector<int> ns{2, 8};
        const auto report = nash_gap_sweep(gc, ns, eq, sg);
        REQUIRE(report.rows.size() == 2);
        for (const auto& row : report.rows) {
            CHECK(row.ci_lo <= row.eps_hat);
            CHECK(row.eps_hat <= row.ci_hi);
            CHECK(row.paths == gc.n_paths);
        }
    }
    SECTION("sweep input validation") {
        CHECK_THROWS_AS(nash_gap_sweep(gc, std::vector<int>{}, eq, sg),
                        std::invalid_argument);
        CHECK_THROWS_AS(nash_gap_sweep(gc, std::vector<int>{8, 2}, eq, sg),
                        std::invalid_argument);
    }
}

TEST_CASE("single-player best response runs against an empty crowd") {
    GameConfig gc = base_config();
    gc.cost = symmetric_cost();
    gc.n = 1;
    const SpatialGrid sg{-10.0, 10.0, 101};
    const auto surface = solve_hjb(gc.pool, gc.ctrl, gc.cost, gc.noise,
                                   MeanFlow::zero(gc.tgrid), sg);
    const auto br = best_response_value(
        gc, PlayerPolicy(InterpolatedSurfacePolicy{&surface}), 0, sg);
    CHECK(br.eps_hat >= -3.0 * br.se_paired);
    CHECK(br.ci_lo <= br.eps_hat);
    CHECK(br.eps_hat <= br.ci_hi);
}

TEST_CASE("degenerate sweep row") {
    GameConfig gc = base_config();
    gc.ctrl = ControlInterval{0.0, 0.0};
    const SpatialGrid sg{-5.0, 5.0, 51};
    const std::vector<int> ns{1};
    const auto report =
        nash_gap_sweep(gc, ns, PlayerPolicy([](double, double) { return 0.0; }), sg);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].n == 1);
    CHECK(report.rows[0].eps_hat == 0.0);
    CHECK(report.rows[0].ci_lo == 0.0);
    CHECK(report.rows[0].ci_hi == 0.0);
}

TEST_CASE("deviation gain decays with player count when self-impact pays") {
    // Weak anchoring makes price pumping profitable below the player-count
    // threshold k / (x0^3 phi_l) = 5: the gap detector must see a large gain
    // at n = 2 and essentially none at n = 8.
    GameConfig gc = base_config();
    gc.cost.family = CostFamily::Quadratic;
    gc.cost.phi_h = 0.01;
    gc.cost.phi_l = 0.02;
    gc.cost.c1 = 3.0;
    gc.n_paths = 4000;
    const SpatialGrid sg{-10.0, 10.0, 101};
    FixedPointConfig fp;
    fp.particles = 10000;
    fp.tol = 2e-3;
    fp.seed = 1;
    const auto sol = solve_mfg(gc.pool, gc.ctrl, gc.cost, gc.noise, gc.law0, gc.tgrid, sg, fp);
    REQUIRE(sol.converged);
    const PlayerPolicy eq{InterpolatedSurfacePolicy{&sol.surface}};
    GameConfig g2 = gc;
    g2.n = 2;
    g2.seed = derive_key(gc.seed, 2);
    const auto br2 = best_response_value(g2, eq, 0, sg);
    GameConfig g8 = gc;
    g8.n = 8;
    g8.seed = derive_key(gc.seed, 8);
    const auto br8 = best_response_value(g8, eq, 0, sg);
    CHECK(br2.eps_hat > 0.05);
    CHECK(br2.eps_hat > br8.eps_hat + 3.0 * std::hypot(br2.se_paired, br8.se_paired));
    CHECK(br8.eps_hat >= -3.0 * br8.se_paired);
}

TEST_CASE("pooled game payoff approaches the mean-field value") {
    GameConfig gc = base_config();
    gc.cost = symmetric_cost();
    gc.n = 128;
    gc.n_paths = 2000;
    const SpatialGrid sg{-10.0, 10.0, 101};
    FixedPointConfig fp;
    fp.particles = 5000;
    fp.tol = 2e-3;
    fp.seed = 1;
    const auto sol = solve_mfg(gc.pool, gc.ctrl, gc.cost, gc.noise, gc.law0, gc.tgrid, sg, fp);
    REQUIRE(sol.converged);
    const std::vector<PlayerPolicy> policies(
        static_cast<std::size_t>(gc.n),
        PlayerPolicy(InterpolatedSurfacePolicy{&sol.surface}));
    const auto game = simulate_game(gc, policies);
    const auto mf = policy_evaluate(SurfacePolicy{&sol.surface}, gc.pool, gc.cost, gc.noise,
                                    sol.flow, gc.law0, 20000, 77);
    CHECK(std::abs(game.pooled - mf.mean) <= 3.0 * std::hypot(game.pooled_se, mf.se) + 5e-3);
}
