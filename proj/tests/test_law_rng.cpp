#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ammfg/law.hpp"
#include "ammfg/rng.hpp"
#include "ammfg/stats.hpp"

using namespace ammfg;

TEST_CASE("random streams are reproducible and independent of creation order") {
    RandomStream a(42, 7);
    RandomStream b(42, 7);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    // different stream ids diverge
    RandomStream c(42, 8);
    bool any_diff = false;
    RandomStream a2(42, 7);
    for (int i = 0; i < 10; ++i) any_diff |= (a2.next_u64() != c.next_u64());
    CHECK(any_diff);
}

TEST_CASE("uniform draws live in (0, 1] and look uniform") {
    RandomStream rs(1, 0);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rs.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u <= 1.0);
        sum += u;
    }
    CHECK(sum / n == Catch::Approx(0.5).margin(0.01));
}

TEST_CASE("normal draws match the first two moments") {
    RandomStream rs(2, 0);
    const int n = 50000;
    std::vector<double> xs(n);
    for (auto& x : xs) x = rs.normal();
    const auto ms = mean_se(xs);
    CHECK(std::abs(ms.mean) < 3.0 * ms.se);
    double var = 0.0;
    for (double x : xs) var += (x - ms.mean) * (x - ms.mean);
    var /= n - 1;
    CHECK(var == Catch::Approx(1.0).margin(0.03));
}

TEST_CASE("initial law sampling") {
    RandomStream rs(3, 0);
    SECTION("dirac") {
        const auto law = InitialLaw::dirac(2.5);
        for (int i = 0; i < 10; ++i) CHECK(law.sample(rs) == 2.5);
        CHECK(law.mean() == 2.5);
        CHECK(law.stdev() == 0.0);
    }
    SECTION("gaussian moments") {
        const auto law = InitialLaw::gaussian(1.0, 2.0);
        std::vector<double> xs(20000);
        for (auto& x : xs) x = law.sample(rs);
        const auto ms = mean_se(xs);
        CHECK(ms.mean == Catch::Approx(1.0).margin(3.0 * ms.se));
        CHECK(law.stdev() == 2.0);
    }
    SECTION("uniform support and mean") {
        const auto law = InitialLaw::uniform(-1.0, 3.0);
        std::vector<double> xs(20000);
        for (auto& x : xs) {
            x = law.sample(rs);
            REQUIRE(x >= -1.0);
            REQUIRE(x <= 3.0);
        }
        const auto ms = mean_se(xs);
        CHECK(ms.mean == Catch::Approx(1.0).margin(3.0 * ms.se));
    }
    SECTION("invalid parameters are rejected") {
        CHECK_THROWS_AS(InitialLaw::gaussian(0.0, 0.0).validate(), config_error);
        CHECK_THROWS_AS(InitialLaw::uniform(1.0, 1.0).validate(), config_error);
    }
}

TEST_CASE("piecewise-linear law averages") {
    // identity function on a wide grid: average = law mean
    std::vector<double> xs, ys;
    for (int i = 0; i <= 400; ++i) {
        xs.push_back(-20.0 + 0.1 * i);
        ys.push_back(xs.back());
    }
    CHECK(law_average_piecewise_linear(InitialLaw::dirac(0.37), xs, ys) ==
          Catch::Approx(0.37));
    CHECK(law_average_piecewise_linear(InitialLaw::gaussian(1.5, 2.0), xs, ys) ==
          Catch::Approx(1.5).margin(1e-9));
    CHECK(law_average_piecewise_linear(InitialLaw::uniform(-2.0, 4.0), xs, ys) ==
          Catch::Approx(1.0).margin(1e-12));

    // x^2 sampled on the grid: Gaussian second moment mu^2 + sd^2 up to the
    // piecewise-linear sampling error
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = xs[i] * xs[i];
    CHECK(law_average_piecewise_linear(InitialLaw::gaussian(0.5, 1.0), xs, ys) ==
          Catch::Approx(0.25 + 1.0).margin(0.01));
    CHECK(law_average_piecewise_linear(InitialLaw::uniform(0.0, 3.0), xs, ys) ==
          Catch::Approx(3.0).margin(0.01)); // E[X^2] = 9/3
}

TEST_CASE("W1 metric properties on random discrete measures") {
    RandomStream rs(99, 0);
    auto random_measure = [&] {
        std::vector<double> support(4), weights(4);
        double sum = 0.0;
        for (int i = 0; i < 4; ++i) {
            support[i] = rs.uniform(-2.0, 2.0);
            weights[i] = rs.uniform();
            sum += weights[i];
        }
        for (auto& w : weights) w /= sum;
        return make_discrete_measure(support, weights);
    };
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = random_measure();
        const auto b = random_measure();
        const auto c = random_measure();
        const double ab = w1_distance(a, b);
        CHECK(ab >= 0.0);
        CHECK(ab == Catch::Approx(w1_distance(b, a)).margin(1e-12)); // symmetry
        CHECK(w1_distance(a, a) == 0.0);
        CHECK(w1_distance(a, c) <= ab + w1_distance(b, c) + 1e-12); // triangle
        // translating one measure by delta moves it by exactly |delta|
        DiscreteMeasure shifted = a;
        for (auto& sp : shifted.support) sp += 0.7;
        CHECK(w1_distance(a, shifted) == Catch::Approx(0.7).margin(1e-12));
    }
}

TEST_CASE("discrete measures, W1 and KS") {
    const auto m1 = make_discrete_measure({0.0, 1.0}, {0.5, 0.5});
    const auto m2 = make_discrete_measure({0.0, 1.0}, {1.0, 0.0});
    CHECK(w1_distance(m1, m2) == Catch::Approx(0.5));
    CHECK(w1_distance(m1, m1) == 0.0);

    // translation: W1(delta_0, delta_c) = |c|
    const auto d0 = make_discrete_measure({0.0}, {1.0});
    const auto d2 = make_discrete_measure({2.0}, {1.0});
    CHECK(w1_distance(d0, d2) == Catch::Approx(2.0));

    std::vector<double> a{0.0, 0.1, 0.2, 0.3};
    std::vector<double> b{0.05, 0.15, 0.25, 0.35};
    CHECK(ks_distance(a, b) == Catch::Approx(0.25));
    CHECK(ks_distance(a, a) == 0.0);
}
