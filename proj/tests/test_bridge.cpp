#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bbm/analytic.hpp"
#include "bbm/bridge.hpp"

using namespace bbm;
using namespace bbm::bridge;

TEST_CASE("whole-interval nonnegativity closed form") {
    CHECK(bridge_nonneg_prob(2.0, 0.0, 1.0) == 0.0); // starts on the barrier
    CHECK(bridge_nonneg_prob(2.0, 1.0, 1.0) == doctest::Approx(0.632121).epsilon(1e-6));
    CHECK(bridge_nonneg_prob(1.0, 3.0, 4.0) == doctest::Approx(1.0 - std::exp(-24.0)).epsilon(1e-12));
    CHECK_THROWS_AS(bridge_nonneg_prob(0.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(bridge_nonneg_prob(1.0, -0.5, 1.0), std::invalid_argument);
}

TEST_CASE("two-point line bound closed form") {
    CHECK(bridge_two_point_line_bound(1.0, 1.0, 1.0, 1.0, 4.0) == doctest::Approx(4.0));
    CHECK(bridge_two_point_line_bound(0.0, 0.0, 0.0, 0.0, 5.0) == 0.0);
    // pinned endpoint on the line: r1 = r2 = 0 makes the bound the product of
    // the endpoint values times 2/t
    CHECK(bridge_two_point_line_bound(1.0, 0.0, 0.0, 0.0, 10.0) == 0.0);
    CHECK_THROWS_AS(bridge_two_point_line_bound(-1.0, 1.0, 1.0, 1.0, 4.0), std::invalid_argument);
    CHECK_THROWS_AS(bridge_two_point_line_bound(1.0, 1.0, 2.0, 2.0, 4.0), std::invalid_argument);
}

TEST_CASE("subinterval nonnegativity closed form") {
    CHECK(bridge_subinterval_nonneg_prob(1.0, 2.0, 1.0) == doctest::Approx(0.52050).epsilon(1e-4));
    CHECK(bridge_subinterval_nonneg_prob(1.0, 2.0, 100.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(bridge_subinterval_nonneg_prob(2.0, 2.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(bridge_subinterval_nonneg_prob(1.0, 2.0, -1.0), std::invalid_argument);
}

TEST_CASE("bridge Monte Carlo oracle agrees with the closed forms") {
    const std::uint64_t paths = 20000, steps = 400;
    // documented upward bias: the grid misses between-step excursions
    const double bias = 0.05;
    {
        BridgeEventSpec spec;
        spec.t = 2.0;
        spec.x = 1.0;
        spec.y = 1.0;
        auto mc = mc_bridge_event_prob(spec, paths, steps, make_root_key(71));
        double exact = bridge_nonneg_prob(2.0, 1.0, 1.0);
        CHECK(mc.estimate - exact > -3.0 * mc.std_error);
        CHECK(mc.estimate - exact < bias + 3.0 * mc.std_error);
    }
    {
        BridgeEventSpec spec;
        spec.t = 2.0;
        spec.x = 0.0;
        spec.y = 1.0;
        spec.r1 = 1.0;
        auto mc = mc_bridge_event_prob(spec, paths, steps, make_root_key(72));
        double exact = bridge_subinterval_nonneg_prob(1.0, 2.0, 1.0);
        CHECK(mc.estimate - exact > -3.0 * mc.std_error);
        CHECK(mc.estimate - exact < bias + 3.0 * mc.std_error);
    }
    // impossible and certain events
    {
        BridgeEventSpec spec;
        spec.t = 1.0;
        spec.barrier = BarrierKind::affine_two_point;
        spec.Z1 = spec.Z2 = 1e9;
        auto mc = mc_bridge_event_prob(spec, 1000, 10, make_root_key(73));
        CHECK(mc.estimate == 0.0);
        spec.Z1 = spec.Z2 = -1e9;
        mc = mc_bridge_event_prob(spec, 1000, 10, make_root_key(74));
        CHECK(mc.estimate == 1.0);
    }
    // determinism
    {
        BridgeEventSpec spec;
        spec.t = 2.0;
        spec.x = 1.0;
        spec.y = 1.0;
        auto a = mc_bridge_event_prob(spec, 500, 50, make_root_key(75));
        auto b = mc_bridge_event_prob(spec, 500, 50, make_root_key(75));
        CHECK(a.estimate == b.estimate);
    }
    CHECK_THROWS_AS(mc_bridge_event_prob(BridgeEventSpec{}, 50, 100, make_root_key(1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(mc_bridge_event_prob(BridgeEventSpec{}, 1000, 5, make_root_key(1)),
                    std::invalid_argument);
}

TEST_CASE("bivariate gaussian expectation by conditioning") {
    auto one = Functional::constant(1.0);
    auto c3 = Functional::constant(3.0);
    CHECK(gaussian_pair_expectation(one, c3, 1.0, 1.0, 0.5) == doctest::Approx(3.0));
    auto ind0 = Functional::terminal_ge(0.0);
    // independent: product of marginals
    CHECK(gaussian_pair_expectation(ind0, ind0, 1.0, 1.0, 0.0) == doctest::Approx(0.25));
    // fully coupled: P(X >= 0) = 0.5
    CHECK(gaussian_pair_expectation(ind0, ind0, 1.0, 1.0, 1.0) ==
          doctest::Approx(0.5).epsilon(1e-6));
    // same Brownian path at times 1 and 2: P(B_1 >= 0, B_2 >= 0) = 3/8 by the
    // arcsine-type formula 1/4 + arcsin(rho)/(2 pi), rho = 1/sqrt(2)
    double want = 0.25 + std::asin(1.0 / std::sqrt(2.0)) / (2.0 * M_PI);
    CHECK(gaussian_pair_expectation(ind0, ind0, 2.0, 1.0, 1.0) ==
          doctest::Approx(want).epsilon(1e-6));
    CHECK_THROWS_AS(gaussian_pair_expectation(ind0, ind0, 1.0, 1.0, 2.0), std::invalid_argument);
}

TEST_CASE("one-point moment identity at small scale") {
    auto c = many_to_one_check(Functional::constant(1.0), 1.0, 4000, make_root_key(81), 4);
    CHECK(c.rhs == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
    CHECK(std::abs(c.z) < 5.0);

    auto tail = many_to_one_check(Functional::terminal_ge(3.0), 3.0, 4000, make_root_key(82), 4);
    CHECK(tail.rhs == doctest::Approx(std::exp(3.0) * normal_cdf(-std::sqrt(3.0))).epsilon(1e-12));
    CHECK(tail.rhs == doctest::Approx(0.8364).epsilon(2e-4));
    CHECK(std::abs(tail.z) < 5.0);

    auto zero = many_to_one_check(Functional::constant(0.0), 1.0, 100, make_root_key(83));
    CHECK(zero.lhs == 0.0);
    CHECK(zero.rhs == 0.0);

    CHECK_THROWS_AS(many_to_one_check(Functional::constant(1.0), 9.0, 100, make_root_key(84)),
                    std::invalid_argument); // cost guard
}

TEST_CASE("two-point moment identity at small scale") {
    auto c = many_to_two_check(Functional::constant(1.0), Functional::constant(1.0), 1.0, 2.0,
                               256, 4000, make_root_key(85), 4);
    // E[N_2 N_1] = 2 e^3 - e^2
    double exact = 2.0 * std::exp(3.0) - std::exp(2.0);
    CHECK(c.rhs == doctest::Approx(exact).epsilon(1e-5));
    CHECK(std::abs(c.z) < 5.0);

    auto zero = many_to_two_check(Functional::constant(0.0), Functional::constant(0.0), 1.0, 2.0,
                                  256, 100, make_root_key(86));
    CHECK(zero.lhs == 0.0);
    CHECK(zero.rhs == 0.0);

    // s = 0 degenerates to the one-point identity times g(0)
    auto s0 = many_to_two_check(Functional::constant(1.0), Functional::terminal_ge(-1.0), 0.0,
                                1.0, 256, 2000, make_root_key(87));
    CHECK(s0.rhs == doctest::Approx(std::exp(1.0)).epsilon(1e-9));
    CHECK(std::abs(s0.z) < 5.0);

    CHECK_THROWS_AS(many_to_two_check(Functional::constant(1.0), Functional::constant(1.0), 1.0,
                                      8.0, 256, 100, make_root_key(88)),
                    std::invalid_argument); // cost guard
}
