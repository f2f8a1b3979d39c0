#pragma once

#include <cstdint>

#include "bbm/rng.hpp"

namespace bbm::bridge {

// P(Brownian bridge from x to y over [0,t] stays >= 0) = 1 - exp(-2xy/t).
double bridge_nonneg_prob(double t, double x, double y);

// Upper bound on the probability that a bridge from 0 to 0 over [0,t] stays
// below the line (1-s/t) Z1 + (s/t) Z2 on [r1, t-r2]. May exceed 1.
double bridge_two_point_line_bound(double Z1, double Z2, double r1, double r2, double t);

// P(bridge from 0 to y over [0,gamma] stays >= 0 on [r, gamma])
//   = 1 - 2 P(B_r <= 0 | B_gamma = y).
double bridge_subinterval_nonneg_prob(double r, double gamma, double y);

enum class BarrierKind : std::uint8_t {
    zero_line = 0,      // the constant barrier 0
    affine_two_point,   // (1-s/t) Z1 + (s/t) Z2
    envelope_curve,     // -min(s, t-s)^alpha (localization envelope, negated)
};

enum class Direction : std::uint8_t { stay_above = 0, stay_below = 1 };

struct BridgeEventSpec {
    double t = 1.0;     // horizon
    double x = 0.0;     // start value
    double y = 0.0;     // end value
    double r1 = 0.0;    // window [r1, t - r2]
    double r2 = 0.0;
    BarrierKind barrier = BarrierKind::zero_line;
    Direction direction = Direction::stay_above;
    double Z1 = 0.0, Z2 = 0.0; // affine barrier endpoints
    double alpha = 0.5;        // envelope exponent
};

void validate(const BridgeEventSpec& spec);

struct McEstimate {
    double estimate;
    double std_error;
    std::uint64_t n_paths;
    std::uint64_t grid_steps;
};

// Monte Carlo oracle: simulates bridge paths on a uniform grid and checks the
// event at the grid times inside the window. Discrete monitoring is biased
// towards "stayed on the allowed side" (excursions between grid points are
// missed), so estimates of staying probabilities are biased upward.
McEstimate mc_bridge_event_prob(const BridgeEventSpec& spec, std::uint64_t n_paths,
                                std::uint64_t grid_steps, RngStreamKey stream);

// Functionals accepted by the moment-identity checkers.
struct Functional {
    enum class Kind : std::uint8_t { constant = 0, terminal_ge = 1 };
    Kind kind = Kind::constant;
    double value = 1.0; // constant value, or terminal threshold a for 1{B_t >= a}

    static Functional constant(double c) { return {Kind::constant, c}; }
    static Functional terminal_ge(double a) { return {Kind::terminal_ge, a}; }
};

struct MomentCheck {
    double lhs;      // BBM Monte Carlo estimate
    double lhs_se;
    double rhs;      // analytic value
    double z;        // (lhs - rhs) / lhs_se
    std::uint64_t n_trials;
};

// E[sum_u f(X_u(t))] vs e^t E[f(B_t)].
MomentCheck many_to_one_check(const Functional& f, double t, std::uint64_t n_trials,
                              RngStreamKey stream, int threads = 1,
                              bool override_time_guard = false);

// E[(sum_u f at t)(sum_v g at s)] vs
// e^t E[f g] + int_0^s 2 e^{t+s-gamma} E[f(B1) g(B2)] dgamma with B1, B2
// coinciding up to gamma.
MomentCheck many_to_two_check(const Functional& f, const Functional& g, double s, double t,
                              std::uint64_t quadrature_nodes, std::uint64_t n_trials,
                              RngStreamKey stream, int threads = 1,
                              bool override_time_guard = false);

// exposed for tests: E[f(X) g(Y)] for X ~ N(0, var_x), Y ~ N(0, var_y),
// cov(X, Y) = cov, computed by conditioning quadrature
double gaussian_pair_expectation(const Functional& f, const Functional& g, double var_x,
                                 double var_y, double cov);

} // namespace bbm::bridge
