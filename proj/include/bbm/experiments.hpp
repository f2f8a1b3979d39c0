#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bbm/rng.hpp"
#include "bbm/table.hpp"

namespace bbm::lab {

// --- BKR cross-index inequality, brute force ------------------------------

// Finite product-space instance: per index an outcome space with
// probabilities and two events A, E given as outcome-subset bitmasks.
struct BkrInstance {
    struct Index {
        std::vector<double> probs; // sums to 1
        std::uint32_t event_a = 0; // bitmask over outcomes
        std::uint32_t event_e = 0;
    };
    std::vector<Index> indices;
};

void validate(const BkrInstance& inst);

struct BkrResult {
    double lhs;        // P(union over u != v of A_u and E_v)
    double rhs;        // P(union A_u) P(union E_u)
    double p_union_a;
    double p_union_e;
    bool violated;     // lhs > rhs + 1e-12
};

// Exact enumeration over the product space (guarded at 1e7 outcomes).
BkrResult bkr_brute_force(const BkrInstance& inst);

BkrInstance random_bkr_instance(RngStream& rng, int max_indices = 3, int max_space = 4);

// --- Subsequence-to-full-time averages ------------------------------------

struct SubsequenceRow {
    int n;
    double s_n;
    double s_n1;
    double rho_sn;
    double sup_abs_rho;    // over T in [S_n, S_n1]
    double bound;          // |rho_{S_n}| + (1 - S_n / S_n1)
    bool ok;               // sup <= bound (deterministic identity)
};

// x(t) is piecewise constant: values[i] on [times[i], times[i+1]), the last
// value extending to infinity. |values| <= 1 required.
std::vector<SubsequenceRow> subsequence_average_check(std::span<const double> times,
                                                      std::span<const double> values,
                                                      std::span<const double> schedule);

// --- Experiment drivers -----------------------------------------------------

struct TailResult {
    Table table; // y, hits, p_hat, se, in_fit
    double slope = 0.0;
    double slope_se = 0.0;
    int fit_points = 0;
    bool fit_window_shrunk = false;
    std::uint64_t trials = 0;
};

// P(M_t - m_t >= y) on y_grid plus the fitted slope of log p_hat vs y on the
// window with at least 100 hits.
TailResult exp_right_tail(double t, std::uint64_t trials, std::span<const double> y_grid,
                          RngStreamKey stream, int threads);

struct EarlyBranchingResult {
    Table table; // R, hits, p_hat, se
    std::vector<double> r_values;
    std::vector<double> p_hat;
    std::vector<double> se;
    double frac_both_nonempty = 0.0;
    std::uint64_t trials = 0;
};

// Fraction of trials with an extremal pair (u, v) in N_s(x) x N_t(x)
// splitting no earlier than R, for each R in r_list.
EarlyBranchingResult exp_early_branching(double s, double t, double x,
                                         std::span<const double> r_list, std::uint64_t trials,
                                         RngStreamKey stream, int threads);

struct LocalizationResult {
    Table table; // r, in_regime, hits, p_hat, se
    std::vector<double> r_values;
    std::vector<double> p_hat;
    std::vector<double> se;
    std::vector<bool> in_regime; // false when t < 3r (window too wide for the decay claim)
    std::uint64_t trials = 0;
};

// Fraction of trials where some particle of N_t(x) is not alpha-t-localized
// on [r, t-r], per r.
LocalizationResult exp_localization(double t, double x, double alpha,
                                    std::span<const double> r_list, std::uint64_t trials,
                                    double dt, RngStreamKey stream, int threads);

struct DecorrelationResult {
    Table table; // outer, alive_at_R, p_lhs, p_s, p_t, product, se_combined, violated
    double violation_fraction = 0.0;
    std::uint64_t outer_trials = 0;
    std::uint64_t inner_resamples = 0;
};

// Nested Monte Carlo for the conditional decorrelation inequality
// P(M_s >= x', M_t >= y', Q <= R | F_R) <= P(M_s >= x' | F_R) P(M_t >= y' | F_R),
// thresholds given as offsets from the centering.
DecorrelationResult exp_decorrelation(double R, double s, double t, double x, double y,
                                      std::uint64_t outer_trials, std::uint64_t inner_resamples,
                                      RngStreamKey stream, int threads);

struct ErgodicParams {
    double T = 50.0;
    double eps = 0.1;
    double L = 8.0;            // gap_to_max cutoff
    double t0 = 5.0;           // Z proxy time; pruning disabled for t <= t0
    double dt_sample = 0.1;
    std::vector<double> x_grid;      // default: 41 points on [-3, 2]
    int n_seeds = 8;
    double fit_x_lo = -1.0;
    double fit_x_hi = 1.0;
    double sensitivity_L = 16.0;     // 0 disables the sensitivity pass
    double beta = 0.9;               // T_n = exp(n^beta) evaluation schedule
    std::uint64_t hard_particle_limit = 20'000'000;
};

std::vector<double> default_x_grid();

struct ErgodicSeedResult {
    int seed_index = 0;
    double z_proxy = 0.0;      // Z(t0)
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    int excluded_cells = 0;    // F == 0 cells dropped from the log fit
    std::vector<double> f_le;  // F_T(x), orientation M - m <= x
    std::vector<double> f_ge;  // complementary orientation
};

struct ErgodicResult {
    Table curves;      // seed, L, x, F_le, F_ge
    Table fits;        // seed, z_proxy, slope, intercept, r2, excluded_cells
    Table sensitivity; // x, mean_base, sd_base, mean_sens, abs_shift, limit, ok
    Table schedule;    // seed, n, S_n, S_n1, rho, sup, bound, ok
    std::vector<ErgodicSeedResult> seeds;
    double slope_z_correlation = 0.0;
    bool sensitivity_ran = false;
    bool sensitivity_ok = false;
    std::string sensitivity_note; // e.g. resource-guard abort diagnostics
};

ErgodicResult exp_ergodic(const ErgodicParams& params, RngStreamKey stream, int threads);

// --- small statistics helpers (shared with the CLI/acceptance) -------------

struct LinearFit {
    double slope, intercept, r2, slope_se;
    int n;
};
LinearFit linear_fit(std::span<const double> xs, std::span<const double> ys);
double pearson_correlation(std::span<const double> xs, std::span<const double> ys);

} // namespace bbm::lab
