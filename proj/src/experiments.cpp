#include "bbm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bbm/analytic.hpp"
#include "bbm/engine.hpp"
#include "bbm/observables.hpp"
#include "bbm/parallel.hpp"

namespace bbm::lab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct KahanSum {
    double sum = 0.0, comp = 0.0;
    void add(double x) {
        double y = x - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
};

double binom_se(double p, std::uint64_t n) {
    return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

} // namespace

// --- BKR -------------------------------------------------------------------

void validate(const BkrInstance& inst) {
    if (inst.indices.empty()) throw std::invalid_argument("BkrInstance: needs at least one index");
    double space = 1.0;
    for (const auto& idx : inst.indices) {
        if (idx.probs.empty() || idx.probs.size() > 31)
            throw std::invalid_argument("BkrInstance: outcome space size must be in [1, 31]");
        double total = 0.0;
        for (double p : idx.probs) {
            if (!(p >= 0.0)) throw std::invalid_argument("BkrInstance: negative probability");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("BkrInstance: probabilities must sum to 1");
        std::uint32_t full = (idx.probs.size() == 31) ? 0x7FFFFFFFu
                                                      : ((1u << idx.probs.size()) - 1u);
        if ((idx.event_a & ~full) || (idx.event_e & ~full))
            throw std::invalid_argument("BkrInstance: event contains outcomes outside its space");
        space *= static_cast<double>(idx.probs.size());
    }
    if (space > 1e7)
        throw std::invalid_argument("BkrInstance: product space exceeds the 1e7 enumeration guard");
}

BkrResult bkr_brute_force(const BkrInstance& inst) {
    validate(inst);
    const std::size_t n = inst.indices.size();
    std::vector<std::uint32_t> outcome(n, 0);
    KahanSum p_cross, p_a, p_e;
    for (;;) {
        double prob = 1.0;
        int count_a = 0, count_e = 0;
        std::size_t only_a = 0, only_e = 0;
        for (std::size_t u = 0; u < n; ++u) {
            const auto& idx = inst.indices[u];
            prob *= idx.probs[outcome[u]];
            std::uint32_t bit = 1u << outcome[u];
            if (idx.event_a & bit) { ++count_a; only_a = u; }
            if (idx.event_e & bit) { ++count_e; only_e = u; }
        }
        if (count_a > 0) p_a.add(prob);
        if (count_e > 0) p_e.add(prob);
        // exists u != v with outcome in A_u and in E_v
        bool cross = count_a > 0 && count_e > 0 &&
                     !(count_a == 1 && count_e == 1 && only_a == only_e);
        if (cross) p_cross.add(prob);

        // odometer
        std::size_t d = 0;
        while (d < n) {
            if (++outcome[d] < inst.indices[d].probs.size()) break;
            outcome[d] = 0;
            ++d;
        }
        if (d == n) break;
    }
    BkrResult res;
    res.lhs = p_cross.sum;
    res.p_union_a = p_a.sum;
    res.p_union_e = p_e.sum;
    res.rhs = res.p_union_a * res.p_union_e;
    res.violated = res.lhs > res.rhs + 1e-12;
    return res;
}

BkrInstance random_bkr_instance(RngStream& rng, int max_indices, int max_space) {
    BkrInstance inst;
    int n = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_indices));
    inst.indices.resize(static_cast<std::size_t>(n));
    for (auto& idx : inst.indices) {
        int size = 2 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_space - 1));
        idx.probs.resize(static_cast<std::size_t>(size));
        double total = 0.0;
        for (auto& p : idx.probs) { p = rng.next_uniform(); total += p; }
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < idx.probs.size(); ++i) {
            idx.probs[i] /= total;
            acc += idx.probs[i];
        }
        idx.probs.back() = 1.0 - acc; // exact sum
        std::uint32_t full = (1u << size) - 1u;
        idx.event_a = static_cast<std::uint32_t>(rng.next_u64()) & full;
        idx.event_e = static_cast<std::uint32_t>(rng.next_u64()) & full;
    }
    return inst;
}

// --- subsequence averages ---------------------------------------------------

std::vector<SubsequenceRow> subsequence_average_check(std::span<const double> times,
                                                      std::span<const double> values,
                                                      std::span<const double> schedule) {
    if (times.size() != values.size() || times.empty())
        throw std::invalid_argument("subsequence_average_check: times/values size mismatch");
    if (times[0] != 0.0)
        throw std::invalid_argument("subsequence_average_check: signal must start at time 0");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("subsequence_average_check: times must increase");
    for (double v : values)
        if (!(std::abs(v) <= 1.0))
            throw std::invalid_argument("subsequence_average_check: |x(t)| must be <= 1");
    if (schedule.size() < 2)
        throw std::invalid_argument("subsequence_average_check: schedule needs >= 2 points");
    for (std::size_t i = 0; i < schedule.size(); ++i)
        if (!(schedule[i] > 0.0) || (i > 0 && !(schedule[i] > schedule[i - 1])))
            throw std::invalid_argument("subsequence_average_check: schedule must be positive increasing");

    // prefix integrals of the piecewise-constant signal
    std::vector<double> cum(times.size(), 0.0);
    for (std::size_t i = 1; i < times.size(); ++i)
        cum[i] = cum[i - 1] + values[i - 1] * (times[i] - times[i - 1]);

    auto rho = [&](double T) {
        auto it = std::upper_bound(times.begin(), times.end(), T);
        std::size_t i = static_cast<std::size_t>(it - times.begin()) - 1;
        return (cum[i] + values[i] * (T - times[i])) / T;
    };

    std::vector<SubsequenceRow> rows;
    for (std::size_t k = 0; k + 1 < schedule.size(); ++k) {
        double sn = schedule[k], sn1 = schedule[k + 1];
        // rho is monotone between breakpoints, so endpoints suffice
        double sup = std::max(std::abs(rho(sn)), std::abs(rho(sn1)));
        auto lo = std::upper_bound(times.begin(), times.end(), sn);
        auto hi = std::lower_bound(times.begin(), times.end(), sn1);
        for (auto it = lo; it != hi; ++it) sup = std::max(sup, std::abs(rho(*it)));
        SubsequenceRow row;
        row.n = static_cast<int>(k) + 1;
        row.s_n = sn;
        row.s_n1 = sn1;
        row.rho_sn = rho(sn);
        row.sup_abs_rho = sup;
        row.bound = std::abs(row.rho_sn) + (1.0 - sn / sn1);
        row.ok = sup <= row.bound + 1e-12;
        rows.push_back(row);
    }
    return rows;
}

// --- statistics helpers -----------------------------------------------------

LinearFit linear_fit(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("linear_fit: need >= 2 matched points");
    double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) { mx += xs[i]; my += ys[i]; }
    mx /= n; my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx; sxy += dx * dy; syy += dy * dy;
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("linear_fit: degenerate x values");
    LinearFit fit;
    fit.n = static_cast<int>(xs.size());
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = syy - fit.slope * sxy;
    fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    fit.slope_se = xs.size() > 2 ? std::sqrt(std::max(ss_res, 0.0) / (n - 2.0) / sxx) : 0.0;
    return fit;
}

double pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("pearson_correlation: need >= 2 matched points");
    double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) { mx += xs[i]; my += ys[i]; }
    mx /= n; my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx; sxy += dx * dy; syy += dy * dy;
    }
    if (!(sxx > 0.0 && syy > 0.0))
        throw std::invalid_argument("pearson_correlation: degenerate inputs");
    return sxy / std::sqrt(sxx * syy);
}

// --- right tail --------------------------------------------------------------

TailResult exp_right_tail(double t, std::uint64_t trials, std::span<const double> y_grid,
                          RngStreamKey stream, int threads) {
    if (!(t > 0.0 && t <= 12.0))
        throw std::invalid_argument("exp_right_tail: t must lie in (0, 12] (unpruned event mode)");
    if (trials < 100 || y_grid.empty())
        throw std::invalid_argument("exp_right_tail: need trials >= 100 and a nonempty y grid");

    std::vector<double> offsets(trials);
    parallel_for(trials, threads, [&](std::uint64_t i) {
        RunConfig cfg;
        cfg.T = t;
        cfg.snapshot_times = {t};
        cfg.record_genealogy = false;
        cfg.root_stream = derive_stream(stream, stream_tag::kTrialBase + i);
        RunResult res = run(cfg);
        offsets[i] = max_offset(res.snapshots[0]).offset;
    });

    TailResult out;
    out.trials = trials;
    out.table.columns = {"y", "hits", "p_hat", "se", "in_fit"};
    std::vector<double> fit_y, fit_logp;
    std::vector<std::uint64_t> hits(y_grid.size(), 0);
    for (double off : offsets)
        for (std::size_t j = 0; j < y_grid.size(); ++j)
            if (off >= y_grid[j]) ++hits[j];
    for (std::size_t j = 0; j < y_grid.size(); ++j) {
        double p = static_cast<double>(hits[j]) / static_cast<double>(trials);
        bool in_fit = hits[j] >= 100;
        if (in_fit) {
            fit_y.push_back(y_grid[j]);
            fit_logp.push_back(std::log(p));
        } else {
            out.fit_window_shrunk = true;
        }
        auto& row = out.table.add_row();
        row = {y_grid[j], static_cast<std::int64_t>(hits[j]), p, binom_se(p, trials),
               static_cast<std::int64_t>(in_fit ? 1 : 0)};
    }
    if (fit_y.size() < 2)
        throw std::runtime_error("exp_right_tail: fewer than 2 grid points reached 100 hits");
    LinearFit fit = linear_fit(fit_y, fit_logp);
    out.slope = fit.slope;
    out.slope_se = fit.slope_se;
    out.fit_points = fit.n;
    return out;
}

// --- early branching ----------------------------------------------------------

EarlyBranchingResult exp_early_branching(double s, double t, double x,
                                         std::span<const double> r_list, std::uint64_t trials,
                                         RngStreamKey stream, int threads) {
    if (!(s > 0.0 && s < t))
        throw std::invalid_argument("exp_early_branching: need 0 < s < t");
    if (!(t <= 14.0))
        throw std::invalid_argument("exp_early_branching: t must be <= 14 (unpruned event mode)");
    for (std::size_t i = 1; i < r_list.size(); ++i)
        if (!(r_list[i] > r_list[i - 1]))
            throw std::invalid_argument("exp_early_branching: R_list must be increasing");
    if (trials < 100 || r_list.empty())
        throw std::invalid_argument("exp_early_branching: need trials >= 100 and a nonempty R list");

    std::vector<double> q_max(trials, -1.0); // -1 encodes "no extremal pair"
    parallel_for(trials, threads, [&](std::uint64_t i) {
        RunConfig cfg;
        cfg.T = t;
        cfg.snapshot_times = {s, t};
        cfg.record_genealogy = true;
        cfg.root_stream = derive_stream(stream, stream_tag::kTrialBase + i);
        RunResult res = run(cfg);
        auto q = extremal_pair_split_scan(res.genealogy, res.snapshots[0], res.snapshots[1], x);
        if (q) q_max[i] = *q;
    });

    EarlyBranchingResult out;
    out.trials = trials;
    out.table.columns = {"R", "hits", "p_hat", "se"};
    std::uint64_t nonempty = 0;
    for (double q : q_max)
        if (q >= 0.0) ++nonempty;
    out.frac_both_nonempty = static_cast<double>(nonempty) / static_cast<double>(trials);
    for (double R : r_list) {
        std::uint64_t hits = 0;
        for (double q : q_max)
            if (q >= R) ++hits;
        double p = static_cast<double>(hits) / static_cast<double>(trials);
        out.r_values.push_back(R);
        out.p_hat.push_back(p);
        out.se.push_back(binom_se(p, trials));
        auto& row = out.table.add_row();
        row = {R, static_cast<std::int64_t>(hits), p, binom_se(p, trials)};
    }
    return out;
}

// --- localization ---------------------------------------------------------------

LocalizationResult exp_localization(double t, double x, double alpha,
                                    std::span<const double> r_list, std::uint64_t trials,
                                    double dt, RngStreamKey stream, int threads) {
    if (!(t > 0.0 && t <= 10.0))
        throw std::invalid_argument("exp_localization: t must lie in (0, 10] (grid mode cost guard)");
    if (!(alpha > 0.0 && alpha <= 0.5))
        throw std::invalid_argument("exp_localization: alpha must lie in (0, 1/2]");
    if (trials < 10 || r_list.empty())
        throw std::invalid_argument("exp_localization: need trials >= 10 and a nonempty r list");
    for (double r : r_list)
        if (!(r >= 0.0 && r <= t / 2.0))
            throw std::invalid_argument("exp_localization: each r must lie in [0, t/2]");

    const std::uint32_t k_last = static_cast<std::uint32_t>(std::llround(t / dt));
    const double mt = centering(t);

    // per trial, the set of window times where some extremal particle exceeds
    // the tilted line minus the envelope
    std::vector<std::vector<double>> violating(trials);
    parallel_for(trials, threads, [&](std::uint64_t i) {
        RunConfig cfg;
        cfg.T = t;
        cfg.mode = RunMode::grid;
        cfg.dt = dt;
        cfg.snapshot_times = {t};
        cfg.record_genealogy = true;
        cfg.root_stream = derive_stream(stream, stream_tag::kTrialBase + i);
        RunResult res = run(cfg);
        std::vector<NodeId> extremal = extremal_set(res.snapshots[0], x);
        std::vector<char> seen(k_last + 1, 0);
        for (NodeId u : extremal) {
            std::vector<double> path = lineage_path(res.genealogy, res.paths, u, k_last);
            for (std::uint32_t k = 0; k <= k_last; ++k) {
                if (seen[k]) continue;
                double sk = dt * static_cast<double>(k);
                double line = (sk / t) * mt - envelope(t, alpha, sk);
                if (path[k] > line) seen[k] = 1;
            }
        }
        for (std::uint32_t k = 0; k <= k_last; ++k)
            if (seen[k]) violating[i].push_back(dt * static_cast<double>(k));
    });

    LocalizationResult out;
    out.trials = trials;
    out.table.columns = {"r", "in_regime", "hits", "p_hat", "se"};
    for (double r : r_list) {
        bool in_regime = t >= 3.0 * r;
        std::uint64_t hits = 0;
        for (const auto& vs : violating) {
            bool hit = false;
            for (double sv : vs)
                if (sv >= r - 1e-9 && sv <= t - r + 1e-9) { hit = true; break; }
            if (hit) ++hits;
        }
        double p = static_cast<double>(hits) / static_cast<double>(trials);
        out.r_values.push_back(r);
        out.p_hat.push_back(p);
        out.se.push_back(binom_se(p, trials));
        out.in_regime.push_back(in_regime);
        auto& row = out.table.add_row();
        row = {r, static_cast<std::int64_t>(in_regime ? 1 : 0), static_cast<std::int64_t>(hits),
               p, binom_se(p, trials)};
    }
    return out;
}

// --- conditional decorrelation ---------------------------------------------------

namespace {

// Max position at the two target times over the subtree of one time-R
// particle. Lean DFS: no genealogy, no snapshots.
struct TwoTimeMax {
    double at_s = -kInf;
    double at_t = -kInf;
};

void subtree_two_time_max(RngStreamKey root_key, double t_birth, double x_birth, double s,
                          double t, std::uint64_t limit, std::uint64_t& nodes, TwoTimeMax& out) {
    struct Task { double birth, x; RngStreamKey key; };
    std::vector<Task> stack;
    stack.push_back({t_birth, x_birth, root_key});
    while (!stack.empty()) {
        Task task = stack.back();
        stack.pop_back();
        RngStream rng(task.key);
        double life = rng.next_exponential();
        double end = task.birth + life;
        bool branched = end < t;
        if (!branched) end = t;
        double cur_t = task.birth;
        double xpos = task.x;
        if (cur_t < s && s <= end) {
            xpos += std::sqrt(s - cur_t) * rng.next_gaussian();
            cur_t = s;
            out.at_s = std::max(out.at_s, xpos);
        }
        if (end > cur_t) xpos += std::sqrt(end - cur_t) * rng.next_gaussian();
        if (branched) {
            if (++nodes > limit) throw ParticleLimitError(limit, end);
            stack.push_back({end, xpos, derive_stream(task.key, 1)});
            stack.push_back({end, xpos, derive_stream(task.key, 0)});
        } else {
            out.at_t = std::max(out.at_t, xpos);
        }
    }
}

} // namespace

DecorrelationResult exp_decorrelation(double R, double s, double t, double x, double y,
                                      std::uint64_t outer_trials, std::uint64_t inner_resamples,
                                      RngStreamKey stream, int threads) {
    if (!(R > 0.0 && R < s && s < t))
        throw std::invalid_argument("exp_decorrelation: need 0 < R < s < t");
    if (!(t - R <= 10.0))
        throw std::invalid_argument("exp_decorrelation: t - R must be <= 10 (inner subtree cost guard)");
    if (outer_trials < 10 || inner_resamples < 50)
        throw std::invalid_argument("exp_decorrelation: need outer >= 10 and inner >= 50");

    const double thresh_s = centering(s) + x;
    const double thresh_t = centering(t) + y;

    struct OuterRow {
        std::uint64_t alive_at_r;
        double p_lhs, p_s, p_t, se_combined;
        bool violated;
    };
    std::vector<OuterRow> rows(outer_trials);

    parallel_for(outer_trials, threads, [&](std::uint64_t o) {
        RngStreamKey outer_key = derive_stream(stream, stream_tag::kTrialBase + o);
        RunConfig cfg;
        cfg.T = R;
        cfg.snapshot_times = {R};
        cfg.record_genealogy = false;
        cfg.root_stream = outer_key;
        RunResult pre = run(cfg);
        const auto& roots = pre.snapshots[0].entries;
        if (roots.empty()) throw std::logic_error("exp_decorrelation: empty population at R");

        std::uint64_t hit_lhs = 0, hit_s = 0, hit_t = 0;
        for (std::uint64_t j = 0; j < inner_resamples; ++j) {
            RngStreamKey jkey = derive_stream(outer_key, stream_tag::kInnerResample + j);
            double max_s = -kInf, max_t = -kInf;
            std::size_t arg_s = 0, arg_t = 0;
            std::uint64_t nodes = 0;
            for (std::size_t i = 0; i < roots.size(); ++i) {
                TwoTimeMax m;
                subtree_two_time_max(derive_stream(jkey, i), R, roots[i].second, s, t,
                                     5'000'000, nodes, m);
                if (m.at_s > max_s) { max_s = m.at_s; arg_s = i; }
                if (m.at_t > max_t) { max_t = m.at_t; arg_t = i; }
            }
            bool ms = max_s >= thresh_s;
            bool mt = max_t >= thresh_t;
            if (ms) ++hit_s;
            if (mt) ++hit_t;
            // Q(u*_s, u*_t) <= R exactly when the two argmax particles
            // descend from distinct time-R ancestors
            if (ms && mt && arg_s != arg_t) ++hit_lhs;
        }
        double n = static_cast<double>(inner_resamples);
        OuterRow row;
        row.alive_at_r = roots.size();
        row.p_lhs = static_cast<double>(hit_lhs) / n;
        row.p_s = static_cast<double>(hit_s) / n;
        row.p_t = static_cast<double>(hit_t) / n;
        double se_lhs = binom_se(row.p_lhs, inner_resamples);
        double se_s = binom_se(row.p_s, inner_resamples);
        double se_t = binom_se(row.p_t, inner_resamples);
        // delta-method SE for the product plus the lhs SE
        double se_prod2 = row.p_t * row.p_t * se_s * se_s + row.p_s * row.p_s * se_t * se_t;
        row.se_combined = std::sqrt(se_lhs * se_lhs + se_prod2);
        row.violated = row.p_lhs > row.p_s * row.p_t + 3.0 * row.se_combined;
        rows[o] = row;
    });

    DecorrelationResult out;
    out.outer_trials = outer_trials;
    out.inner_resamples = inner_resamples;
    out.table.columns = {"outer", "alive_at_R", "p_lhs", "p_s", "p_t",
                         "product", "se_combined", "violated"};
    std::uint64_t violations = 0;
    for (std::uint64_t o = 0; o < outer_trials; ++o) {
        const auto& r = rows[o];
        if (r.violated) ++violations;
        auto& row = out.table.add_row();
        row = {static_cast<std::int64_t>(o), static_cast<std::int64_t>(r.alive_at_r),
               r.p_lhs, r.p_s, r.p_t, r.p_s * r.p_t, r.se_combined,
               static_cast<std::int64_t>(r.violated ? 1 : 0)};
    }
    out.violation_fraction = static_cast<double>(violations) / static_cast<double>(outer_trials);
    return out;
}

// --- ergodic average ---------------------------------------------------------

std::vector<double> default_x_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 40; ++i) grid.push_back(-3.0 + 0.125 * i);
    return grid;
}

namespace {

struct ErgodicRun {
    std::vector<double> f_le, f_ge;
    double z_proxy = 0.0;
    std::vector<double> indicator_times;  // sample times from 0 (prefix zeros)
    std::vector<double> indicator_values; // centered indicator at x = 0
};

ErgodicRun run_ergodic_seed(const ErgodicParams& p, double L, RngStreamKey seed_key) {
    RunConfig cfg;
    cfg.T = p.T;
    cfg.sample_dt = p.dt_sample;
    cfg.snapshot_times = {p.t0};
    cfg.record_genealogy = false;
    cfg.root_stream = seed_key;
    cfg.hard_particle_limit = p.hard_particle_limit;
    cfg.prune.mode = PruneMode::gap_to_max;
    cfg.prune.L = L;
    cfg.prune.enable_after = p.t0;

    const double t_start = p.eps * p.T;
    ErgodicAccumulator acc(p.x_grid, t_start);
    ErgodicRun out;
    std::vector<double> raw_ind;

    RunHooks hooks;
    hooks.on_snapshot = [&](const PopulationSnapshot& snap) {
        out.z_proxy = derivative_martingale(snap);
    };
    hooks.on_sample = [&](const PopulationSnapshot& snap) {
        double tau = snap.time;
        if (tau < t_start - 1e-9 || tau > p.T - p.dt_sample + 1e-9) return;
        double offset = max_offset(snap).offset;
        acc.accumulate(offset, p.dt_sample);
        raw_ind.push_back(offset <= 0.0 ? 1.0 : 0.0);
    };
    run(cfg, hooks);

    out.f_le = acc.result();
    out.f_ge.resize(out.f_le.size());
    for (std::size_t i = 0; i < out.f_le.size(); ++i) out.f_ge[i] = 1.0 - out.f_le[i];

    double mean = 0.0;
    for (double v : raw_ind) mean += v;
    if (!raw_ind.empty()) mean /= static_cast<double>(raw_ind.size());
    out.indicator_times = {0.0};
    out.indicator_values = {0.0};
    for (std::size_t k = 0; k < raw_ind.size(); ++k) {
        out.indicator_times.push_back(t_start + p.dt_sample * static_cast<double>(k));
        out.indicator_values.push_back(raw_ind[k] - mean);
    }
    return out;
}

} // namespace

ErgodicResult exp_ergodic(const ErgodicParams& params, RngStreamKey stream, int threads) {
    ErgodicParams p = params;
    if (p.x_grid.empty()) p.x_grid = default_x_grid();
    if (!(p.eps > 0.0 && p.eps < 1.0))
        throw std::invalid_argument("exp_ergodic: eps must lie in (0, 1)");
    if (!(p.T > 0.0 && p.dt_sample > 0.0 && p.L > 0.0))
        throw std::invalid_argument("exp_ergodic: T, dt_sample, L must be > 0");
    if (!(p.t0 > 0.0 && p.t0 < p.eps * p.T + 1e-9))
        throw std::invalid_argument("exp_ergodic: need 0 < t0 <= eps*T");
    if (p.n_seeds < 2) throw std::invalid_argument("exp_ergodic: need at least 2 seeds");

    std::vector<ErgodicRun> base(p.n_seeds);
    parallel_for(static_cast<std::uint64_t>(p.n_seeds), threads, [&](std::uint64_t i) {
        base[i] = run_ergodic_seed(p, p.L, derive_stream(stream, stream_tag::kTrialBase + i));
    });

    ErgodicResult out;
    out.curves.columns = {"seed", "L", "x", "F_le", "F_ge"};
    out.fits.columns = {"seed", "z_proxy", "slope", "intercept", "r2", "excluded_cells"};
    out.schedule.columns = {"seed", "n", "S_n", "S_n1", "rho_Sn", "sup_abs_rho", "bound", "ok"};

    // evaluation schedule T_n = exp(n^beta), truncated to (eps*T, T]
    std::vector<double> schedule;
    for (int n = 1;; ++n) {
        double sn = std::exp(std::pow(static_cast<double>(n), p.beta));
        if (sn > p.T) break;
        schedule.push_back(sn);
    }

    std::vector<double> slopes, zs;
    for (int i = 0; i < p.n_seeds; ++i) {
        const ErgodicRun& r = base[i];
        ErgodicSeedResult seed;
        seed.seed_index = i;
        seed.z_proxy = r.z_proxy;
        seed.f_le = r.f_le;
        seed.f_ge = r.f_ge;

        std::vector<double> fx, fy;
        for (std::size_t j = 0; j < p.x_grid.size(); ++j) {
            double x = p.x_grid[j];
            out.curves.add_row() = {static_cast<std::int64_t>(i), p.L, x, r.f_le[j], r.f_ge[j]};
            if (x < p.fit_x_lo - 1e-12 || x > p.fit_x_hi + 1e-12) continue;
            if (r.f_le[j] <= 0.0) {
                ++seed.excluded_cells;
                continue;
            }
            fx.push_back(std::exp(-kSqrt2 * x));
            fy.push_back(-std::log(r.f_le[j]));
        }
        if (fx.size() >= 3) {
            LinearFit fit = linear_fit(fx, fy);
            seed.slope = fit.slope;
            seed.intercept = fit.intercept;
            seed.r2 = fit.r2;
        }
        out.fits.add_row() = {static_cast<std::int64_t>(i), seed.z_proxy, seed.slope,
                              seed.intercept, seed.r2, static_cast<std::int64_t>(seed.excluded_cells)};
        slopes.push_back(seed.slope);
        zs.push_back(seed.z_proxy);
        out.seeds.push_back(std::move(seed));

        if (schedule.size() >= 2) {
            auto rows = subsequence_average_check(r.indicator_times, r.indicator_values, schedule);
            for (const auto& row : rows)
                out.schedule.add_row() = {static_cast<std::int64_t>(i),
                                          static_cast<std::int64_t>(row.n), row.s_n, row.s_n1,
                                          row.rho_sn, row.sup_abs_rho, row.bound,
                                          static_cast<std::int64_t>(row.ok ? 1 : 0)};
        }
    }
    out.slope_z_correlation = pearson_correlation(zs, slopes);

    out.sensitivity.columns = {"x", "mean_base", "sd_base", "mean_sens", "abs_shift", "limit", "ok"};
    if (p.sensitivity_L > 0.0) {
        try {
            std::vector<ErgodicRun> sens(p.n_seeds);
            // runs near the particle cap can hold ~1 GB of live particles
            // each, so the sensitivity pass is always serialized
            parallel_for(static_cast<std::uint64_t>(p.n_seeds), 1, [&](std::uint64_t i) {
                sens[i] = run_ergodic_seed(p, p.sensitivity_L,
                                           derive_stream(stream, stream_tag::kTrialBase + i));
            });
            out.sensitivity_ran = true;
            out.sensitivity_ok = true;
            for (std::size_t j = 0; j < p.x_grid.size(); ++j) {
                double mb = 0.0, ms = 0.0;
                for (int i = 0; i < p.n_seeds; ++i) {
                    mb += base[i].f_le[j];
                    ms += sens[i].f_le[j];
                }
                mb /= p.n_seeds;
                ms /= p.n_seeds;
                double sd = 0.0;
                for (int i = 0; i < p.n_seeds; ++i) sd += (base[i].f_le[j] - mb) * (base[i].f_le[j] - mb);
                sd = std::sqrt(sd / (p.n_seeds - 1));
                double shift = std::abs(ms - mb);
                double limit = 3.0 * sd;
                bool ok = shift <= limit + 1e-15;
                if (!ok) out.sensitivity_ok = false;
                out.sensitivity.add_row() = {p.x_grid[j], mb, sd, ms, shift, limit,
                                             static_cast<std::int64_t>(ok ? 1 : 0)};
            }
        } catch (const ParticleLimitError& e) {
            out.sensitivity_ran = false;
            out.sensitivity_ok = false;
            out.sensitivity_note =
                "sensitivity run at L = " + std::to_string(p.sensitivity_L) +
                " aborted: " + e.what();
        }
    }
    return out;
}

} // namespace bbm::lab
