// bbm command-line harness: runs simulations and verification experiments,
// writes CSV reports plus a run manifest.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 assertion failure
// (--assert only), 4 resource-guard abort.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "bbm/analytic.hpp"
#include "bbm/bridge.hpp"
#include "bbm/config.hpp"
#include "bbm/engine.hpp"
#include "bbm/experiments.hpp"
#include "bbm/observables.hpp"
#include "bbm/table.hpp"
#include "bbm/version.hpp"

namespace {

using bbm::Table;
using bbm::cli::Config;
using bbm::cli::ConfigError;
using bbm::cli::KeySpec;

const char* kUsage = R"(usage: bbm <subcommand> [--config PATH] [--seed U64] [--threads N]
           [--out DIR] [--assert] [--key value ...]

subcommands:
  simulate         one realization; population snapshots and run statistics
  tail             right-tail survival of the centered front + log-slope fit
  early-branching  splitting-time tail over extremal pairs
  localization     path-envelope violation rate per window margin
  decorrelate      nested conditional-independence check
  bkr-check        brute-forced cross-index inequality instances
  bridge-check     bridge closed forms and line-bound dominance vs Monte Carlo
  moment-check     one- and two-point moment identities
  ergodic          time-average front law, fits, sensitivity, schedule bound

Config files are `key = value` lines; command-line --key flags override them.
Every subcommand writes its CSVs plus <subcommand>_manifest.txt under --out
(default: $BBM_OUT_DIR or the current directory).
)";

std::string now_utc() {
    auto now = std::chrono::system_clock::now();
    std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<KeySpec> common_schema() {
    const char* env = std::getenv("BBM_OUT_DIR");
    std::string out_default = env && *env ? env : ".";
    return {
        {"config", KeySpec::Type::string, std::string(""), nullptr},
        {"seed", KeySpec::Type::u64, std::string("1"), nullptr},
        {"threads", KeySpec::Type::u64, std::string("1"),
         [](const std::string& k, const std::string& v) {
             auto n = bbm::cli::parse_u64(k, v);
             if (n < 1 || n > 256) throw ConfigError("key '" + k + "': must lie in [1, 256]");
         }},
        {"out", KeySpec::Type::string, out_default, nullptr},
        {"assert", KeySpec::Type::boolean, std::string("false"), nullptr},
    };
}

// Writes every CSV and the manifest; returns the manifest path.
void emit_outputs(const std::string& sub, const Config& cfg, const std::string& start_ts,
                  const std::vector<std::pair<std::string, Table>>& tables) {
    namespace fs = std::filesystem;
    fs::path out_dir = cfg.get_string("out");
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    for (const auto& [name, table] : tables) {
        fs::path p = out_dir / name;
        bbm::write_csv(table, p.string());
        written.push_back(name);
    }
    std::string m;
    m += "subcommand = " + sub + "\n";
    m += "version = " + std::string(bbm::kVersion) + "\n";
    m += "start = " + start_ts + "\n";
    m += "end = " + now_utc() + "\n";
    for (const auto& [k, v] : cfg.entries())
        m += "config." + k + " = " + v + "\n";
    for (const auto& name : written)
        m += "output = " + name + "\n";
    fs::path mpath = out_dir / (sub + "_manifest.txt");
    fs::path tmp = mpath;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write manifest at " + tmp.string());
        f << m;
    }
    fs::rename(tmp, mpath);
}

int finish(const std::string& sub, const Config& cfg, const std::string& start_ts,
           const std::vector<std::pair<std::string, Table>>& tables,
           const std::vector<std::string>& failures) {
    emit_outputs(sub, cfg, start_ts, tables);
    if (!failures.empty()) {
        for (const auto& f : failures) std::cerr << sub << ": ASSERT FAILED: " << f << "\n";
        if (cfg.get_bool("assert")) return 3;
    }
    return 0;
}

bbm::RngStreamKey root_key(const Config& cfg) { return bbm::make_root_key(cfg.get_u64("seed")); }
int threads_of(const Config& cfg) { return static_cast<int>(cfg.get_u64("threads")); }

// ---------------------------------------------------------------------------

int cmd_simulate(Config& cfg, const std::string& start_ts) {
    bbm::RunConfig rc;
    rc.T = cfg.get_f64("T");
    std::string mode = cfg.get_string("mode");
    if (mode == "event") rc.mode = bbm::RunMode::event;
    else if (mode == "grid") rc.mode = bbm::RunMode::grid;
    else throw ConfigError("key 'mode': expected event|grid, got '" + mode + "'");
    rc.dt = cfg.get_f64("dt");
    rc.sample_dt = cfg.get_f64("sample_dt");
    std::string prune = cfg.get_string("prune");
    if (prune == "none") rc.prune.mode = bbm::PruneMode::none;
    else if (prune == "line_barrier") rc.prune.mode = bbm::PruneMode::line_barrier;
    else if (prune == "gap_to_max") rc.prune.mode = bbm::PruneMode::gap_to_max;
    else if (prune == "cap_count") rc.prune.mode = bbm::PruneMode::cap_count;
    else throw ConfigError("key 'prune': expected none|line_barrier|gap_to_max|cap_count, got '" +
                           prune + "'");
    rc.prune.A = cfg.get_f64("A");
    rc.prune.L = cfg.get_f64("L");
    rc.prune.N_max = cfg.get_u64("N_max");
    rc.prune.enable_after = cfg.get_f64("enable_after");
    rc.hard_particle_limit = cfg.get_u64("particle_limit");
    std::string st = cfg.get_string("snapshot_times");
    rc.snapshot_times = st.empty() ? std::vector<double>{rc.T}
                                   : bbm::cli::parse_f64_list("snapshot_times", st);
    rc.record_genealogy = false;
    rc.root_stream = root_key(cfg);

    bbm::RunResult res = bbm::run(rc);

    Table snaps;
    snaps.columns = {"time", "id", "position"};
    for (const auto& s : res.snapshots)
        for (const auto& [id, pos] : s.entries)
            snaps.add_row() = {s.time, static_cast<std::int64_t>(id), pos};
    Table stats;
    stats.columns = {"nodes_created", "branch_events", "pruned_kills", "max_alive", "final_alive"};
    stats.add_row() = {static_cast<std::int64_t>(res.stats.nodes_created),
                       static_cast<std::int64_t>(res.stats.branch_events),
                       static_cast<std::int64_t>(res.stats.pruned_kills),
                       static_cast<std::int64_t>(res.stats.max_alive),
                       static_cast<std::int64_t>(res.stats.final_alive)};
    return finish("simulate", cfg, start_ts,
                  {{"simulate_snapshots.csv", snaps}, {"simulate_stats.csv", stats}}, {});
}

int cmd_tail(Config& cfg, const std::string& start_ts) {
    double y_lo = cfg.get_f64("y_lo"), y_hi = cfg.get_f64("y_hi"), y_step = cfg.get_f64("y_step");
    if (!(y_step > 0.0 && y_hi >= y_lo))
        throw ConfigError("keys 'y_lo'/'y_hi'/'y_step': need y_hi >= y_lo and y_step > 0");
    std::vector<double> grid;
    for (double y = y_lo; y <= y_hi + 1e-12; y += y_step) grid.push_back(y);

    auto res = bbm::lab::exp_right_tail(cfg.get_f64("t"), cfg.get_u64("trials"), grid,
                                        root_key(cfg), threads_of(cfg));
    double target = -bbm::kSqrt2;
    double tol = cfg.get_f64("slope_tol");
    bool ok = std::abs(res.slope - target) <= tol;
    Table fit;
    fit.columns = {"slope", "slope_se", "target", "tolerance", "fit_points",
                   "fit_window_shrunk", "trials", "ok"};
    fit.add_row() = {res.slope, res.slope_se, target, tol,
                     static_cast<std::int64_t>(res.fit_points),
                     static_cast<std::int64_t>(res.fit_window_shrunk ? 1 : 0),
                     static_cast<std::int64_t>(res.trials),
                     static_cast<std::int64_t>(ok ? 1 : 0)};
    if (res.fit_window_shrunk)
        std::cerr << "tail: warning: grid points with fewer than 100 hits were dropped "
                     "from the slope fit\n";
    std::vector<std::string> failures;
    if (!ok)
        failures.push_back("slope " + std::to_string(res.slope) + " outside " +
                           std::to_string(target) + " +- " + std::to_string(tol));
    return finish("tail", cfg, start_ts, {{"tail.csv", res.table}, {"tail_fit.csv", fit}},
                  failures);
}

int cmd_early_branching(Config& cfg, const std::string& start_ts) {
    auto r_list = cfg.get_f64_list("R_list");
    auto res = bbm::lab::exp_early_branching(cfg.get_f64("s"), cfg.get_f64("t"), cfg.get_f64("x"),
                                             r_list, cfg.get_u64("trials"), root_key(cfg),
                                             threads_of(cfg));
    std::vector<std::string> failures;
    if (res.p_hat.size() >= 2) {
        double gap = res.p_hat.front() - res.p_hat.back();
        double se = std::sqrt(res.se.front() * res.se.front() + res.se.back() * res.se.back());
        if (!(gap > 2.0 * se))
            failures.push_back("p_hat(" + std::to_string(r_list.front()) + ") - p_hat(" +
                               std::to_string(r_list.back()) + ") = " + std::to_string(gap) +
                               " not > 2 SE = " + std::to_string(2.0 * se));
    }
    return finish("early-branching", cfg, start_ts, {{"early_branching.csv", res.table}},
                  failures);
}

int cmd_localization(Config& cfg, const std::string& start_ts) {
    auto r_list = cfg.get_f64_list("r_list");
    auto res = bbm::lab::exp_localization(cfg.get_f64("t"), cfg.get_f64("x"),
                                          cfg.get_f64("alpha"), r_list, cfg.get_u64("trials"),
                                          cfg.get_f64("dt"), root_key(cfg), threads_of(cfg));
    std::vector<std::string> failures;
    for (std::size_t i = 1; i < res.p_hat.size(); ++i) {
        double slack = 2.0 * std::sqrt(res.se[i] * res.se[i] + res.se[i - 1] * res.se[i - 1]);
        if (res.p_hat[i] > res.p_hat[i - 1] + slack)
            failures.push_back("p_hat(r=" + std::to_string(res.r_values[i]) +
                               ") exceeds p_hat(r=" + std::to_string(res.r_values[i - 1]) +
                               ") by more than 2 SE");
    }
    return finish("localization", cfg, start_ts, {{"localization.csv", res.table}}, failures);
}

int cmd_decorrelate(Config& cfg, const std::string& start_ts) {
    auto res = bbm::lab::exp_decorrelation(cfg.get_f64("R"), cfg.get_f64("s"), cfg.get_f64("t"),
                                           cfg.get_f64("x"), cfg.get_f64("y"),
                                           cfg.get_u64("outer"), cfg.get_u64("inner"),
                                           root_key(cfg), threads_of(cfg));
    std::vector<std::string> failures;
    double max_frac = cfg.get_f64("max_violation_fraction");
    if (res.violation_fraction > max_frac)
        failures.push_back("violation fraction " + std::to_string(res.violation_fraction) +
                           " > " + std::to_string(max_frac));
    return finish("decorrelate", cfg, start_ts, {{"decorrelation.csv", res.table}}, failures);
}

int cmd_bkr_check(Config& cfg, const std::string& start_ts) {
    std::uint64_t n = cfg.get_u64("instances");
    int max_idx = static_cast<int>(cfg.get_u64("max_indices"));
    int max_space = static_cast<int>(cfg.get_u64("max_space"));
    bbm::RngStream rng(bbm::derive_stream(root_key(cfg), bbm::stream_tag::kTrialBase));
    Table t;
    t.columns = {"instance", "n_indices", "lhs", "rhs", "violated"};
    std::uint64_t violations = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        auto inst = bbm::lab::random_bkr_instance(rng, max_idx, max_space);
        auto res = bbm::lab::bkr_brute_force(inst);
        if (res.violated) ++violations;
        t.add_row() = {static_cast<std::int64_t>(i),
                       static_cast<std::int64_t>(inst.indices.size()), res.lhs, res.rhs,
                       static_cast<std::int64_t>(res.violated ? 1 : 0)};
    }
    std::vector<std::string> failures;
    if (violations > 0)
        failures.push_back(std::to_string(violations) + " inequality violations");
    return finish("bkr-check", cfg, start_ts, {{"bkr.csv", t}}, failures);
}

int cmd_bridge_check(Config& cfg, const std::string& start_ts) {
    namespace br = bbm::bridge;
    std::uint64_t n_paths = cfg.get_u64("n_paths");
    std::uint64_t steps = cfg.get_u64("grid_steps");
    double bias = cfg.get_f64("bias_allowance");
    bbm::RngStreamKey key = root_key(cfg);
    std::vector<std::string> failures;

    Table t;
    t.columns = {"check", "closed_form", "mc", "mc_se", "diff", "ok"};
    {
        double t_h = cfg.get_f64("t"), x = cfg.get_f64("x"), y = cfg.get_f64("y");
        double exact = br::bridge_nonneg_prob(t_h, x, y);
        br::BridgeEventSpec spec;
        spec.t = t_h; spec.x = x; spec.y = y;
        auto mc = br::mc_bridge_event_prob(spec, n_paths, steps, bbm::derive_stream(key, 1));
        double diff = mc.estimate - exact;
        // discrete monitoring misses down-excursions, so mc >= exact up to noise
        bool ok = diff >= -3.0 * mc.std_error && diff <= bias + 3.0 * mc.std_error;
        t.add_row() = {std::string("nonneg_whole_interval"), exact, mc.estimate, mc.std_error,
                       diff, static_cast<std::int64_t>(ok ? 1 : 0)};
        if (!ok) failures.push_back("nonneg_whole_interval outside 3 SE + grid bias allowance");
    }
    {
        double r = cfg.get_f64("r"), gamma = cfg.get_f64("gamma"), y = cfg.get_f64("y_sub");
        double exact = br::bridge_subinterval_nonneg_prob(r, gamma, y);
        br::BridgeEventSpec spec;
        spec.t = gamma; spec.x = 0.0; spec.y = y; spec.r1 = r;
        auto mc = br::mc_bridge_event_prob(spec, n_paths, steps, bbm::derive_stream(key, 2));
        double diff = mc.estimate - exact;
        bool ok = diff >= -3.0 * mc.std_error && diff <= bias + 3.0 * mc.std_error;
        t.add_row() = {std::string("nonneg_subinterval"), exact, mc.estimate, mc.std_error,
                       diff, static_cast<std::int64_t>(ok ? 1 : 0)};
        if (!ok) failures.push_back("nonneg_subinterval outside 3 SE + grid bias allowance");
    }

    // dominance campaign: random two-point line bounds vs MC stay-below estimates
    Table dom;
    dom.columns = {"tuple", "Z1", "Z2", "r1", "r2", "t", "bound", "mc", "mc_se", "ok"};
    std::uint64_t tuples = cfg.get_u64("dominance_tuples");
    if (tuples > 0) {
        std::uint64_t dpaths = cfg.get_u64("dominance_paths");
        std::uint64_t dsteps = cfg.get_u64("dominance_steps");
        bbm::RngStream rng(bbm::derive_stream(key, 3));
        std::uint64_t made = 0, guard = 0;
        while (made < tuples && guard < tuples * 1000) {
            ++guard;
            double Z1 = 2.0 * rng.next_uniform();
            double Z2 = 2.0 * rng.next_uniform();
            double r1 = 0.2 + 0.8 * rng.next_uniform();
            double r2 = 0.2 + 0.8 * rng.next_uniform();
            double t_h = r1 + r2 + 2.0 + 8.0 * rng.next_uniform();
            double bound = br::bridge_two_point_line_bound(Z1, Z2, r1, r2, t_h);
            if (bound >= 1.0) continue;
            br::BridgeEventSpec spec;
            spec.t = t_h; spec.x = 0.0; spec.y = 0.0;
            spec.r1 = r1; spec.r2 = r2;
            spec.barrier = br::BarrierKind::affine_two_point;
            spec.direction = br::Direction::stay_above;
            spec.Z1 = Z1; spec.Z2 = Z2;
            auto mc = br::mc_bridge_event_prob(spec, dpaths, dsteps,
                                               bbm::derive_stream(key, 100 + made));
            bool ok = mc.estimate <= bound + 3.0 * mc.std_error;
            dom.add_row() = {static_cast<std::int64_t>(made), Z1, Z2, r1, r2, t_h, bound,
                             mc.estimate, mc.std_error, static_cast<std::int64_t>(ok ? 1 : 0)};
            if (!ok)
                failures.push_back("dominance tuple " + std::to_string(made) +
                                   ": mc estimate exceeds bound + 3 SE");
            ++made;
        }
        if (made < tuples)
            throw std::runtime_error("bridge-check: could not generate enough tuples with bound < 1");
    }
    return finish("bridge-check", cfg, start_ts,
                  {{"bridge.csv", t}, {"bridge_dominance.csv", dom}}, failures);
}

int cmd_moment_check(Config& cfg, const std::string& start_ts) {
    namespace br = bbm::bridge;
    std::uint64_t trials = cfg.get_u64("trials");
    double z_max = cfg.get_f64("z_max");
    bbm::RngStreamKey key = root_key(cfg);
    int threads = threads_of(cfg);
    std::string which = cfg.get_string("which");
    if (which != "one" && which != "two" && which != "both")
        throw ConfigError("key 'which': expected one|two|both, got '" + which + "'");

    Table t;
    t.columns = {"check", "lhs", "lhs_se", "rhs", "z", "trials", "ok"};
    std::vector<std::string> failures;
    auto add = [&](const std::string& name, const br::MomentCheck& c) {
        bool ok = std::abs(c.z) <= z_max;
        t.add_row() = {name, c.lhs, c.lhs_se, c.rhs, c.z,
                       static_cast<std::int64_t>(c.n_trials),
                       static_cast<std::int64_t>(ok ? 1 : 0)};
        if (!ok) failures.push_back(name + ": |z| = " + std::to_string(std::abs(c.z)) + " > " +
                                    std::to_string(z_max));
    };
    if (which != "two") {
        add("one_point_count_t1",
            br::many_to_one_check(br::Functional::constant(1.0), 1.0, trials,
                                  bbm::derive_stream(key, 1), threads));
        add("one_point_tail_t3",
            br::many_to_one_check(br::Functional::terminal_ge(3.0), 3.0, trials,
                                  bbm::derive_stream(key, 2), threads));
    }
    if (which != "one") {
        add("two_point_count_s1_t2",
            br::many_to_two_check(br::Functional::constant(1.0), br::Functional::constant(1.0),
                                  1.0, 2.0, 256, trials, bbm::derive_stream(key, 3), threads));
    }
    return finish("moment-check", cfg, start_ts, {{"moment.csv", t}}, failures);
}

int cmd_ergodic(Config& cfg, const std::string& start_ts) {
    bbm::lab::ErgodicParams p;
    p.T = cfg.get_f64("T");
    p.eps = cfg.get_f64("eps");
    p.L = cfg.get_f64("L");
    p.t0 = cfg.get_f64("t0");
    p.dt_sample = cfg.get_f64("dt_sample");
    p.n_seeds = static_cast<int>(cfg.get_u64("seeds"));
    p.sensitivity_L = cfg.get_f64("sensitivity_L");
    p.beta = cfg.get_f64("beta");
    p.fit_x_lo = cfg.get_f64("fit_x_lo");
    p.fit_x_hi = cfg.get_f64("fit_x_hi");
    p.hard_particle_limit = cfg.get_u64("particle_limit");

    auto res = bbm::lab::exp_ergodic(p, root_key(cfg), threads_of(cfg));

    std::vector<std::string> failures;
    double r2_min = cfg.get_f64("r2_min");
    for (const auto& seed : res.seeds)
        if (seed.r2 < r2_min)
            failures.push_back("seed " + std::to_string(seed.seed_index) + ": fit R^2 = " +
                               std::to_string(seed.r2) + " < " + std::to_string(r2_min));
    double corr_min = cfg.get_f64("corr_min");
    if (!(res.slope_z_correlation > corr_min))
        failures.push_back("slope/Z correlation " + std::to_string(res.slope_z_correlation) +
                           " not > " + std::to_string(corr_min));
    if (p.sensitivity_L > 0.0) {
        if (!res.sensitivity_ran)
            failures.push_back("sensitivity run did not complete: " + res.sensitivity_note);
        else if (!res.sensitivity_ok)
            failures.push_back("sensitivity shift exceeded 3 cross-seed SDs in some cell");
    }

    Table summary;
    summary.columns = {"slope_z_correlation", "sensitivity_ran", "sensitivity_ok",
                       "sensitivity_note"};
    summary.add_row() = {res.slope_z_correlation,
                         static_cast<std::int64_t>(res.sensitivity_ran ? 1 : 0),
                         static_cast<std::int64_t>(res.sensitivity_ok ? 1 : 0),
                         res.sensitivity_note};
    return finish("ergodic", cfg, start_ts,
                  {{"ergodic_curves.csv", res.curves},
                   {"ergodic_fits.csv", res.fits},
                   {"ergodic_sensitivity.csv", res.sensitivity},
                   {"ergodic_schedule.csv", res.schedule},
                   {"ergodic_summary.csv", summary}},
                  failures);
}

struct Subcommand {
    const char* name;
    std::vector<KeySpec> extra_keys;
    int (*fn)(Config&, const std::string&);
};

std::vector<Subcommand> subcommands() {
    using T = KeySpec::Type;
    auto pos = bbm::cli::require_positive;
    return {
        {"simulate",
         {{"T", T::f64, std::string("1"), pos},
          {"mode", T::string, std::string("event"), nullptr},
          {"dt", T::f64, std::string("0.01"), pos},
          {"sample_dt", T::f64, std::string("0"), nullptr},
          {"snapshot_times", T::string, std::string(""), nullptr},
          {"prune", T::string, std::string("none"), nullptr},
          {"A", T::f64, std::string("0"), nullptr},
          {"L", T::f64, std::string("0"), nullptr},
          {"N_max", T::u64, std::string("0"), nullptr},
          {"enable_after", T::f64, std::string("0"), nullptr},
          {"particle_limit", T::u64, std::string("20000000"), nullptr}},
         cmd_simulate},
        {"tail",
         {{"t", T::f64, std::string("10"), pos},
          {"trials", T::u64, std::string("20000"), nullptr},
          {"y_lo", T::f64, std::string("1"), nullptr},
          {"y_hi", T::f64, std::string("3.5"), nullptr},
          {"y_step", T::f64, std::string("0.25"), pos},
          {"slope_tol", T::f64, std::string("0.35"), pos}},
         cmd_tail},
        {"early-branching",
         {{"s", T::f64, std::string("6"), pos},
          {"t", T::f64, std::string("12"), pos},
          {"x", T::f64, std::string("-1"), nullptr},
          {"R_list", T::f64_list, std::string("1,2,4"), nullptr},
          {"trials", T::u64, std::string("10000"), nullptr}},
         cmd_early_branching},
        {"localization",
         {{"t", T::f64, std::string("10"), pos},
          {"x", T::f64, std::string("-1"), nullptr},
          {"alpha", T::f64, std::string("0.4"), bbm::cli::require_alpha_domain},
          {"r_list", T::f64_list, std::string("1,2,3"), nullptr},
          {"trials", T::u64, std::string("1000"), nullptr},
          {"dt", T::f64, std::string("0.01"), pos}},
         cmd_localization},
        {"decorrelate",
         {{"R", T::f64, std::string("2"), pos},
          {"s", T::f64, std::string("6"), pos},
          {"t", T::f64, std::string("10"), pos},
          {"x", T::f64, std::string("-1"), nullptr},
          {"y", T::f64, std::string("-1"), nullptr},
          {"outer", T::u64, std::string("200"), nullptr},
          {"inner", T::u64, std::string("500"), nullptr},
          {"max_violation_fraction", T::f64, std::string("0.01"), nullptr}},
         cmd_decorrelate},
        {"bkr-check",
         {{"instances", T::u64, std::string("1000"), nullptr},
          {"max_indices", T::u64, std::string("3"), nullptr},
          {"max_space", T::u64, std::string("4"), nullptr}},
         cmd_bkr_check},
        {"bridge-check",
         {{"t", T::f64, std::string("2"), pos},
          {"x", T::f64, std::string("1"), nullptr},
          {"y", T::f64, std::string("1"), nullptr},
          {"r", T::f64, std::string("1"), pos},
          {"gamma", T::f64, std::string("2"), pos},
          {"y_sub", T::f64, std::string("1"), nullptr},
          {"n_paths", T::u64, std::string("100000"), nullptr},
          {"grid_steps", T::u64, std::string("1000"), nullptr},
          {"bias_allowance", T::f64, std::string("0.025"), nullptr},
          {"dominance_tuples", T::u64, std::string("50"), nullptr},
          {"dominance_paths", T::u64, std::string("2000"), nullptr},
          {"dominance_steps", T::u64, std::string("200"), nullptr}},
         cmd_bridge_check},
        {"moment-check",
         {{"which", T::string, std::string("both"), nullptr},
          {"trials", T::u64, std::string("100000"), nullptr},
          {"z_max", T::f64, std::string("5"), pos}},
         cmd_moment_check},
        {"ergodic",
         {{"T", T::f64, std::string("50"), pos},
          {"eps", T::f64, std::string("0.1"), nullptr},
          {"L", T::f64, std::string("8"), pos},
          {"t0", T::f64, std::string("5"), pos},
          {"dt_sample", T::f64, std::string("0.1"), pos},
          {"seeds", T::u64, std::string("8"), nullptr},
          {"sensitivity_L", T::f64, std::string("16"), nullptr},
          {"beta", T::f64, std::string("0.9"), pos},
          {"fit_x_lo", T::f64, std::string("-1"), nullptr},
          {"fit_x_hi", T::f64, std::string("1"), nullptr},
          {"r2_min", T::f64, std::string("0.9"), nullptr},
          {"corr_min", T::f64, std::string("0.3"), nullptr},
          {"particle_limit", T::u64, std::string("20000000"), nullptr}},
         cmd_ergodic},
    };
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << kUsage;
        return 2;
    }
    std::string sub = argv[1];
    if (sub == "--help" || sub == "-h" || sub == "help") {
        std::cout << kUsage;
        return 0;
    }
    auto subs = subcommands();
    const Subcommand* chosen = nullptr;
    for (const auto& s : subs)
        if (sub == s.name) { chosen = &s; break; }
    if (!chosen) {
        std::cerr << "unknown subcommand '" << sub << "'\n" << kUsage;
        return 2;
    }

    std::vector<KeySpec> schema = common_schema();
    for (const auto& k : chosen->extra_keys) schema.push_back(k);
    Config cfg(std::move(schema));
    std::vector<std::string> args(argv + 2, argv + argc);

    std::string start_ts = now_utc();
    try {
        // config file first (if any), then flags override
        for (std::size_t i = 0; i + 1 < args.size(); ++i)
            if (args[i] == "--config") {
                cfg.load_file(args[i + 1]);
                break;
            }
        cfg.apply_flags(args);
        cfg.finalize();
        for (const auto& w : cfg.warnings) std::cerr << w << "\n";
        return chosen->fn(cfg, start_ts);
    } catch (const bbm::ParticleLimitError& e) {
        std::cerr << sub << ": resource guard: " << e.what() << "\n";
        return 4;
    } catch (const ConfigError& e) {
        std::cerr << sub << ": config error: " << e.what() << "\n" << kUsage;
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << sub << ": config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << sub << ": error: " << e.what() << "\n";
        return 1;
    }
}
