#include "bbm/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bbm/analytic.hpp"
#include "bbm/engine.hpp"
#include "bbm/parallel.hpp"

namespace bbm::bridge {

double bridge_nonneg_prob(double t, double x, double y) {
    if (!(t > 0.0)) throw std::invalid_argument("bridge_nonneg_prob: t must be > 0");
    if (!(x >= 0.0 && y >= 0.0))
        throw std::invalid_argument("bridge_nonneg_prob: endpoints must be >= 0");
    return 1.0 - std::exp(-2.0 * x * y / t);
}

double bridge_two_point_line_bound(double Z1, double Z2, double r1, double r2, double t) {
    if (!(Z1 >= 0.0 && Z2 >= 0.0))
        throw std::invalid_argument("bridge_two_point_line_bound: Z1, Z2 must be >= 0");
    if (!(r1 >= 0.0 && r2 >= 0.0 && t > r1 + r2))
        throw std::invalid_argument("bridge_two_point_line_bound: need r1, r2 >= 0 and t > r1 + r2");
    double zr1 = (1.0 - r1 / t) * Z1 + (r1 / t) * Z2;
    double zr2 = (r2 / t) * Z1 + (1.0 - r2 / t) * Z2;
    return 2.0 / (t - r1 - r2) * (zr1 + std::sqrt(r1)) * (zr2 + std::sqrt(r2));
}

double bridge_subinterval_nonneg_prob(double r, double gamma, double y) {
    if (!(r > 0.0 && r < gamma))
        throw std::invalid_argument("bridge_subinterval_nonneg_prob: need 0 < r < gamma");
    if (!(y > 0.0)) throw std::invalid_argument("bridge_subinterval_nonneg_prob: need y > 0");
    double mean = (r / gamma) * y;
    double sd = std::sqrt(r * (gamma - r) / gamma);
    return 1.0 - 2.0 * normal_cdf(-mean / sd);
}

void validate(const BridgeEventSpec& spec) {
    if (!(spec.t > 0.0)) throw std::invalid_argument("BridgeEventSpec: t must be > 0");
    if (!(spec.r1 >= 0.0 && spec.r2 >= 0.0 && spec.r1 + spec.r2 < spec.t))
        throw std::invalid_argument("BridgeEventSpec: need r1, r2 >= 0 and r1 + r2 < t");
    if (spec.barrier == BarrierKind::envelope_curve && !(spec.alpha > 0.0 && spec.alpha <= 0.5))
        throw std::invalid_argument("BridgeEventSpec: alpha must lie in (0, 1/2]");
}

namespace {

double barrier_value(const BridgeEventSpec& spec, double s) {
    switch (spec.barrier) {
    case BarrierKind::zero_line: return 0.0;
    case BarrierKind::affine_two_point:
        return (1.0 - s / spec.t) * spec.Z1 + (s / spec.t) * spec.Z2;
    case BarrierKind::envelope_curve:
        return -std::pow(std::min(s, spec.t - s), spec.alpha);
    }
    throw std::logic_error("BridgeEventSpec: unknown barrier kind");
}

bool satisfies(const BridgeEventSpec& spec, double s, double value) {
    double b = barrier_value(spec, s);
    return spec.direction == Direction::stay_above ? value >= b : value <= b;
}

} // namespace

McEstimate mc_bridge_event_prob(const BridgeEventSpec& spec, std::uint64_t n_paths,
                                std::uint64_t grid_steps, RngStreamKey stream) {
    validate(spec);
    if (n_paths < 100) throw std::invalid_argument("mc_bridge_event_prob: n_paths must be >= 100");
    if (grid_steps < 10) throw std::invalid_argument("mc_bridge_event_prob: grid_steps must be >= 10");

    const double h = spec.t / static_cast<double>(grid_steps);
    const double lo = spec.r1, hi = spec.t - spec.r2;
    std::uint64_t hits = 0;
    for (std::uint64_t p = 0; p < n_paths; ++p) {
        RngStream rng(derive_stream(stream, p));
        double cur = spec.x;
        double cur_t = 0.0;
        bool ok = !(lo <= 0.0) || satisfies(spec, 0.0, cur);
        for (std::uint64_t k = 1; ok && k <= grid_steps; ++k) {
            double sk = (k == grid_steps) ? spec.t : h * static_cast<double>(k);
            double remain = spec.t - cur_t;
            double step = sk - cur_t;
            double mean = cur + step / remain * (spec.y - cur);
            double var = step * (spec.t - sk) / remain;
            cur = var > 0.0 ? mean + std::sqrt(var) * rng.next_gaussian() : mean;
            cur_t = sk;
            if (sk >= lo - 1e-12 && sk <= hi + 1e-12) ok = satisfies(spec, sk, cur);
        }
        if (ok) ++hits;
    }
    double p_hat = static_cast<double>(hits) / static_cast<double>(n_paths);
    double se = std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n_paths));
    return {p_hat, se, n_paths, grid_steps};
}

namespace {

double eval_sum(const Functional& f, const PopulationSnapshot& snap) {
    if (f.kind == Functional::Kind::constant)
        return f.value * static_cast<double>(snap.entries.size());
    double count = 0.0;
    for (const auto& [id, pos] : snap.entries)
        if (pos >= f.value) count += 1.0;
    return count;
}

double marginal_expectation(const Functional& f, double var) {
    if (f.kind == Functional::Kind::constant) return f.value;
    if (var <= 0.0) return f.value <= 0.0 ? 1.0 : 0.0;
    return normal_cdf(-f.value / std::sqrt(var));
}

struct MeanSe {
    double mean, se;
};

MeanSe mean_and_se(const std::vector<double>& xs) {
    double n = static_cast<double>(xs.size());
    double sum = 0.0;
    for (double x : xs) sum += x;
    double mean = sum / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    double var = ss / (n - 1.0);
    return {mean, std::sqrt(var / n)};
}

} // namespace

double gaussian_pair_expectation(const Functional& f, const Functional& g, double var_x,
                                 double var_y, double cov) {
    if (f.kind == Functional::Kind::constant)
        return f.value * marginal_expectation(g, var_y);
    if (g.kind == Functional::Kind::constant)
        return g.value * marginal_expectation(f, var_x);
    if (cov < 0.0) throw std::invalid_argument("gaussian_pair_expectation: cov must be >= 0");
    if (cov == 0.0) return marginal_expectation(f, var_x) * marginal_expectation(g, var_y);
    if (cov > var_x + 1e-12 || cov > var_y + 1e-12)
        throw std::invalid_argument("gaussian_pair_expectation: cov exceeds a variance");

    // condition on the shared component W ~ N(0, cov):
    // X = W + N(0, var_x - cov), Y = W + N(0, var_y - cov)
    const double a = f.value, b = g.value;
    const double s1 = std::sqrt(std::max(var_x - cov, 0.0));
    const double s2 = std::sqrt(std::max(var_y - cov, 0.0));
    const double sw = std::sqrt(cov);
    // degenerate components make the integrand a step function; integrate the
    // smooth part over the half-line past the step instead
    if (s1 == 0.0 && s2 == 0.0) return normal_cdf(-std::max(a, b) / sw);
    auto integrand = [&](double w) {
        double pa = s1 > 0.0 ? normal_cdf((w - a) / s1) : 1.0;
        double pb = s2 > 0.0 ? normal_cdf((w - b) / s2) : 1.0;
        return gaussian_density(cov, w) * pa * pb;
    };
    double w_lo = -10.0 * sw, w_hi = 10.0 * sw;
    if (s1 == 0.0) w_lo = std::max(w_lo, a);
    if (s2 == 0.0) w_lo = std::max(w_lo, b);
    if (w_lo >= w_hi) return 0.0;
    // composite Simpson over +-10 standard deviations of W
    const int n = 20000; // even
    const double hw = (w_hi - w_lo) / n;
    double acc = integrand(w_lo) + integrand(w_hi);
    for (int i = 1; i < n; ++i)
        acc += integrand(w_lo + hw * i) * ((i % 2) ? 4.0 : 2.0);
    return acc * hw / 3.0;
}

MomentCheck many_to_one_check(const Functional& f, double t, std::uint64_t n_trials,
                              RngStreamKey stream, int threads, bool override_time_guard) {
    if (!(t > 0.0)) throw std::invalid_argument("many_to_one_check: t must be > 0");
    if (t > 4.0 && !override_time_guard)
        throw std::invalid_argument("many_to_one_check: t > 4 rejected (population cost guard)");
    if (n_trials < 2) throw std::invalid_argument("many_to_one_check: need at least 2 trials");

    std::vector<double> vals(n_trials);
    parallel_for(n_trials, threads, [&](std::uint64_t i) {
        RunConfig cfg;
        cfg.T = t;
        cfg.snapshot_times = {t};
        cfg.record_genealogy = false;
        cfg.root_stream = derive_stream(stream, stream_tag::kTrialBase + i);
        RunResult res = run(cfg);
        vals[i] = eval_sum(f, res.snapshots[0]);
    });
    auto [mean, se] = mean_and_se(vals);
    double rhs = std::exp(t) * marginal_expectation(f, t);
    double z = se > 0.0 ? (mean - rhs) / se : (mean == rhs ? 0.0 : INFINITY);
    return {mean, se, rhs, z, n_trials};
}

MomentCheck many_to_two_check(const Functional& f, const Functional& g, double s, double t,
                              std::uint64_t quadrature_nodes, std::uint64_t n_trials,
                              RngStreamKey stream, int threads, bool override_time_guard) {
    if (!(s >= 0.0 && s <= t)) throw std::invalid_argument("many_to_two_check: need 0 <= s <= t");
    if (t > 3.0 && !override_time_guard)
        throw std::invalid_argument("many_to_two_check: t > 3 rejected (population cost guard)");
    if (quadrature_nodes < 64)
        throw std::invalid_argument("many_to_two_check: quadrature_nodes must be >= 64");
    if (n_trials < 2) throw std::invalid_argument("many_to_two_check: need at least 2 trials");

    std::vector<double> vals(n_trials);
    parallel_for(n_trials, threads, [&](std::uint64_t i) {
        RunConfig cfg;
        cfg.T = t;
        cfg.snapshot_times = s > 0.0 && s < t ? std::vector<double>{s, t} : std::vector<double>{t};
        cfg.record_genealogy = false;
        cfg.root_stream = derive_stream(stream, stream_tag::kTrialBase + i);
        RunResult res = run(cfg);
        const PopulationSnapshot& at_t = res.snapshots.back();
        double g_sum;
        if (s == 0.0) {
            PopulationSnapshot origin;
            origin.entries.emplace_back(0, 0.0);
            g_sum = eval_sum(g, origin);
        } else {
            g_sum = eval_sum(g, res.snapshots.front());
        }
        vals[i] = eval_sum(f, at_t) * g_sum;
    });
    auto [mean, se] = mean_and_se(vals);

    // common-path term: (B_t, B_s) on the same Brownian path, cov = s
    double rhs = std::exp(t) * gaussian_pair_expectation(f, g, t, s, s);
    // branching term: composite midpoint over gamma in (0, s)
    if (s > 0.0) {
        const double w = s / static_cast<double>(quadrature_nodes);
        double acc = 0.0;
        for (std::uint64_t j = 0; j < quadrature_nodes; ++j) {
            double gamma = (static_cast<double>(j) + 0.5) * w;
            acc += 2.0 * std::exp(t + s - gamma) * gaussian_pair_expectation(f, g, t, s, gamma);
        }
        rhs += acc * w;
    }
    double z = se > 0.0 ? (mean - rhs) / se : (mean == rhs ? 0.0 : INFINITY);
    return {mean, se, rhs, z, n_trials};
}

} // namespace bbm::bridge
