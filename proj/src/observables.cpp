#include "bbm/observables.hpp"

#include <algorithm>
#include <cmath>

#include "bbm/analytic.hpp"

namespace bbm {

MaxOffset max_offset(const PopulationSnapshot& snapshot) {
    if (snapshot.entries.empty())
        throw std::invalid_argument(
            "max_offset: empty snapshot (all particles pruned; pruning too aggressive)");
    if (!(snapshot.time > 0.0))
        throw std::invalid_argument("max_offset: snapshot time must be > 0");
    std::size_t argmax = 0;
    for (std::size_t i = 1; i < snapshot.entries.size(); ++i)
        if (snapshot.entries[i].second > snapshot.entries[argmax].second) argmax = i;
    return {snapshot.entries[argmax].second - centering(snapshot.time),
            snapshot.entries[argmax].first};
}

std::vector<NodeId> extremal_set(const PopulationSnapshot& snapshot, double x) {
    if (!(snapshot.time > 0.0))
        throw std::invalid_argument("extremal_set: snapshot time must be > 0");
    double cut = centering(snapshot.time) + x;
    std::vector<NodeId> ids;
    for (const auto& [id, pos] : snapshot.entries)
        if (pos >= cut) ids.push_back(id);
    return ids;
}

double derivative_martingale(const PopulationSnapshot& snapshot) {
    if (!(snapshot.time >= 0.0))
        throw std::invalid_argument("derivative_martingale: snapshot time must be >= 0");
    const double vt = kSqrt2 * snapshot.time;
    double sum = 0.0, comp = 0.0; // Kahan
    for (const auto& [id, pos] : snapshot.entries) {
        double term = (vt - pos) * std::exp(kSqrt2 * (pos - vt));
        double y = term - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

ErgodicAccumulator::ErgodicAccumulator(std::vector<double> x_grid, double t_start)
    : x_grid_(std::move(x_grid)), mass_(x_grid_.size(), 0.0), t_start_(t_start) {
    if (!std::is_sorted(x_grid_.begin(), x_grid_.end()))
        throw std::invalid_argument("ErgodicAccumulator: x_grid must be sorted");
}

void ErgodicAccumulator::accumulate(double offset, double dt_weight) {
    if (!(dt_weight > 0.0))
        throw std::invalid_argument("ErgodicAccumulator: dt_weight must be > 0");
    elapsed_ += dt_weight;
    // mass is nondecreasing in x: offset <= x for all x past the first hit
    auto it = std::lower_bound(x_grid_.begin(), x_grid_.end(), offset);
    for (std::size_t i = static_cast<std::size_t>(it - x_grid_.begin()); i < mass_.size(); ++i)
        mass_[i] += dt_weight;
}

void ErgodicAccumulator::merge(const ErgodicAccumulator& other) {
    if (other.x_grid_ != x_grid_ || other.t_start_ != t_start_)
        throw std::invalid_argument("ErgodicAccumulator: merge requires identical grids");
    for (std::size_t i = 0; i < mass_.size(); ++i) mass_[i] += other.mass_[i];
    elapsed_ += other.elapsed_;
}

std::vector<double> ErgodicAccumulator::result() const {
    if (!(elapsed_ > 0.0))
        throw std::logic_error("ErgodicAccumulator: no time accumulated");
    std::vector<double> f(mass_.size());
    for (std::size_t i = 0; i < mass_.size(); ++i) f[i] = mass_[i] / elapsed_;
    return f;
}

std::vector<double> ErgodicAccumulator::to_state() const {
    std::vector<double> s;
    s.push_back(static_cast<double>(x_grid_.size()));
    s.push_back(elapsed_);
    s.push_back(t_start_);
    s.insert(s.end(), x_grid_.begin(), x_grid_.end());
    s.insert(s.end(), mass_.begin(), mass_.end());
    return s;
}

ErgodicAccumulator ErgodicAccumulator::from_state(const std::vector<double>& state) {
    if (state.size() < 3) throw std::invalid_argument("ErgodicAccumulator: bad state");
    std::size_t n = static_cast<std::size_t>(state[0]);
    if (state.size() != 3 + 2 * n) throw std::invalid_argument("ErgodicAccumulator: bad state");
    ErgodicAccumulator acc;
    acc.elapsed_ = state[1];
    acc.t_start_ = state[2];
    acc.x_grid_.assign(state.begin() + 3, state.begin() + 3 + n);
    acc.mass_.assign(state.begin() + 3 + n, state.end());
    return acc;
}

LocalizationSummary localization_check(std::span<const double> path, double grid_t0,
                                       double grid_dt, double t, double r, double alpha) {
    if (!(r >= 0.0 && r <= t / 2.0))
        throw std::invalid_argument("localization_check: need 0 <= r <= t/2");
    if (path.empty() || !(grid_dt > 0.0))
        throw std::invalid_argument("localization_check: empty path or bad grid step");
    double grid_t1 = grid_t0 + grid_dt * static_cast<double>(path.size() - 1);
    if (grid_t0 > r + 1e-9 || grid_t1 < t - r - 1e-9)
        throw std::invalid_argument("localization_check: grid does not cover [r, t-r]");

    const double mt = centering(t);
    LocalizationSummary out;
    for (std::size_t k = 0; k < path.size(); ++k) {
        double s = grid_t0 + grid_dt * static_cast<double>(k);
        if (s < r - 1e-12 || s > t - r + 1e-12) continue;
        double s_clamped = std::min(std::max(s, 0.0), t);
        double line = (s_clamped / t) * mt - envelope(t, alpha, s_clamped);
        double excess = path[k] - line;
        if (excess > out.max_excess) out.max_excess = excess;
        if (excess > 0.0 && !out.violated) {
            out.violated = true;
            out.first_violation_time = s;
        }
    }
    if (!out.violated) out.max_excess = 0.0;
    return out;
}

std::vector<double> lineage_path(const Genealogy& g, const GridPaths& paths, NodeId u,
                                 std::uint32_t k_last) {
    std::vector<double> out(k_last + 1);
    NodeId id = u;
    std::uint32_t k = k_last;
    while (true) {
        const GenealogyNode& n = g.at(id);
        std::uint32_t first = paths.first_index[id];
        const auto& pos = paths.positions[id];
        while (k >= first && k < first + pos.size()) {
            out[k] = pos[k - first];
            if (k == 0) return out;
            --k;
        }
        if (n.parent == kNoNode) {
            if (k == 0) {
                out[0] = n.birth_position;
                return out;
            }
            throw std::out_of_range("lineage_path: grid index not covered by lineage");
        }
        id = n.parent;
    }
}

std::optional<double> extremal_pair_split_scan(const Genealogy& g,
                                               const PopulationSnapshot& snapshot_s,
                                               const PopulationSnapshot& snapshot_t,
                                               double x) {
    if (!(snapshot_s.time > 0.0 && snapshot_s.time < snapshot_t.time))
        throw std::invalid_argument("extremal_pair_split_scan: need 0 < s < t");
    for (const auto& [id, pos] : snapshot_s.entries)
        if (id >= g.size())
            throw std::invalid_argument("extremal_pair_split_scan: snapshot does not match genealogy");
    for (const auto& [id, pos] : snapshot_t.entries)
        if (id >= g.size())
            throw std::invalid_argument("extremal_pair_split_scan: snapshot does not match genealogy");

    std::vector<NodeId> a = extremal_set(snapshot_s, x);
    std::vector<NodeId> b = extremal_set(snapshot_t, x);
    if (a.empty() || b.empty()) return std::nullopt;

    const double s = snapshot_s.time;
    std::vector<char> in_a(g.size(), 0), mark_a(g.size(), 0), mark_b(g.size(), 0);
    for (NodeId id : a) { in_a[id] = 1; mark_a[id] = 1; }
    for (NodeId id : b) mark_b[id] = 1;

    // children have larger ids than parents, so one descending sweep
    // propagates descendant marks upward
    double best = -1.0;
    bool found = false;
    for (NodeId id = static_cast<NodeId>(g.size()); id-- > 0;) {
        const GenealogyNode& n = g.at(id);
        if (in_a[id] && mark_b[id]) {
            // a time-s extremal particle is an ancestor (or the same node)
            // of a time-t one: paths coincide on all of [0, s]
            best = std::max(best, s);
            found = true;
        }
        if (n.end_kind == EndKind::branched) {
            if ((mark_a[n.child0] && mark_b[n.child1]) || (mark_a[n.child1] && mark_b[n.child0])) {
                best = std::max(best, n.end_time);
                found = true;
            }
        }
        if (n.parent != kNoNode) {
            mark_a[n.parent] |= mark_a[id];
            mark_b[n.parent] |= mark_b[id];
        }
    }
    if (!found) return std::nullopt;
    return std::min(best, s);
}

} // namespace bbm
