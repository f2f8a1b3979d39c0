#include "bbm/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bbm/analytic.hpp"

namespace bbm {

namespace {

bool near_multiple(double t, double step) {
    double k = std::round(t / step);
    return std::abs(t - k * step) <= 1e-9 * std::max(1.0, std::abs(t));
}

} // namespace

ParticleLimitError::ParticleLimitError(std::uint64_t limit_, double time_reached_)
    : std::runtime_error("hard_particle_limit of " + std::to_string(limit_) +
                         " particles exceeded at simulation time " + std::to_string(time_reached_)),
      limit(limit_), time_reached(time_reached_) {}

CheckpointError::CheckpointError(Kind kind_, const std::string& what_)
    : std::runtime_error(what_), kind(kind_) {}

void validate(const PruneConfig& cfg) {
    switch (cfg.mode) {
    case PruneMode::none: return;
    case PruneMode::line_barrier:
        if (!(cfg.A > 0.0)) throw std::invalid_argument("PruneConfig: line_barrier requires A > 0");
        return;
    case PruneMode::gap_to_max:
        if (!(cfg.L > 0.0)) throw std::invalid_argument("PruneConfig: gap_to_max requires L > 0");
        return;
    case PruneMode::cap_count:
        if (cfg.N_max < 1) throw std::invalid_argument("PruneConfig: cap_count requires N_max >= 1");
        return;
    }
    throw std::invalid_argument("PruneConfig: unknown mode");
}

void validate(const RunConfig& cfg) {
    if (!(cfg.T > 0.0)) throw std::invalid_argument("RunConfig: T must be > 0");
    if (cfg.mode == RunMode::grid && !(cfg.dt > 0.0 && cfg.dt <= 0.1))
        throw std::invalid_argument("RunConfig: grid mode requires 0 < dt <= 0.1");
    if (cfg.mode == RunMode::event && cfg.prune.mode != PruneMode::none && !(cfg.sample_dt > 0.0))
        throw std::invalid_argument("RunConfig: pruning in event mode requires sample_dt > 0");
    if (cfg.hard_particle_limit < 1)
        throw std::invalid_argument("RunConfig: hard_particle_limit must be >= 1");
    double prev = -1.0;
    for (double s : cfg.snapshot_times) {
        if (!(s >= 0.0 && s <= cfg.T))
            throw std::invalid_argument("RunConfig: snapshot times must lie in [0, T]");
        if (s <= prev) throw std::invalid_argument("RunConfig: snapshot times must be strictly increasing");
        prev = s;
    }
    validate(cfg.prune);
}

PruneResult apply_pruning(const PopulationSnapshot& snapshot, const PruneConfig& cfg) {
    validate(cfg);
    PruneResult res;
    if (cfg.mode == PruneMode::none || snapshot.entries.empty()) {
        res.survivors = snapshot.entries;
        return res;
    }
    // current maximum (first by id among ties) is never killed
    std::size_t argmax = 0;
    for (std::size_t i = 1; i < snapshot.entries.size(); ++i)
        if (snapshot.entries[i].second > snapshot.entries[argmax].second) argmax = i;

    if (cfg.mode == PruneMode::cap_count) {
        if (snapshot.entries.size() <= cfg.N_max) {
            res.survivors = snapshot.entries;
            return res;
        }
        // threshold = N_max-th highest position; ties resolved by id order
        std::vector<std::size_t> order(snapshot.entries.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return snapshot.entries[a].second > snapshot.entries[b].second;
        });
        std::vector<char> keep(order.size(), 0);
        for (std::uint64_t i = 0; i < cfg.N_max; ++i) keep[order[i]] = 1;
        for (std::size_t i = 0; i < snapshot.entries.size(); ++i) {
            if (keep[i]) res.survivors.push_back(snapshot.entries[i]);
            else res.killed.push_back(snapshot.entries[i].first);
        }
        return res;
    }

    double cut;
    if (cfg.mode == PruneMode::line_barrier) {
        cut = kSqrt2 * snapshot.time - cfg.A;
    } else { // gap_to_max
        cut = snapshot.entries[argmax].second - cfg.L;
    }
    for (std::size_t i = 0; i < snapshot.entries.size(); ++i) {
        if (i == argmax || snapshot.entries[i].second >= cut)
            res.survivors.push_back(snapshot.entries[i]);
        else
            res.killed.push_back(snapshot.entries[i].first);
    }
    return res;
}

double GridPaths::at(const Genealogy& g, NodeId id, std::uint32_t k) const {
    const GenealogyNode* n = &g.at(id);
    while (true) {
        std::uint32_t first = first_index[id];
        const auto& pos = positions[id];
        if (k >= first && k < first + pos.size()) return pos[k - first];
        if (n->parent == kNoNode) {
            if (k == 0) return n->birth_position;
            throw std::out_of_range("GridPaths: grid index not covered by lineage");
        }
        id = n->parent;
        n = &g.at(id);
    }
}

// ---------------------------------------------------------------------------
// DFS event-mode driver (no pruning): cost proportional to the node count.

namespace {

struct DfsTask {
    double birth_t;
    double birth_x;
    RngStreamKey key;
    NodeId id;
    std::uint32_t snap_idx; // first requested snapshot time > birth_t
};

RunResult run_event_dfs(const RunConfig& cfg, const RunHooks& hooks) {
    RunResult out;
    const auto& snaps = cfg.snapshot_times;
    out.snapshots.resize(snaps.size());
    for (std::size_t i = 0; i < snaps.size(); ++i) out.snapshots[i].time = snaps[i];

    const bool rec = cfg.record_genealogy;
    if (rec) out.genealogy.add_root(cfg.root_stream);
    std::uint64_t next_id = 1;
    out.stats.nodes_created = 1;

    std::vector<DfsTask> stack;
    std::uint32_t snap0 = 0;
    if (!snaps.empty() && snaps[0] == 0.0) {
        out.snapshots[0].entries.emplace_back(0, 0.0);
        snap0 = 1;
    }
    stack.push_back({0.0, 0.0, cfg.root_stream, 0, snap0});

    while (!stack.empty()) {
        DfsTask task = stack.back();
        stack.pop_back();

        RngStream stream(task.key);
        double life = stream.next_exponential();
        double end = task.birth_t + life;
        bool branched = end < cfg.T;
        if (!branched) end = cfg.T;

        double cur_t = task.birth_t;
        double x = task.birth_x;
        std::uint32_t si = task.snap_idx;
        while (si < snaps.size() && snaps[si] <= end) {
            x += std::sqrt(snaps[si] - cur_t) * stream.next_gaussian();
            cur_t = snaps[si];
            out.snapshots[si].entries.emplace_back(static_cast<NodeId>(task.id), x);
            ++si;
        }
        if (end > cur_t) x += std::sqrt(end - cur_t) * stream.next_gaussian();

        if (branched) {
            ++out.stats.branch_events;
            if (out.stats.nodes_created + 2 > cfg.hard_particle_limit)
                throw ParticleLimitError(cfg.hard_particle_limit, end);
            out.stats.nodes_created += 2;
            NodeId c0, c1;
            if (rec) {
                out.genealogy.close(task.id, end, x, EndKind::branched);
                c0 = out.genealogy.add_child(task.id, 0);
                c1 = out.genealogy.add_child(task.id, 1);
            } else {
                c0 = static_cast<NodeId>(next_id);
                c1 = static_cast<NodeId>(next_id + 1);
            }
            next_id += 2;
            stack.push_back({end, x, derive_stream(task.key, 1), c1, si});
            stack.push_back({end, x, derive_stream(task.key, 0), c0, si});
        } else {
            if (rec) out.genealogy.close(task.id, end, x, EndKind::reached_horizon);
            ++out.stats.final_alive;
        }
    }
    out.stats.max_alive = out.stats.final_alive;

    for (auto& s : out.snapshots) {
        std::sort(s.entries.begin(), s.entries.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        if (hooks.on_snapshot) hooks.on_snapshot(s);
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Synchronous driver

struct SyncEngine::Impl {
    RunConfig cfg;
    double step = 0.0;
    std::uint64_t step_index = 0;
    std::uint64_t n_steps = 0;

    struct Particle {
        NodeId id;
        double pos;
        double next_branch;
        RngStreamKey key;
        std::uint64_t ctr;
    };

    Genealogy genealogy;
    GridPaths paths;
    std::vector<Particle> active;
    std::uint64_t next_id = 1;
    std::uint32_t snap_idx = 0;
    bool boundary0_done = false;
    std::vector<PopulationSnapshot> collected;
    RunStats stats;

    bool grid() const { return cfg.mode == RunMode::grid; }

    void init() {
        validate(cfg);
        step = grid() ? cfg.dt : cfg.sample_dt;
        if (!(step > 0.0))
            throw std::invalid_argument("SyncEngine: requires dt (grid) or sample_dt (event) > 0");
        if (!near_multiple(cfg.T, step))
            throw std::invalid_argument("SyncEngine: T must be a multiple of the sample step");
        n_steps = static_cast<std::uint64_t>(std::llround(cfg.T / step));
        for (double s : cfg.snapshot_times)
            if (!near_multiple(s, step))
                throw std::invalid_argument("SyncEngine: snapshot times must lie on the sample grid");

        if (cfg.record_genealogy) genealogy.add_root(cfg.root_stream);
        RngStream s(cfg.root_stream);
        double life = s.next_exponential();
        active.push_back({0, 0.0, life, cfg.root_stream, s.counter()});
        stats.nodes_created = 1;
        stats.max_alive = 1;
        if (grid()) {
            paths.dt = cfg.dt;
            ensure_path_slot(0);
            paths.positions[0].push_back(0.0);
        }
    }

    void ensure_path_slot(NodeId id) {
        if (paths.first_index.size() <= id) {
            paths.first_index.resize(id + 1, 0);
            paths.positions.resize(id + 1);
        }
    }

    double time() const { return static_cast<double>(step_index) * step; }

    // advance one particle from t0 to t1, branching as needed; results appended
    void advance_particle(Particle p, double t0, double t1, std::vector<Particle>& out) {
        RngStream stream(p.key);
        stream.set_counter(p.ctr);
        double cur_t = t0;
        while (p.next_branch <= t1) {
            double tb = p.next_branch;
            if (tb > cur_t) p.pos += std::sqrt(tb - cur_t) * stream.next_gaussian();
            ++stats.branch_events;
            if (stats.nodes_created + 2 > cfg.hard_particle_limit)
                throw ParticleLimitError(cfg.hard_particle_limit, tb);
            stats.nodes_created += 2;
            NodeId c0, c1;
            if (cfg.record_genealogy) {
                genealogy.close(p.id, tb, p.pos, EndKind::branched);
                c0 = genealogy.add_child(p.id, 0);
                c1 = genealogy.add_child(p.id, 1);
            } else {
                c0 = static_cast<NodeId>(next_id);
                c1 = static_cast<NodeId>(next_id + 1);
            }
            next_id += 2;
            RngStreamKey k0 = derive_stream(p.key, 0);
            RngStreamKey k1 = derive_stream(p.key, 1);
            RngStream s1(k1);
            double life1 = s1.next_exponential();
            advance_particle({c1, p.pos, tb + life1, k1, s1.counter()}, tb, t1, out);
            // continue as child 0 (keeps recursion depth at one per branch)
            RngStream s0(k0);
            p = {c0, p.pos, tb + s0.next_exponential(), k0, s0.counter()};
            stream = RngStream(k0);
            stream.set_counter(p.ctr);
            cur_t = tb;
        }
        if (t1 > cur_t) p.pos += std::sqrt(t1 - cur_t) * stream.next_gaussian();
        p.ctr = stream.counter();
        out.push_back(p);
    }

    PopulationSnapshot make_snapshot(double t) const {
        PopulationSnapshot s;
        s.time = t;
        s.entries.reserve(active.size());
        for (const auto& p : active) s.entries.emplace_back(p.id, p.pos);
        std::sort(s.entries.begin(), s.entries.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        return s;
    }

    void handle_boundary(double t, const RunHooks& hooks) {
        if (cfg.prune.mode != PruneMode::none && t > cfg.prune.enable_after && active.size() > 1) {
            PruneResult pr = apply_pruning(make_snapshot(t), cfg.prune);
            if (!pr.killed.empty()) {
                std::vector<char> dead(next_id, 0);
                for (NodeId id : pr.killed) dead[id] = 1;
                std::vector<Particle> kept;
                kept.reserve(active.size() - pr.killed.size());
                for (auto& p : active) {
                    if (dead[p.id]) {
                        if (cfg.record_genealogy)
                            genealogy.close(p.id, t, p.pos, EndKind::killed_by_pruning);
                        ++stats.pruned_kills;
                    } else {
                        kept.push_back(p);
                    }
                }
                active.swap(kept);
            }
        }
        stats.max_alive = std::max<std::uint64_t>(stats.max_alive, active.size());
        if (grid() && t > 0.0) {
            std::uint32_t k = static_cast<std::uint32_t>(step_index);
            for (const auto& p : active) {
                ensure_path_slot(p.id);
                if (paths.positions[p.id].empty()) paths.first_index[p.id] = k;
                paths.positions[p.id].push_back(p.pos);
            }
        }
        PopulationSnapshot snap;
        bool built = false;
        auto ensure = [&]() { if (!built) { snap = make_snapshot(t); built = true; } };
        if (hooks.on_sample) { ensure(); hooks.on_sample(snap); }
        while (snap_idx < cfg.snapshot_times.size() &&
               cfg.snapshot_times[snap_idx] <= t + 0.5 * step) {
            ensure();
            snap.time = cfg.snapshot_times[snap_idx];
            collected.push_back(snap);
            if (hooks.on_snapshot) hooks.on_snapshot(collected.back());
            ++snap_idx;
        }
    }

    void advance_to(double t_target, const RunHooks& hooks) {
        if (!near_multiple(t_target, step) || t_target > cfg.T + 1e-9)
            throw std::invalid_argument("SyncEngine: target must be a sample-grid time within [0, T]");
        std::uint64_t k_target = static_cast<std::uint64_t>(std::llround(t_target / step));
        if (!boundary0_done) {
            // the time-0 boundary (initial sample/snapshot) fires with the
            // caller's hooks, not inside the constructor
            handle_boundary(0.0, hooks);
            boundary0_done = true;
        }
        std::vector<Particle> next;
        while (step_index < k_target) {
            double t0 = time();
            double t1 = static_cast<double>(step_index + 1) * step;
            next.clear();
            next.reserve(active.size() + active.size() / 8 + 4);
            for (const auto& p : active) advance_particle(p, t0, t1, next);
            active.swap(next);
            ++step_index;
            handle_boundary(t1, hooks);
        }
    }

    RunResult finish(const RunHooks& hooks) {
        advance_to(cfg.T, hooks);
        stats.final_alive = active.size();
        if (cfg.record_genealogy)
            for (const auto& p : active)
                genealogy.close(p.id, cfg.T, p.pos, EndKind::reached_horizon);
        RunResult out;
        out.genealogy = std::move(genealogy);
        out.snapshots = std::move(collected);
        out.paths = std::move(paths);
        out.stats = stats;
        return out;
    }
};

SyncEngine::SyncEngine() : impl_(std::make_unique<Impl>()) {}
SyncEngine::SyncEngine(const RunConfig& cfg) : impl_(std::make_unique<Impl>()) {
    impl_->cfg = cfg;
    impl_->init();
}
SyncEngine::~SyncEngine() = default;
SyncEngine::SyncEngine(SyncEngine&&) noexcept = default;
SyncEngine& SyncEngine::operator=(SyncEngine&&) noexcept = default;

double SyncEngine::time() const { return impl_->time(); }
double SyncEngine::step() const { return impl_->step; }
void SyncEngine::advance_to(double t, const RunHooks& hooks) { impl_->advance_to(t, hooks); }
RunResult SyncEngine::finish(const RunHooks& hooks) { return impl_->finish(hooks); }
const Genealogy& SyncEngine::genealogy() const { return impl_->genealogy; }
PopulationSnapshot SyncEngine::current_snapshot() const { return impl_->make_snapshot(impl_->time()); }
const RunStats& SyncEngine::stats() const { return impl_->stats; }

RunResult run(const RunConfig& cfg, const RunHooks& hooks) {
    validate(cfg);
    if (cfg.mode == RunMode::event && cfg.prune.mode == PruneMode::none && cfg.sample_dt == 0.0)
        return run_event_dfs(cfg, hooks);
    SyncEngine engine(cfg);
    return engine.finish(hooks);
}

// ---------------------------------------------------------------------------
// Checkpointing

namespace {

constexpr char kMagic[4] = {'B', 'B', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

struct Writer {
    std::string buf;
    template <class T> void raw(const T& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void f64(double v) { raw(v); }
    void u64(std::uint64_t v) { raw(v); }
    void u32(std::uint32_t v) { raw(v); }
    void u8(std::uint8_t v) { raw(v); }
    void doubles(std::span<const double> xs) {
        u64(xs.size());
        buf.append(reinterpret_cast<const char*>(xs.data()), xs.size() * sizeof(double));
    }
};

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    template <class T> T raw() {
        static_assert(std::is_trivially_copyable_v<T>);
        if (pos + sizeof(T) > buf.size())
            throw CheckpointError(CheckpointError::Kind::truncated, "checkpoint truncated");
        T v;
        std::memcpy(&v, buf.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
    double f64() { return raw<double>(); }
    std::uint64_t u64() { return raw<std::uint64_t>(); }
    std::uint32_t u32() { return raw<std::uint32_t>(); }
    std::uint8_t u8() { return raw<std::uint8_t>(); }
    std::vector<double> doubles() {
        std::uint64_t n = u64();
        if (pos + n * sizeof(double) > buf.size())
            throw CheckpointError(CheckpointError::Kind::truncated, "checkpoint truncated");
        std::vector<double> xs(n);
        std::memcpy(xs.data(), buf.data() + pos, n * sizeof(double));
        pos += n * sizeof(double);
        return xs;
    }
};

} // namespace

void SyncEngine::save(std::ostream& out, std::span<const double> accumulator_state) const {
    const Impl& s = *impl_;
    Writer w;
    w.buf.append(kMagic, 4);
    w.u32(kVersion);
    w.u64(s.cfg.root_stream.hi);
    w.u64(s.cfg.root_stream.lo);
    w.f64(s.cfg.T);
    w.u8(static_cast<std::uint8_t>(s.cfg.mode));
    w.f64(s.cfg.dt);
    w.f64(s.cfg.sample_dt);
    w.u8(static_cast<std::uint8_t>(s.cfg.prune.mode));
    w.f64(s.cfg.prune.A);
    w.f64(s.cfg.prune.L);
    w.u64(s.cfg.prune.N_max);
    w.f64(s.cfg.prune.enable_after);
    w.u64(s.cfg.hard_particle_limit);
    w.u8(s.cfg.record_genealogy ? 1 : 0);
    w.doubles(s.cfg.snapshot_times);

    w.u64(s.step_index);
    w.u64(s.next_id);
    w.u32(s.snap_idx);
    w.u8(s.boundary0_done ? 1 : 0);

    // node table
    w.u64(s.genealogy.size());
    for (const auto& n : s.genealogy.nodes()) {
        w.u32(n.parent);
        w.u32(n.child0);
        w.u32(n.child1);
        w.u32(n.depth);
        w.f64(n.birth_time);
        w.f64(n.birth_position);
        w.f64(n.end_time);
        w.f64(n.end_position);
        w.u64(n.key.hi);
        w.u64(n.key.lo);
        w.u8(static_cast<std::uint8_t>(n.end_kind));
    }
    // grid paths
    w.u8(s.grid() ? 1 : 0);
    if (s.grid()) {
        w.u64(s.paths.positions.size());
        for (std::size_t i = 0; i < s.paths.positions.size(); ++i) {
            w.u32(s.paths.first_index[i]);
            w.doubles(s.paths.positions[i]);
        }
    }
    // active particles
    w.u64(s.active.size());
    for (const auto& p : s.active) {
        w.u32(p.id);
        w.f64(p.pos);
        w.f64(p.next_branch);
        w.u64(p.key.hi);
        w.u64(p.key.lo);
        w.u64(p.ctr);
    }
    // collected snapshots
    w.u64(s.collected.size());
    for (const auto& snap : s.collected) {
        w.f64(snap.time);
        w.u64(snap.entries.size());
        for (const auto& [id, pos] : snap.entries) {
            w.u32(id);
            w.f64(pos);
        }
    }
    // stats
    w.u64(s.stats.nodes_created);
    w.u64(s.stats.branch_events);
    w.u64(s.stats.pruned_kills);
    w.u64(s.stats.max_alive);
    w.u64(s.stats.final_alive);
    // accumulator block
    w.doubles(accumulator_state);

    std::uint64_t checksum = fnv1a64(w.buf);
    out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
    out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
    if (!out) throw std::runtime_error("checkpoint: write failed");
}

SyncEngine SyncEngine::load(std::istream& in, std::vector<double>* accumulator_state) {
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string all = ss.str();
    if (all.size() < 4 || std::memcmp(all.data(), kMagic, 4) != 0)
        throw CheckpointError(CheckpointError::Kind::bad_magic, "checkpoint: bad magic bytes");
    if (all.size() < 12)
        throw CheckpointError(CheckpointError::Kind::truncated, "checkpoint truncated");
    std::uint64_t stored;
    std::memcpy(&stored, all.data() + all.size() - 8, 8);
    std::string payload = all.substr(0, all.size() - 8);
    if (fnv1a64(payload) != stored)
        throw CheckpointError(CheckpointError::Kind::checksum_mismatch, "checkpoint: checksum mismatch");

    Reader r{payload, 4};
    std::uint32_t version = r.u32();
    if (version != kVersion)
        throw CheckpointError(CheckpointError::Kind::version_mismatch,
                              "checkpoint: unsupported format version " + std::to_string(version));

    SyncEngine eng;
    Impl& s = *eng.impl_;
    s.cfg.root_stream.hi = r.u64();
    s.cfg.root_stream.lo = r.u64();
    s.cfg.T = r.f64();
    s.cfg.mode = static_cast<RunMode>(r.u8());
    s.cfg.dt = r.f64();
    s.cfg.sample_dt = r.f64();
    s.cfg.prune.mode = static_cast<PruneMode>(r.u8());
    s.cfg.prune.A = r.f64();
    s.cfg.prune.L = r.f64();
    s.cfg.prune.N_max = r.u64();
    s.cfg.prune.enable_after = r.f64();
    s.cfg.hard_particle_limit = r.u64();
    s.cfg.record_genealogy = r.u8() != 0;
    s.cfg.snapshot_times = r.doubles();

    s.step = s.cfg.mode == RunMode::grid ? s.cfg.dt : s.cfg.sample_dt;
    s.n_steps = static_cast<std::uint64_t>(std::llround(s.cfg.T / s.step));
    s.step_index = r.u64();
    s.next_id = r.u64();
    s.snap_idx = r.u32();
    s.boundary0_done = r.u8() != 0;

    std::uint64_t n_nodes = r.u64();
    auto& nodes = s.genealogy.nodes_mut();
    nodes.resize(n_nodes);
    for (auto& n : nodes) {
        n.parent = r.u32();
        n.child0 = r.u32();
        n.child1 = r.u32();
        n.depth = r.u32();
        n.birth_time = r.f64();
        n.birth_position = r.f64();
        n.end_time = r.f64();
        n.end_position = r.f64();
        n.key.hi = r.u64();
        n.key.lo = r.u64();
        n.end_kind = static_cast<EndKind>(r.u8());
    }
    if (r.u8()) {
        s.paths.dt = s.cfg.dt;
        std::uint64_t np = r.u64();
        s.paths.first_index.resize(np);
        s.paths.positions.resize(np);
        for (std::uint64_t i = 0; i < np; ++i) {
            s.paths.first_index[i] = r.u32();
            s.paths.positions[i] = r.doubles();
        }
    }
    std::uint64_t n_active = r.u64();
    s.active.resize(n_active);
    for (auto& p : s.active) {
        p.id = r.u32();
        p.pos = r.f64();
        p.next_branch = r.f64();
        p.key.hi = r.u64();
        p.key.lo = r.u64();
        p.ctr = r.u64();
    }
    std::uint64_t n_snaps = r.u64();
    s.collected.resize(n_snaps);
    for (auto& snap : s.collected) {
        snap.time = r.f64();
        std::uint64_t ne = r.u64();
        snap.entries.resize(ne);
        for (auto& [id, pos] : snap.entries) {
            id = r.u32();
            pos = r.f64();
        }
    }
    s.stats.nodes_created = r.u64();
    s.stats.branch_events = r.u64();
    s.stats.pruned_kills = r.u64();
    s.stats.max_alive = r.u64();
    s.stats.final_alive = r.u64();
    auto acc = r.doubles();
    if (accumulator_state) *accumulator_state = std::move(acc);
    return eng;
}

void SyncEngine::save_file(const std::string& path, std::span<const double> acc) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    save(f, acc);
}

SyncEngine SyncEngine::load_file(const std::string& path, std::vector<double>* acc) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    return load(f, acc);
}

} // namespace bbm
