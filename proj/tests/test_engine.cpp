#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bbm/engine.hpp"
#include "bbm/observables.hpp"
#include "bbm/parallel.hpp"
#include "bbm/table.hpp"

using namespace bbm;

namespace {

RunConfig base_cfg(double T, std::uint64_t seed) {
    RunConfig cfg;
    cfg.T = T;
    cfg.snapshot_times = {T};
    cfg.root_stream = make_root_key(seed);
    return cfg;
}

std::string snapshot_csv(const PopulationSnapshot& s) {
    Table t;
    t.columns = {"time", "id", "position"};
    for (const auto& [id, pos] : s.entries)
        t.add_row() = {s.time, static_cast<std::int64_t>(id), pos};
    return to_csv(t);
}

} // namespace

TEST_CASE("run config validation") {
    RunConfig cfg = base_cfg(1.0, 1);
    cfg.T = -1.0;
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);

    cfg = base_cfg(1.0, 1);
    cfg.mode = RunMode::grid;
    cfg.dt = 0.5; // too coarse
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);

    cfg = base_cfg(1.0, 1);
    cfg.prune.mode = PruneMode::gap_to_max;
    cfg.prune.L = 2.0;
    // pruning needs synchronous stepping in event mode
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);
    cfg.sample_dt = 0.1;
    CHECK_NOTHROW(run(cfg));

    cfg = base_cfg(1.0, 1);
    cfg.snapshot_times = {0.8, 0.3}; // not increasing
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);
    cfg.snapshot_times = {0.5, 2.0}; // beyond horizon
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);
}

TEST_CASE("population size moments match the branching law") {
    // E[N_t] = e^t and E[N_t^2] = 2 e^{2t} - e^t for binary branching at rate 1
    const int trials = 20000;
    std::vector<double> n1(trials), n2(trials);
    parallel_for(trials, 4, [&](std::uint64_t i) {
        RunConfig cfg = base_cfg(1.0, 1);
        cfg.record_genealogy = false;
        cfg.root_stream = derive_stream(make_root_key(100), i);
        auto res = run(cfg);
        double n = static_cast<double>(res.snapshots[0].entries.size());
        n1[i] = n;
        n2[i] = n * n;
    });
    auto check = [&](const std::vector<double>& xs, double target) {
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= xs.size();
        double ss = 0.0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        double se = std::sqrt(ss / (xs.size() - 1.0) / xs.size());
        CHECK(std::abs(mean - target) < 5.0 * se);
    };
    check(n1, std::exp(1.0));
    check(n2, 2.0 * std::exp(2.0) - std::exp(1.0));
}

TEST_CASE("snapshots are canonical and complete") {
    RunConfig cfg = base_cfg(2.0, 7);
    cfg.snapshot_times = {0.0, 1.0, 2.0};
    auto res = run(cfg);
    REQUIRE(res.snapshots.size() == 3);
    CHECK(res.snapshots[0].time == 0.0);
    REQUIRE(res.snapshots[0].entries.size() == 1);
    CHECK(res.snapshots[0].entries[0].second == 0.0);
    for (const auto& s : res.snapshots) {
        CHECK(std::is_sorted(s.entries.begin(), s.entries.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; }));
        for (const auto& [id, pos] : s.entries) {
            const auto& n = res.genealogy.at(id);
            CHECK(n.birth_time <= s.time);
            // the node is the unique lineage holder at the snapshot time
            CHECK((s.time == 0.0 || n.birth_time < s.time));
            CHECK(s.time <= n.end_time);
        }
    }
    CHECK(res.stats.final_alive == res.snapshots.back().entries.size());
}

TEST_CASE("identical config reproduces identical output, event and sync drivers") {
    for (int variant = 0; variant < 2; ++variant) {
        RunConfig cfg = base_cfg(3.0, 21);
        if (variant == 1) cfg.sample_dt = 0.1; // sync driver
        auto a = run(cfg);
        auto b = run(cfg);
        REQUIRE(a.snapshots.size() == b.snapshots.size());
        CHECK(snapshot_csv(a.snapshots[0]) == snapshot_csv(b.snapshots[0]));
        CHECK(a.genealogy.size() == b.genealogy.size());
    }
}

TEST_CASE("genealogy structure is consistent") {
    RunConfig cfg = base_cfg(3.0, 5);
    auto res = run(cfg);
    const auto& g = res.genealogy;
    REQUIRE(g.size() > 1);
    int branched = 0;
    for (NodeId id = 0; id < g.size(); ++id) {
        const auto& n = g.at(id);
        if (id == 0) {
            CHECK(n.parent == kNoNode);
            CHECK(n.birth_time == 0.0);
        } else {
            const auto& p = g.at(n.parent);
            CHECK(n.parent < id);
            CHECK(n.birth_time == p.end_time);
            CHECK(n.birth_position == p.end_position);
            CHECK(n.depth == p.depth + 1);
        }
        if (n.end_kind == EndKind::branched) {
            ++branched;
            CHECK(n.child0 != kNoNode);
            CHECK(n.child1 != kNoNode);
        } else {
            CHECK(n.end_kind == EndKind::reached_horizon);
            CHECK(n.end_time == cfg.T);
        }
    }
    CHECK(branched == static_cast<int>(res.stats.branch_events));
}

TEST_CASE("split_time: siblings split at the parent branch time") {
    Genealogy g;
    g.add_root(make_root_key(1));
    g.close(0, 0.7, 0.2, EndKind::branched);
    NodeId a = g.add_child(0, 0);
    NodeId b = g.add_child(0, 1);
    g.close(a, 1.5, 0.5, EndKind::reached_horizon);
    g.close(b, 1.5, -0.1, EndKind::reached_horizon);
    CHECK(split_time(g, a, b) == 0.7);
    CHECK(split_time(g, b, a) == 0.7);
    CHECK(split_time(g, a, a) == 1.5);   // self: paths coincide over the whole lifetime
    CHECK(split_time(g, 0, a) == 0.7);   // ancestor pair: min of end times
    CHECK(g.lca(a, b) == 0);
    CHECK(g.is_ancestor_or_self(0, a));
    CHECK_FALSE(g.is_ancestor_or_self(a, b));
}

TEST_CASE("split_time matches a brute-force ancestor walk on random trees") {
    for (std::uint64_t seed : {31, 32, 33}) {
        RunConfig cfg = base_cfg(4.0, seed);
        auto res = run(cfg);
        const auto& g = res.genealogy;
        auto chain = [&](NodeId u) {
            std::vector<NodeId> c{u};
            while (g.at(c.back()).parent != kNoNode) c.push_back(g.at(c.back()).parent);
            return c;
        };
        RngStream pick(make_root_key(seed + 1000));
        for (int k = 0; k < 200; ++k) {
            NodeId u = static_cast<NodeId>(pick.next_u64() % g.size());
            NodeId v = static_cast<NodeId>(pick.next_u64() % g.size());
            auto cu = chain(u), cv = chain(v);
            // deepest node present in both chains
            NodeId best = 0;
            std::uint32_t best_depth = 0;
            for (NodeId a : cu)
                for (NodeId b : cv)
                    if (a == b && g.at(a).depth >= best_depth) {
                        best = a;
                        best_depth = g.at(a).depth;
                    }
            double expected = (best == u || best == v)
                                  ? std::min(g.at(u).end_time, g.at(v).end_time)
                                  : g.at(best).end_time;
            CHECK(split_time(g, u, v) == expected);
        }
    }
}

TEST_CASE("apply_pruning unit behavior") {
    PopulationSnapshot snap;
    snap.time = 2.0;
    snap.entries = {{3, 1.0}, {5, -2.0}, {9, 4.0}, {12, 0.5}};

    PruneConfig cfg;
    SUBCASE("mode none is the identity") {
        auto r = apply_pruning(snap, cfg);
        CHECK(r.survivors == snap.entries);
        CHECK(r.killed.empty());
    }
    SUBCASE("huge gap cutoff kills nothing") {
        cfg.mode = PruneMode::gap_to_max;
        cfg.L = 1e9;
        auto r = apply_pruning(snap, cfg);
        CHECK(r.survivors == snap.entries);
    }
    SUBCASE("gap cutoff keeps particles within L of the max") {
        cfg.mode = PruneMode::gap_to_max;
        cfg.L = 3.4; // cutoff 0.6: kills the particles at -2.0 and 0.5
        auto r = apply_pruning(snap, cfg);
        REQUIRE(r.survivors.size() == 2);
        CHECK(r.survivors[0].first == 3);
        CHECK(r.survivors[1].first == 9);
        CHECK(r.killed == std::vector<NodeId>{5, 12});
    }
    SUBCASE("cap_count 1 keeps exactly the argmax") {
        cfg.mode = PruneMode::cap_count;
        cfg.N_max = 1;
        auto r = apply_pruning(snap, cfg);
        REQUIRE(r.survivors.size() == 1);
        CHECK(r.survivors[0].first == 9);
    }
    SUBCASE("line barrier never kills the current max") {
        PopulationSnapshot low;
        low.time = 2.0;
        // barrier sqrt(2)*2 - 0.5 = 2.33 sits above every particle
        low.entries = {{3, 1.0}, {5, -2.0}, {9, 2.0}, {12, 0.5}};
        cfg.mode = PruneMode::line_barrier;
        cfg.A = 0.5;
        auto r = apply_pruning(low, cfg);
        REQUIRE(r.survivors.size() == 1);
        CHECK(r.survivors[0].first == 9);
    }
    SUBCASE("survivors and killed partition the snapshot") {
        cfg.mode = PruneMode::line_barrier;
        cfg.A = 1.5;
        auto r = apply_pruning(snap, cfg);
        CHECK(r.survivors.size() + r.killed.size() == snap.entries.size());
        for (const auto& [id, pos] : r.survivors)
            CHECK(std::find(r.killed.begin(), r.killed.end(), id) == r.killed.end());
    }
}

TEST_CASE("coupled pruning never raises the front") {
    for (std::uint64_t seed : {41, 42, 43, 44, 45}) {
        RunConfig full = base_cfg(6.0, seed);
        full.sample_dt = 0.1;
        RunConfig pruned = full;
        pruned.prune.mode = PruneMode::gap_to_max;
        pruned.prune.L = 2.0;
        auto rf = run(full);
        auto rp = run(pruned);
        CHECK(rp.stats.pruned_kills > 0);
        double mf = max_offset(rf.snapshots[0]).offset;
        double mp = max_offset(rp.snapshots[0]).offset;
        CHECK(mp <= mf + 1e-12);
    }
}

TEST_CASE("hard particle limit aborts with a diagnostic") {
    RunConfig cfg = base_cfg(30.0, 3);
    cfg.hard_particle_limit = 5000;
    try {
        run(cfg);
        FAIL("expected ParticleLimitError");
    } catch (const ParticleLimitError& e) {
        CHECK(e.limit == 5000);
        CHECK(e.time_reached > 0.0);
        CHECK(std::string(e.what()).find("5000") != std::string::npos);
    }
}

TEST_CASE("interior path sampling: endpoints, siblings, memoization, moments") {
    Genealogy g;
    g.add_root(make_root_key(8));
    g.close(0, 2.0, 1.0, EndKind::branched);
    NodeId a = g.add_child(0, 0);
    NodeId b = g.add_child(0, 1);
    g.close(a, 5.0, 2.0, EndKind::reached_horizon);
    g.close(b, 5.0, 0.0, EndKind::reached_horizon);

    PathSampler ps(g);
    CHECK(ps.position_at(a, 2.0) == 1.0); // birth endpoint exact
    CHECK(ps.position_at(a, 5.0) == 2.0); // end endpoint exact
    // before their birth, siblings share the ancestor path
    CHECK(ps.position_at(a, 0.8) == ps.position_at(b, 0.8));
    CHECK(ps.position_at(a, 0.8) == ps.position_at(a, 0.8)); // memoized
    CHECK_THROWS_AS(ps.position_at(a, 6.0), std::out_of_range);

    // edge from (0 at time 0) to (1 at time 2), queried at s=1:
    // bridge law N(0.5, 0.5)
    const int n = 1000000;
    double sum = 0.0, sq = 0.0;
    Genealogy g2;
    g2.add_root(make_root_key(9));
    g2.close(0, 2.0, 1.0, EndKind::reached_horizon);
    for (int i = 0; i < n; ++i) {
        Genealogy gi;
        gi.add_root(derive_stream(make_root_key(9), i));
        gi.close(0, 2.0, 1.0, EndKind::reached_horizon);
        PathSampler p2(gi);
        double v = p2.position_at(0, 1.0);
        sum += v;
        sq += v * v;
    }
    double mean = sum / n;
    double var = sq / n - mean * mean;
    // SE(mean) = sqrt(0.5/n); SE(var) ~ sqrt(2/n) * 0.5
    CHECK(std::abs(mean - 0.5) < 5.0 * std::sqrt(0.5 / n));
    CHECK(std::abs(var - 0.5) < 5.0 * 0.5 * std::sqrt(2.0 / n));

    // successive refinement stays consistent: re-query after conditioning
    double mid = ps.position_at(a, 3.0);
    double q1 = ps.position_at(a, 2.5);
    CHECK(ps.position_at(a, 3.0) == mid);
    CHECK(ps.position_at(a, 2.5) == q1);
}

TEST_CASE("grid paths cover every lineage index") {
    RunConfig cfg = base_cfg(2.0, 55);
    cfg.mode = RunMode::grid;
    cfg.dt = 0.05;
    auto res = run(cfg);
    std::uint32_t k_last = 40;
    for (const auto& [id, pos] : res.snapshots[0].entries) {
        CHECK(res.paths.at(res.genealogy, id, k_last) == pos);
        // walking to k=0 must reach the root position
        CHECK(res.paths.at(res.genealogy, id, 0) == 0.0);
    }
}

TEST_CASE("sync engine checkpoint round trip and resume") {
    RunConfig cfg = base_cfg(4.0, 66);
    cfg.sample_dt = 0.1;
    cfg.snapshot_times = {4.0};

    // unbroken reference
    auto ref = run(cfg);
    std::string ref_csv = snapshot_csv(ref.snapshots[0]);

    // run to T/2, checkpoint, reload, continue
    SyncEngine eng(cfg);
    eng.advance_to(2.0, {});
    std::vector<double> acc_state = {1.5, 2.5, 3.5};
    std::stringstream buf;
    eng.save(buf, acc_state);

    std::vector<double> acc_back;
    SyncEngine resumed = SyncEngine::load(buf, &acc_back);
    CHECK(acc_back == acc_state);
    CHECK(resumed.time() == 2.0);
    auto res = resumed.finish({});
    CHECK(snapshot_csv(res.snapshots[0]) == ref_csv);
    CHECK(res.genealogy.size() == ref.genealogy.size());

    // the engine that saved can also keep going to the same answer
    auto res2 = eng.finish({});
    CHECK(snapshot_csv(res2.snapshots[0]) == ref_csv);
}

TEST_CASE("checkpoint corruption is detected, never silent") {
    RunConfig cfg = base_cfg(2.0, 67);
    cfg.sample_dt = 0.1;
    SyncEngine eng(cfg);
    eng.advance_to(1.0, {});
    std::stringstream buf;
    eng.save(buf, {});
    std::string bytes = buf.str();

    auto expect_kind = [](const std::string& data, CheckpointError::Kind kind) {
        std::stringstream in(data);
        try {
            SyncEngine::load(in);
            FAIL_CHECK("expected CheckpointError");
        } catch (const CheckpointError& e) {
            CHECK(e.kind == kind);
        }
    };

    // recompute the trailing FNV-1a 64 checksum over a doctored payload, so
    // structural errors are reached instead of the checksum guard
    auto reseal = [](std::string payload) {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        for (unsigned char c : payload) {
            h ^= c;
            h *= 0x100000001B3ULL;
        }
        payload.append(reinterpret_cast<const char*>(&h), sizeof(h));
        return payload;
    };
    std::string payload = bytes.substr(0, bytes.size() - 8);

    std::string bad = bytes;
    bad[0] = 'X';
    expect_kind(bad, CheckpointError::Kind::bad_magic);

    bad = payload;
    bad[4] = static_cast<char>(bad[4] + 1); // format version field
    expect_kind(reseal(bad), CheckpointError::Kind::version_mismatch);

    bad = bytes;
    bad[bytes.size() / 2] ^= 0x40;
    expect_kind(bad, CheckpointError::Kind::checksum_mismatch);

    expect_kind(reseal(payload.substr(0, payload.size() - 9)),
                CheckpointError::Kind::truncated);
}

TEST_CASE("sample hook fires on the synchronous grid in time order") {
    RunConfig cfg = base_cfg(1.0, 68);
    cfg.sample_dt = 0.25;
    std::vector<double> times;
    RunHooks hooks;
    hooks.on_sample = [&](const PopulationSnapshot& s) { times.push_back(s.time); };
    run(cfg, hooks);
    REQUIRE(times.size() == 5); // 0.0, 0.25, ..., 1.0
    CHECK(std::is_sorted(times.begin(), times.end()));
    CHECK(times.front() == 0.0);
    CHECK(times.back() == 1.0);
}
