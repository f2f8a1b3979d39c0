#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bbm/genealogy.hpp"

namespace bbm {

// Positions of all alive particles at one time.
struct PopulationSnapshot {
    double time = 0.0;
    std::vector<std::pair<NodeId, double>> entries; // sorted by id
};

enum class PruneMode : std::uint8_t { none = 0, line_barrier, gap_to_max, cap_count };

struct PruneConfig {
    PruneMode mode = PruneMode::none;
    double A = 0.0;          // line_barrier: kill if X < sqrt(2) s - A
    double L = 0.0;          // gap_to_max: kill if X < max - L
    std::uint64_t N_max = 0; // cap_count: keep the N_max highest
    double enable_after = 0.0; // pruning inactive for t <= enable_after
};

void validate(const PruneConfig& cfg);

struct PruneResult {
    std::vector<std::pair<NodeId, double>> survivors;
    std::vector<NodeId> killed;
};

// Applies the pruning predicate; the current maximum is never killed.
PruneResult apply_pruning(const PopulationSnapshot& snapshot, const PruneConfig& cfg);

enum class RunMode : std::uint8_t { event = 0, grid = 1 };

struct RunConfig {
    double T = 1.0;
    RunMode mode = RunMode::event;
    double dt = 0.01;       // grid step (grid mode)
    double sample_dt = 0.0; // event mode: >0 forces synchronous stepping (needed for pruning)
    std::vector<double> snapshot_times; // sorted, within [0, T]
    PruneConfig prune;
    RngStreamKey root_stream;
    std::uint64_t hard_particle_limit = 20'000'000;
    bool record_genealogy = true;
};

void validate(const RunConfig& cfg);

struct RunStats {
    std::uint64_t nodes_created = 0;
    std::uint64_t branch_events = 0;
    std::uint64_t pruned_kills = 0;
    std::uint64_t max_alive = 0;
    std::uint64_t final_alive = 0;
};

struct RunHooks {
    // called at every synchronous sample step (sync driver only)
    std::function<void(const PopulationSnapshot&)> on_sample;
    // called for every requested snapshot time, in time order
    std::function<void(const PopulationSnapshot&)> on_snapshot;
};

// Grid-mode per-node path storage: positions at grid times k*dt with
// birth_time < k*dt <= end_time (the root also covers k = 0).
struct GridPaths {
    double dt = 0.0;
    std::vector<std::uint32_t> first_index;       // per node
    std::vector<std::vector<double>> positions;   // per node

    // position of node id (or its ancestors) at grid index k
    double at(const Genealogy& g, NodeId id, std::uint32_t k) const;
};

struct RunResult {
    Genealogy genealogy;
    std::vector<PopulationSnapshot> snapshots; // one per requested time
    GridPaths paths;                           // grid mode only
    RunStats stats;
};

class ParticleLimitError : public std::runtime_error {
public:
    ParticleLimitError(std::uint64_t limit, double time_reached);
    std::uint64_t limit;
    double time_reached;
};

class CheckpointError : public std::runtime_error {
public:
    enum class Kind { bad_magic, version_mismatch, truncated, checksum_mismatch };
    CheckpointError(Kind kind, const std::string& what);
    Kind kind;
};

// Simulates one BBM realization. Deterministic given cfg.root_stream.
RunResult run(const RunConfig& cfg, const RunHooks& hooks = {});

// Synchronous engine with explicit state, used for long pruned runs and
// grid-mode paths; supports checkpoint/resume at sample boundaries.
class SyncEngine {
public:
    explicit SyncEngine(const RunConfig& cfg);
    ~SyncEngine();
    SyncEngine(SyncEngine&&) noexcept;
    SyncEngine& operator=(SyncEngine&&) noexcept;

    double time() const;
    double step() const; // sample_dt (event) or dt (grid)
    // advance to t_target (a multiple of step, <= T), firing hooks
    void advance_to(double t_target, const RunHooks& hooks);
    // run to the horizon and finalize the genealogy
    RunResult finish(const RunHooks& hooks);

    const Genealogy& genealogy() const;
    PopulationSnapshot current_snapshot() const;
    const RunStats& stats() const;

    // Checkpoint format: "BBM1" magic, u32 version, root stream key,
    // node table, active-particle block, accumulator block, u64 checksum.
    void save(std::ostream& out, std::span<const double> accumulator_state = {}) const;
    static SyncEngine load(std::istream& in, std::vector<double>* accumulator_state = nullptr);

    void save_file(const std::string& path, std::span<const double> accumulator_state = {}) const;
    static SyncEngine load_file(const std::string& path, std::vector<double>* accumulator_state = nullptr);

private:
    struct Impl;
    SyncEngine(); // for load
    std::unique_ptr<Impl> impl_;
};

} // namespace bbm
