#pragma once

#include <optional>
#include <vector>

#include "bbm/engine.hpp"

namespace bbm {

// Centered front position M_t - m_t; also reports the argmax id
// (ties broken by canonical id order).
struct MaxOffset {
    double offset;
    NodeId argmax;
};
MaxOffset max_offset(const PopulationSnapshot& snapshot);

// Ids of particles with centered position >= x.
std::vector<NodeId> extremal_set(const PopulationSnapshot& snapshot, double x);

// Z(t) = sum_u (sqrt(2) t - X_u) exp(sqrt(2)(X_u - sqrt(2) t)),
// compensated summation in canonical id order.
double derivative_martingale(const PopulationSnapshot& snapshot);

// Running time-integral of front-position indicators over an x-grid.
class ErgodicAccumulator {
public:
    ErgodicAccumulator() = default;
    ErgodicAccumulator(std::vector<double> x_grid, double t_start);

    void accumulate(double offset, double dt_weight);
    void merge(const ErgodicAccumulator& other);

    // F_T(x) per grid point (fraction of accumulated time with offset <= x)
    std::vector<double> result() const;

    const std::vector<double>& x_grid() const { return x_grid_; }
    const std::vector<double>& mass() const { return mass_; }
    double elapsed() const { return elapsed_; }
    double t_start() const { return t_start_; }

    // flat state for checkpointing
    std::vector<double> to_state() const;
    static ErgodicAccumulator from_state(const std::vector<double>& state);

private:
    std::vector<double> x_grid_;
    std::vector<double> mass_;
    double elapsed_ = 0.0;
    double t_start_ = 0.0;
};

struct LocalizationSummary {
    NodeId particle = kNoNode;
    bool violated = false;
    std::optional<double> first_violation_time;
    double max_excess = 0.0; // max over the window of X_u(s) - ((s/t) m_t - envelope)
};

// Checks X_u(s) <= (s/t) m_t - min(s, t-s)^alpha at the grid times covering
// [r, t-r]. `path` holds positions at times grid_t0 + k*grid_dt.
LocalizationSummary localization_check(std::span<const double> path, double grid_t0,
                                       double grid_dt, double t, double r, double alpha);

// Full grid path of particle u (including ancestor segments), grid index 0..K.
std::vector<double> lineage_path(const Genealogy& g, const GridPaths& paths, NodeId u,
                                 std::uint32_t k_last);

// Max split time over N_s(x) x N_t(x) pairs, or nullopt when either set is
// empty. Pair values are capped at snapshot_s.time: a pair where one particle
// is an ancestor of the other coincides over the whole earlier observation
// window.
std::optional<double> extremal_pair_split_scan(const Genealogy& g,
                                               const PopulationSnapshot& snapshot_s,
                                               const PopulationSnapshot& snapshot_t,
                                               double x);

} // namespace bbm
