#pragma once

#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "bbm/rng.hpp"

namespace bbm {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

enum class EndKind : std::uint8_t {
    branched = 0,
    killed_by_pruning = 1,
    reached_horizon = 2,
    alive = 3, // open node inside a running (or checkpointed) simulation
};

// One particle's birth/branch record. Children of a branched node inherit
// its end position and time continuously.
struct GenealogyNode {
    NodeId parent = kNoNode;
    NodeId child0 = kNoNode;
    NodeId child1 = kNoNode;
    std::uint32_t depth = 0;
    double birth_time = 0.0;
    double birth_position = 0.0;
    double end_time = 0.0;
    double end_position = 0.0;
    RngStreamKey key; // the particle's own stream identity
    EndKind end_kind = EndKind::alive;
};

class Genealogy {
public:
    NodeId add_root(RngStreamKey key) {
        if (!nodes_.empty()) throw std::logic_error("Genealogy: root already exists");
        GenealogyNode n;
        n.key = key;
        nodes_.push_back(n);
        return 0;
    }

    NodeId add_child(NodeId parent, std::uint64_t child_index) {
        GenealogyNode& p = at_mut(parent);
        if (p.end_kind != EndKind::branched)
            throw std::logic_error("Genealogy: parent has not branched");
        GenealogyNode n;
        n.parent = parent;
        n.depth = p.depth + 1;
        n.birth_time = p.end_time;
        n.birth_position = p.end_position;
        n.key = derive_stream(p.key, child_index);
        NodeId id = static_cast<NodeId>(nodes_.size());
        nodes_.push_back(n);
        (child_index == 0 ? at_mut(parent).child0 : at_mut(parent).child1) = id;
        return id;
    }

    void close(NodeId id, double end_time, double end_position, EndKind kind) {
        GenealogyNode& n = at_mut(id);
        n.end_time = end_time;
        n.end_position = end_position;
        n.end_kind = kind;
    }

    const GenealogyNode& at(NodeId id) const {
        if (id >= nodes_.size()) throw std::out_of_range("Genealogy: unknown node id");
        return nodes_[id];
    }

    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }
    const std::vector<GenealogyNode>& nodes() const { return nodes_; }
    std::vector<GenealogyNode>& nodes_mut() { return nodes_; }

    // Lowest common ancestor by depth walk.
    NodeId lca(NodeId u, NodeId v) const {
        const GenealogyNode* a = &at(u);
        const GenealogyNode* b = &at(v);
        while (a->depth > b->depth) { u = a->parent; a = &nodes_[u]; }
        while (b->depth > a->depth) { v = b->parent; b = &nodes_[v]; }
        while (u != v) {
            u = a->parent; a = &nodes_[u];
            v = b->parent; b = &nodes_[v];
        }
        return u;
    }

    bool is_ancestor_or_self(NodeId anc, NodeId v) const {
        const GenealogyNode* b = &at(v);
        std::uint32_t d = at(anc).depth;
        while (b->depth > d) { v = b->parent; b = &nodes_[v]; }
        return v == anc;
    }

private:
    GenealogyNode& at_mut(NodeId id) {
        if (id >= nodes_.size()) throw std::out_of_range("Genealogy: unknown node id");
        return nodes_[id];
    }

    std::vector<GenealogyNode> nodes_;
};

// Splitting time of two particles: the branch time of their lowest common
// ancestor, or min of end times when one is an ancestor of the other.
inline double split_time(const Genealogy& g, NodeId u, NodeId v) {
    const GenealogyNode& nu = g.at(u);
    const GenealogyNode& nv = g.at(v);
    NodeId a = g.lca(u, v);
    if (a == u || a == v) return std::min(nu.end_time, nv.end_time);
    return g.at(a).end_time;
}

// Samples (and memoizes) positions in the interior of genealogy edges via
// successive bridge refinement, so repeated queries agree and the joint law
// over queried points is the Brownian bridge law given the edge endpoints.
class PathSampler {
public:
    explicit PathSampler(const Genealogy& g) : g_(&g) {}

    // Position of particle u (or its ancestor) at time s.
    double position_at(NodeId u, double s) {
        const GenealogyNode* n = &g_->at(u);
        if (s > n->end_time || s < 0.0)
            throw std::out_of_range("position_at: time outside particle lifetime");
        while (s < n->birth_time) { u = n->parent; n = &g_->at(u); }
        if (s == n->birth_time) return n->birth_position;
        if (s == n->end_time) return n->end_position;

        auto& pts = cache_[u];
        auto it = pts.find(s);
        if (it != pts.end()) return it->second;

        // nearest already-fixed times bracketing s on this edge
        double t_lo = n->birth_time, x_lo = n->birth_position;
        double t_hi = n->end_time, x_hi = n->end_position;
        auto up = pts.upper_bound(s);
        if (up != pts.end()) { t_hi = up->first; x_hi = up->second; }
        if (up != pts.begin()) { auto lo = std::prev(up); t_lo = lo->first; x_lo = lo->second; }

        RngStream stream(derive_stream(
            derive_stream(n->key, stream_tag::kEdgeInterior), hash_time(s)));
        double x = sample_bridge_interior(stream, x_lo, x_hi, t_hi - t_lo, s - t_lo);
        pts.emplace(s, x);
        return x;
    }

    void reset() { cache_.clear(); }

private:
    static std::uint64_t hash_time(double s) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(s));
        std::memcpy(&bits, &s, sizeof(bits));
        return detail::mix64(bits);
    }

    const Genealogy* g_;
    std::unordered_map<NodeId, std::map<double, double>> cache_;
};

} // namespace bbm
