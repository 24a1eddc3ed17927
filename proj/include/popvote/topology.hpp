#pragma once

#include "popvote/rng.hpp"

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

namespace popvote {

/// Undirected interaction graph over n agents. Immutable after
/// construction; neighbor lists are sorted, symmetric, self-loop free,
/// and every generator returns a connected graph.
class Topology {
public:
    /// side x side torus; every agent has degree exactly 4.
    /// Requires side >= 3 (smaller sides would wrap onto duplicate edges).
    static Topology mesh(std::uint32_t side);

    /// side x side planar lattice without wraparound. Requires side >= 2.
    static Topology grid(std::uint32_t side);

    /// Complete graph on n >= 2 agents.
    static Topology complete(std::uint32_t n);

    /// G(n, p): each pair independently with probability p, resampled
    /// until connected (at most 100 attempts, then std::runtime_error —
    /// a failure indicates p below the connectivity regime). Each
    /// attempt consumes exactly n(n-1)/2 uniform draws.
    static Topology erdos_renyi(std::uint32_t n, double p, Rng& rng);

    std::uint32_t size() const noexcept { return static_cast<std::uint32_t>(offsets_.size()) - 1; }

    std::span<const std::uint32_t> neighbors(std::uint32_t i) const noexcept
    {
        return {adjacency_.data() + offsets_[i], adjacency_.data() + offsets_[i + 1]};
    }

    std::uint32_t degree(std::uint32_t i) const noexcept
    {
        return offsets_[i + 1] - offsets_[i];
    }

    std::size_t edge_count() const noexcept { return adjacency_.size() / 2; }

    bool is_connected() const;

    /// Plain-text edge list: one "i j" line per edge, 0-indexed, i < j.
    void write_edge_list(std::ostream& out) const;

private:
    static Topology from_adjacency(std::vector<std::vector<std::uint32_t>> adjacency);

    std::vector<std::uint32_t> offsets_;  // CSR offsets, size n+1
    std::vector<std::uint32_t> adjacency_;
};

} // namespace popvote
