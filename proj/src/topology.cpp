#include "popvote/topology.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace popvote {

Topology Topology::from_adjacency(std::vector<std::vector<std::uint32_t>> adjacency)
{
    Topology t;
    t.offsets_.reserve(adjacency.size() + 1);
    t.offsets_.push_back(0);
    std::size_t total = 0;
    for (auto& list : adjacency) {
        std::sort(list.begin(), list.end());
        total += list.size();
        t.offsets_.push_back(static_cast<std::uint32_t>(total));
    }
    t.adjacency_.reserve(total);
    for (const auto& list : adjacency) {
        t.adjacency_.insert(t.adjacency_.end(), list.begin(), list.end());
    }
    return t;
}

Topology Topology::mesh(std::uint32_t side)
{
    if (side < 3) {
        throw std::invalid_argument("mesh: side must be at least 3, got " + std::to_string(side));
    }
    const std::uint32_t n = side * side;
    std::vector<std::vector<std::uint32_t>> adj(n);
    auto id = [side](std::uint32_t r, std::uint32_t c) { return r * side + c; };
    for (std::uint32_t r = 0; r < side; ++r) {
        for (std::uint32_t c = 0; c < side; ++c) {
            adj[id(r, c)] = {
                id((r + 1) % side, c),
                id((r + side - 1) % side, c),
                id(r, (c + 1) % side),
                id(r, (c + side - 1) % side),
            };
        }
    }
    return from_adjacency(std::move(adj));
}

Topology Topology::grid(std::uint32_t side)
{
    if (side < 2) {
        throw std::invalid_argument("grid: side must be at least 2, got " + std::to_string(side));
    }
    const std::uint32_t n = side * side;
    std::vector<std::vector<std::uint32_t>> adj(n);
    auto id = [side](std::uint32_t r, std::uint32_t c) { return r * side + c; };
    for (std::uint32_t r = 0; r < side; ++r) {
        for (std::uint32_t c = 0; c < side; ++c) {
            auto& list = adj[id(r, c)];
            if (r + 1 < side) list.push_back(id(r + 1, c));
            if (r > 0) list.push_back(id(r - 1, c));
            if (c + 1 < side) list.push_back(id(r, c + 1));
            if (c > 0) list.push_back(id(r, c - 1));
        }
    }
    return from_adjacency(std::move(adj));
}

Topology Topology::complete(std::uint32_t n)
{
    if (n < 2) {
        throw std::invalid_argument("complete: need at least 2 agents, got " + std::to_string(n));
    }
    std::vector<std::vector<std::uint32_t>> adj(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        adj[i].reserve(n - 1);
        for (std::uint32_t j = 0; j < n; ++j) {
            if (j != i) adj[i].push_back(j);
        }
    }
    return from_adjacency(std::move(adj));
}

Topology Topology::erdos_renyi(std::uint32_t n, double p, Rng& rng)
{
    if (n < 2) {
        throw std::invalid_argument("erdos_renyi: need at least 2 agents, got " + std::to_string(n));
    }
    if (!(p > 0.0) || p > 1.0) {
        throw std::invalid_argument("erdos_renyi: p must be in (0, 1], got " + std::to_string(p));
    }
    constexpr int kMaxAttempts = 100;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        std::vector<std::vector<std::uint32_t>> adj(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            for (std::uint32_t j = i + 1; j < n; ++j) {
                if (rng.uniform01() < p) {
                    adj[i].push_back(j);
                    adj[j].push_back(i);
                }
            }
        }
        Topology t = from_adjacency(std::move(adj));
        if (t.is_connected()) {
            return t;
        }
    }
    throw std::runtime_error("erdos_renyi: no connected sample in 100 attempts (p=" +
                             std::to_string(p) + " likely below the connectivity threshold)");
}

bool Topology::is_connected() const
{
    const std::uint32_t n = size();
    if (n == 0) {
        return false;
    }
    std::vector<char> seen(n, 0);
    std::vector<std::uint32_t> stack{0};
    seen[0] = 1;
    std::uint32_t visited = 1;
    while (!stack.empty()) {
        const std::uint32_t v = stack.back();
        stack.pop_back();
        for (const std::uint32_t w : neighbors(v)) {
            if (!seen[w]) {
                seen[w] = 1;
                ++visited;
                stack.push_back(w);
            }
        }
    }
    return visited == n;
}

void Topology::write_edge_list(std::ostream& out) const
{
    const std::uint32_t n = size();
    for (std::uint32_t i = 0; i < n; ++i) {
        for (const std::uint32_t j : neighbors(i)) {
            if (i < j) {
                out << i << ' ' << j << '\n';
            }
        }
    }
}

} // namespace popvote
