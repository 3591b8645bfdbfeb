#pragma once

#include <set>
#include <utility>
#include <vector>

#include "cdn/rng.hpp"

namespace cdn {

// Directed acyclic graph over nodes 0..n-1. Edges are (parent, child).
struct Dag {
    int n = 0;
    std::set<std::pair<int, int>> edges;

    bool has_edge(int u, int v) const { return edges.count({u, v}) > 0; }
    std::vector<int> parents(int v) const;
    std::vector<int> children(int v) const;

    // Topological order; throws std::runtime_error if a cycle exists.
    std::vector<int> topological_order() const;
    bool is_acyclic() const;

    std::vector<std::vector<int>> adjacency() const;
};

// Erdos-Renyi DAG: each unordered pair included independently with probability
// expected_edges / (n(n-1)/2), oriented along a uniformly random topological order.
Dag sample_er_dag(int n, int expected_edges, uint64_t seed);

// d-separation of x and y given set z on the DAG (Bayes-ball).
bool d_separated(const Dag& g, int x, int y, const std::vector<int>& z);

}  // namespace cdn
