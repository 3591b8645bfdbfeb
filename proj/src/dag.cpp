#include "cdn/dag.hpp"

#include <queue>
#include <stdexcept>

namespace cdn {

std::vector<int> Dag::parents(int v) const {
    std::vector<int> out;
    for (const auto& e : edges)
        if (e.second == v) out.push_back(e.first);
    return out;
}

std::vector<int> Dag::children(int v) const {
    std::vector<int> out;
    for (const auto& e : edges)
        if (e.first == v) out.push_back(e.second);
    return out;
}

std::vector<int> Dag::topological_order() const {
    std::vector<int> indeg(n, 0);
    std::vector<std::vector<int>> adj(n);
    for (const auto& e : edges) {
        adj[e.first].push_back(e.second);
        indeg[e.second]++;
    }
    std::queue<int> q;
    for (int i = 0; i < n; ++i)
        if (indeg[i] == 0) q.push(i);
    std::vector<int> order;
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        order.push_back(u);
        for (int v : adj[u])
            if (--indeg[v] == 0) q.push(v);
    }
    if (static_cast<int>(order.size()) != n)
        throw std::runtime_error("Dag::topological_order: graph has a cycle");
    return order;
}

bool Dag::is_acyclic() const {
    try {
        topological_order();
        return true;
    } catch (const std::runtime_error&) {
        return false;
    }
}

std::vector<std::vector<int>> Dag::adjacency() const {
    std::vector<std::vector<int>> a(n, std::vector<int>(n, 0));
    for (const auto& e : edges) a[e.first][e.second] = 1;
    return a;
}

Dag sample_er_dag(int n, int expected_edges, uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_er_dag: n must be positive");
    long max_edges = static_cast<long>(n) * (n - 1) / 2;
    if (expected_edges < 0 || expected_edges > max_edges)
        throw std::invalid_argument("sample_er_dag: expected_edges exceeds n(n-1)/2");

    Rng rng(seed);
    std::vector<int> order = rng.permutation(n);  // order[k] = node at topological rank k
    double p = max_edges > 0 ? static_cast<double>(expected_edges) / max_edges : 0.0;

    Dag g;
    g.n = n;
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            if (rng.uniform() < p) g.edges.insert({order[a], order[b]});
        }
    }
    return g;
}

bool d_separated(const Dag& g, int x, int y, const std::vector<int>& z) {
    std::vector<char> in_z(g.n, 0);
    for (int v : z) in_z[v] = 1;

    // ancestors of z (for collider opening)
    std::vector<char> anc_z(g.n, 0);
    {
        std::queue<int> q;
        for (int v : z) {
            anc_z[v] = 1;
            q.push(v);
        }
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int p : g.parents(u)) {
                if (!anc_z[p]) {
                    anc_z[p] = 1;
                    q.push(p);
                }
            }
        }
    }

    // reachability over (node, direction) states; direction: 0 = arriving from child
    // (moving up), 1 = arriving from parent (moving down)
    std::vector<std::vector<char>> seen(g.n, std::vector<char>(2, 0));
    std::queue<std::pair<int, int>> q;
    q.push({x, 0});
    seen[x][0] = 1;
    while (!q.empty()) {
        auto [u, dir] = q.front();
        q.pop();
        if (u == y) return false;
        if (dir == 0) {
            // trail arrived against edge direction: may go up to parents and down to children
            if (!in_z[u]) {
                for (int p : g.parents(u))
                    if (!seen[p][0]) { seen[p][0] = 1; q.push({p, 0}); }
                for (int c : g.children(u))
                    if (!seen[c][1]) { seen[c][1] = 1; q.push({c, 1}); }
            }
        } else {
            // arrived along edge direction (u is a child on the trail)
            if (!in_z[u]) {
                for (int c : g.children(u))
                    if (!seen[c][1]) { seen[c][1] = 1; q.push({c, 1}); }
            }
            if (anc_z[u]) {  // collider open when u (or a descendant) is conditioned on
                for (int p : g.parents(u))
                    if (!seen[p][0]) { seen[p][0] = 1; q.push({p, 0}); }
            }
        }
    }
    return true;
}

}  // namespace cdn
