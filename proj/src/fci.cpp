#include "cdn/fci.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cdn {

FisherZCiTest::FisherZCiTest(const Matrix& data, double alpha)
    : m_(data.rows), alpha_(alpha) {
    SummaryStats st = summary_stats(data);
    rho_ = st.rho;
    degenerate_.assign(st.n, 0);
    for (int j = 0; j < st.n; ++j)
        if (st.var[j] <= 0.0) degenerate_[j] = 1;
}

FisherZCiTest::FisherZCiTest(Matrix rho, size_t m, double alpha)
    : rho_(std::move(rho)), m_(m), alpha_(alpha) {
    degenerate_.assign(rho_.rows, 0);
}

bool FisherZCiTest::independent(int i, int j, const std::vector<int>& s) {
    if (degenerate_[i] || degenerate_[j]) return true;  // constant column: isolated
    CITestResult r = fisher_z_test_from_corr(rho_, m_, i, j, s, alpha_);
    if (r.degenerate) return false;
    return r.independent;
}

namespace {

using Sepsets = std::map<std::pair<int, int>, std::vector<int>>;

std::pair<int, int> key(int i, int j) { return {std::min(i, j), std::max(i, j)}; }

// enumerate all size-l subsets of pool, invoking fn; fn returns true to stop
template <typename Fn>
bool for_each_subset(const std::vector<int>& pool, int l, Fn&& fn) {
    const int n = static_cast<int>(pool.size());
    if (l > n) return false;
    std::vector<int> idx(l);
    for (int i = 0; i < l; ++i) idx[i] = i;
    std::vector<int> subset(l);
    while (true) {
        for (int i = 0; i < l; ++i) subset[i] = pool[idx[i]];
        if (fn(subset)) return true;
        int i = l - 1;
        while (i >= 0 && idx[i] == n - l + i) --i;
        if (i < 0) return false;
        ++idx[i];
        for (int j = i + 1; j < l; ++j) idx[j] = idx[j - 1] + 1;
    }
}

std::vector<int> adjacent_nodes(const PagMatrix& g, int v) {
    std::vector<int> out;
    for (int u = 0; u < g.size(); ++u)
        if (g.adjacent(v, u)) out.push_back(u);
    return out;
}

void skeleton_search(CiTest& test, PagMatrix& g, Sepsets& seps, int max_cond) {
    const int k = g.size();
    for (int l = 0; l <= max_cond; ++l) {
        bool any_testable = false;
        for (int i = 0; i < k; ++i) {
            for (int j = i + 1; j < k; ++j) {
                if (!g.adjacent(i, j)) continue;
                // neighbours of either endpoint, excluding the other
                bool removed = false;
                for (int side = 0; side < 2 && !removed; ++side) {
                    int a = side == 0 ? i : j;
                    int b = side == 0 ? j : i;
                    std::vector<int> pool = adjacent_nodes(g, a);
                    pool.erase(std::remove(pool.begin(), pool.end(), b), pool.end());
                    if (static_cast<int>(pool.size()) >= l) any_testable = true;
                    removed = for_each_subset(pool, l, [&](const std::vector<int>& s) {
                        if (test.independent(i, j, s)) {
                            g.remove_edge(i, j);
                            seps[key(i, j)] = s;
                            return true;
                        }
                        return false;
                    });
                }
            }
        }
        if (!any_testable) break;
    }
}

bool in_sepset(const Sepsets& seps, int i, int j, int v) {
    auto it = seps.find(key(i, j));
    if (it == seps.end()) return false;
    return std::find(it->second.begin(), it->second.end(), v) != it->second.end();
}

void orient_colliders(PagMatrix& g, const Sepsets& seps) {
    const int k = g.size();
    for (int m = 0; m < k; ++m) {
        for (int i = 0; i < k; ++i) {
            if (i == m || !g.adjacent(i, m)) continue;
            for (int j = i + 1; j < k; ++j) {
                if (j == m || !g.adjacent(j, m) || g.adjacent(i, j)) continue;
                if (!in_sepset(seps, i, j, m)) {
                    g.set_mark(i, m, Mark::Arrow);
                    g.set_mark(j, m, Mark::Arrow);
                }
            }
        }
    }
}

// Possible-D-SEP(v): nodes reachable along paths where every interior node is a
// collider on the path or lies in a triangle with its path neighbours.
std::vector<int> possible_d_sep(const PagMatrix& g, int v) {
    const int k = g.size();
    std::vector<std::vector<char>> seen(k, std::vector<char>(k, 0));  // (prev, cur)
    std::queue<std::pair<int, int>> q;
    std::vector<char> reach(k, 0);
    for (int u : adjacent_nodes(g, v)) {
        seen[v][u] = 1;
        reach[u] = 1;
        q.push({v, u});
    }
    while (!q.empty()) {
        auto [prev, cur] = q.front();
        q.pop();
        for (int nxt : adjacent_nodes(g, cur)) {
            if (nxt == prev || nxt == v) continue;
            bool collider = g.mark(prev, cur) == Mark::Arrow &&
                            g.mark(nxt, cur) == Mark::Arrow;
            bool triangle = g.adjacent(prev, nxt);
            if ((collider || triangle) && !seen[cur][nxt]) {
                seen[cur][nxt] = 1;
                reach[nxt] = 1;
                q.push({cur, nxt});
            }
        }
    }
    std::vector<int> out;
    for (int u = 0; u < k; ++u)
        if (reach[u] && u != v) out.push_back(u);
    return out;
}

void pdsep_prune(CiTest& test, PagMatrix& g, Sepsets& seps, int max_cond) {
    const int k = g.size();
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            if (!g.adjacent(i, j)) continue;
            bool removed = false;
            for (int side = 0; side < 2 && !removed; ++side) {
                int a = side == 0 ? i : j;
                std::vector<int> pool = possible_d_sep(g, a);
                pool.erase(std::remove(pool.begin(), pool.end(), i), pool.end());
                pool.erase(std::remove(pool.begin(), pool.end(), j), pool.end());
                for (int l = 1; l <= max_cond && !removed; ++l) {
                    removed = for_each_subset(pool, l, [&](const std::vector<int>& s) {
                        if (test.independent(i, j, s)) {
                            g.remove_edge(i, j);
                            seps[key(i, j)] = s;
                            return true;
                        }
                        return false;
                    });
                }
            }
        }
    }
}

// Zhang's rules R1-R4; returns true if any mark changed.
bool apply_r1_r3(PagMatrix& g) {
    const int k = g.size();
    bool changed = false;
    // R1: a*->b o-* c, a and c non-adjacent  =>  b -> c
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            if (a == b || !g.adjacent(a, b) || g.mark(a, b) != Mark::Arrow) continue;
            for (int c = 0; c < k; ++c) {
                if (c == a || c == b || !g.adjacent(b, c) || g.adjacent(a, c)) continue;
                if (g.mark(c, b) == Mark::Circle) {
                    g.set_mark(c, b, Mark::Tail);
                    g.set_mark(b, c, Mark::Arrow);
                    changed = true;
                }
            }
        }
    // R2: (a -> b *-> c) or (a *-> b -> c), a *-o c  =>  a *-> c
    for (int a = 0; a < k; ++a)
        for (int c = 0; c < k; ++c) {
            if (a == c || !g.adjacent(a, c) || g.mark(a, c) != Mark::Circle) continue;
            for (int b = 0; b < k; ++b) {
                if (b == a || b == c || !g.adjacent(a, b) || !g.adjacent(b, c)) continue;
                bool chain1 = g.mark(a, b) == Mark::Arrow && g.mark(b, a) == Mark::Tail &&
                              g.mark(b, c) == Mark::Arrow;
                bool chain2 = g.mark(a, b) == Mark::Arrow &&
                              g.mark(b, c) == Mark::Arrow && g.mark(c, b) == Mark::Tail;
                if (chain1 || chain2) {
                    g.set_mark(a, c, Mark::Arrow);
                    changed = true;
                    break;
                }
            }
        }
    // R3: a*->b<-*c, a*-o d o-*c, a and c non-adjacent, d*-o b  =>  d *-> b
    for (int d = 0; d < k; ++d)
        for (int b = 0; b < k; ++b) {
            if (d == b || !g.adjacent(d, b) || g.mark(d, b) != Mark::Circle) continue;
            bool done = false;
            for (int a = 0; a < k && !done; ++a) {
                if (a == d || a == b) continue;
                if (!g.adjacent(a, b) || g.mark(a, b) != Mark::Arrow) continue;
                if (!g.adjacent(a, d) || g.mark(a, d) != Mark::Circle) continue;
                for (int c = 0; c < k; ++c) {
                    if (c == a || c == b || c == d || g.adjacent(a, c)) continue;
                    if (!g.adjacent(c, b) || g.mark(c, b) != Mark::Arrow) continue;
                    if (!g.adjacent(c, d) || g.mark(c, d) != Mark::Circle) continue;
                    g.set_mark(d, b, Mark::Arrow);
                    changed = true;
                    done = true;
                    break;
                }
            }
        }
    return changed;
}

// R4: discriminating path <theta, ..., a, b, c> for b with b o-* c
bool apply_r4(PagMatrix& g, const Sepsets& seps) {
    const int k = g.size();
    bool changed = false;
    for (int b = 0; b < k; ++b) {
        for (int c = 0; c < k; ++c) {
            if (b == c || !g.adjacent(b, c) || g.mark(c, b) != Mark::Circle) continue;
            // DFS over partial paths [b, v1, v2, ...] extending away from b;
            // every interior node is a collider on the path and a parent of c.
            std::vector<std::vector<int>> stack;
            for (int a = 0; a < k; ++a) {
                if (a == b || a == c || !g.adjacent(a, b)) continue;
                if (g.mark(a, b) != Mark::Arrow) continue;  // a *-> b
                bool a_parent_c = g.adjacent(a, c) && g.mark(a, c) == Mark::Arrow &&
                                  g.mark(c, a) == Mark::Tail;
                if (!a_parent_c) continue;
                stack.push_back({b, a});
            }
            bool oriented = false;
            while (!stack.empty() && !oriented) {
                std::vector<int> path = stack.back();
                stack.pop_back();
                int last = path.back();
                int prev = path[path.size() - 2];
                for (int d = 0; d < k; ++d) {
                    if (d == c || !g.adjacent(d, last)) continue;
                    if (std::find(path.begin(), path.end(), d) != path.end()) continue;
                    if (g.mark(d, last) != Mark::Arrow) continue;   // d *-> last
                    if (g.mark(prev, last) != Mark::Arrow) continue;  // collider at last
                    if (!g.adjacent(d, c)) {
                        // d is theta: discriminating path found
                        if (in_sepset(seps, d, c, b)) {
                            g.set_mark(c, b, Mark::Tail);
                            g.set_mark(b, c, Mark::Arrow);
                        } else {
                            int a = path[1];
                            g.set_mark(a, b, Mark::Arrow);
                            g.set_mark(b, a, Mark::Arrow);
                            g.set_mark(c, b, Mark::Arrow);
                            g.set_mark(b, c, Mark::Arrow);
                        }
                        changed = true;
                        oriented = true;
                        break;
                    }
                    bool d_parent_c = g.mark(d, c) == Mark::Arrow &&
                                      g.mark(c, d) == Mark::Tail;
                    if (d_parent_c) {
                        std::vector<int> ext = path;
                        ext.push_back(d);
                        stack.push_back(std::move(ext));
                    }
                }
            }
        }
    }
    return changed;
}

void orientation_phase(PagMatrix& g, const Sepsets& seps) {
    orient_colliders(g, seps);
    bool changed = true;
    while (changed) {
        changed = apply_r1_r3(g);
        changed = apply_r4(g, seps) || changed;
    }
}

}  // namespace

PagMatrix fci(CiTest& test, const FciOptions& opts) {
    const int k = test.variable_count();
    if (k > 8) throw std::invalid_argument("fci: subset size limited to k <= 8");
    const int max_cond = opts.max_cond_size < 0 ? std::max(0, k - 2) : opts.max_cond_size;

    PagMatrix g(k);
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) g.add_edge(i, j, Mark::Circle, Mark::Circle);

    Sepsets seps;
    skeleton_search(test, g, seps, max_cond);
    orient_colliders(g, seps);
    pdsep_prune(test, g, seps, max_cond);

    // reset to circles and orient from the final skeleton
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            if (g.adjacent(i, j)) g.set_mark(i, j, Mark::Circle);
    orientation_phase(g, seps);
    return g;
}

PagMatrix fci(const Matrix& d_subset, double alpha, const FciOptions& opts) {
    FisherZCiTest test(d_subset, alpha);
    return fci(test, opts);
}

void LocalEstimates::build_pair_index() {
    pair_index.clear();
    for (size_t t = 0; t < subsets.size(); ++t) {
        const auto& sub = subsets[t];
        for (size_t a = 0; a < sub.size(); ++a)
            for (size_t b = 0; b < sub.size(); ++b)
                if (a != b) pair_index[{sub[a], sub[b]}].push_back(static_cast<int>(t));
    }
}

std::vector<std::vector<int>> sample_subsets(const Matrix& rho, int k, int t,
                                             uint64_t seed) {
    const int n = static_cast<int>(rho.rows);
    if (k > n) throw std::invalid_argument("sample_subsets: k > N");
    if (t < 1) throw std::invalid_argument("sample_subsets: T must be >= 1");
    Rng rng(seed);
    std::vector<std::vector<int>> out(t);
    std::vector<double> weight(n);
    for (int s = 0; s < t; ++s) {
        std::vector<int> subset;
        std::vector<char> in(n, 0);
        int seed_node = static_cast<int>(rng.below(n));
        subset.push_back(seed_node);
        in[seed_node] = 1;
        while (static_cast<int>(subset.size()) < k) {
            double total = 0.0;
            for (int v = 0; v < n; ++v) {
                if (in[v]) {
                    weight[v] = 0.0;
                    continue;
                }
                double w = 0.0;
                for (int u : subset) w = std::max(w, std::fabs(rho(u, v)));
                weight[v] = std::max(w, 1e-3);
                total += weight[v];
            }
            double r = rng.uniform() * total;
            int pick = -1;
            for (int v = 0; v < n; ++v) {
                if (in[v]) continue;
                r -= weight[v];
                if (r <= 0.0) {
                    pick = v;
                    break;
                }
            }
            if (pick < 0) {  // numerical edge: take the last available
                for (int v = n - 1; v >= 0; --v)
                    if (!in[v]) {
                        pick = v;
                        break;
                    }
            }
            subset.push_back(pick);
            in[pick] = 1;
        }
        std::sort(subset.begin(), subset.end());
        out[s] = std::move(subset);
    }
    return out;
}

LocalEstimates local_estimates(const Matrix& d, const SummaryStats& st, int k, int t,
                               double alpha, uint64_t seed) {
    LocalEstimates est;
    est.n = st.n;
    est.k = k;
    est.subsets = sample_subsets(st.rho, k, t, seed);
    est.pags.resize(t);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int s = 0; s < t; ++s) {
        const auto& sub = est.subsets[s];
        Matrix sub_rho(k, k);
        for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) sub_rho(a, b) = st.rho(sub[a], sub[b]);
        // zero-variance columns carry rho = 0 off-diagonal and fall out at l = 0
        FisherZCiTest test(std::move(sub_rho), d.rows, alpha);
        est.pags[s] = fci(test);
    }
    est.build_pair_index();
    return est;
}

LocalEstimates local_estimates(const Matrix& d, int k, int t, double alpha,
                               uint64_t seed) {
    SummaryStats st = summary_stats(d);
    return local_estimates(d, st, k, t, alpha, seed);
}

}  // namespace cdn
