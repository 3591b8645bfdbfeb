#include <algorithm>
#include <set>

#include "cdn/fci.hpp"
#include "cdn/rng.hpp"
#include "cdn/scm.hpp"
#include "doctest.h"

using namespace cdn;

namespace {

PagMatrix oracle_fci(const Dag& g) {
    DSepCiTest test(g);
    return fci(test);
}

}  // namespace

TEST_CASE("fci oracle on a chain leaves all marks circled") {
    Dag g;  // 0 -> 1 -> 2
    g.n = 3;
    g.edges = {{0, 1}, {1, 2}};
    PagMatrix pag = oracle_fci(g);
    CHECK(pag.adjacent(0, 1));
    CHECK(pag.adjacent(1, 2));
    CHECK(!pag.adjacent(0, 2));
    CHECK(pag.mark(0, 1) == Mark::Circle);
    CHECK(pag.mark(1, 0) == Mark::Circle);
    CHECK(pag.mark(1, 2) == Mark::Circle);
    CHECK(pag.mark(2, 1) == Mark::Circle);
}

TEST_CASE("fci oracle on a fork matches the chain equivalence class") {
    Dag g;  // 0 <- 1 -> 2
    g.n = 3;
    g.edges = {{1, 0}, {1, 2}};
    PagMatrix pag = oracle_fci(g);
    CHECK(pag.adjacent(0, 1));
    CHECK(pag.adjacent(1, 2));
    CHECK(!pag.adjacent(0, 2));
    CHECK(pag.mark(0, 1) == Mark::Circle);
    CHECK(pag.mark(2, 1) == Mark::Circle);
}

TEST_CASE("fci oracle orients the collider") {
    Dag g;  // 0 -> 2 <- 1
    g.n = 3;
    g.edges = {{0, 2}, {1, 2}};
    PagMatrix pag = oracle_fci(g);
    CHECK(!pag.adjacent(0, 1));
    CHECK(pag.mark(0, 2) == Mark::Arrow);
    CHECK(pag.mark(1, 2) == Mark::Arrow);
    CHECK(pag.mark(2, 0) == Mark::Circle);
    CHECK(pag.mark(2, 1) == Mark::Circle);
}

TEST_CASE("fci oracle applies R1 below the collider of a Y graph") {
    Dag g;  // 0 -> 2 <- 1, 2 -> 3
    g.n = 4;
    g.edges = {{0, 2}, {1, 2}, {2, 3}};
    PagMatrix pag = oracle_fci(g);
    CHECK(pag.mark(0, 2) == Mark::Arrow);
    CHECK(pag.mark(1, 2) == Mark::Arrow);
    // R1: 0 *-> 2 o-* 3 with 0,3 non-adjacent forces 2 -> 3
    CHECK(pag.mark(2, 3) == Mark::Arrow);
    CHECK(pag.mark(3, 2) == Mark::Tail);
    CHECK(!pag.adjacent(0, 3));
    CHECK(!pag.adjacent(1, 3));
}

TEST_CASE("fci on independent columns returns an empty graph") {
    Rng rng(101);
    Matrix d(5000, 4);
    for (auto& x : d.data) x = rng.normal();
    PagMatrix pag = fci(d, 0.01);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (i != j) CHECK(!pag.adjacent(i, j));
}

TEST_CASE("fci skeleton recovers a sampled linear chain") {
    Scm scm;
    scm.dag.n = 3;
    scm.dag.edges = {{0, 1}, {1, 2}};
    scm.mech.family = MechanismFamily::Linear;
    scm.mech.nodes.resize(3);
    scm.mech.nodes[1].parents = {0};
    scm.mech.nodes[1].w = {0.9};
    scm.mech.nodes[1].noise_std = 0.3;
    scm.mech.nodes[2].parents = {1};
    scm.mech.nodes[2].w = {0.9};
    scm.mech.nodes[2].noise_std = 0.3;
    Matrix d = sample_data(scm, 20000, 103);
    PagMatrix pag = fci(d, 0.01);
    CHECK(pag.adjacent(0, 1));
    CHECK(pag.adjacent(1, 2));
    CHECK(!pag.adjacent(0, 2));
}

TEST_CASE("sample_subsets returns valid distinct index sets") {
    Rng rng(107);
    Matrix d(500, 8);
    for (auto& x : d.data) x = rng.normal();
    Matrix rho = summary_stats(d).rho;
    auto subsets = sample_subsets(rho, 4, 25, 7);
    REQUIRE(subsets.size() == 25);
    for (const auto& s : subsets) {
        REQUIRE(s.size() == 4);
        std::set<int> uniq(s.begin(), s.end());
        CHECK(uniq.size() == 4);
        for (int v : s) {
            CHECK(v >= 0);
            CHECK(v < 8);
        }
    }
    CHECK(sample_subsets(rho, 4, 25, 7) == subsets);
}

TEST_CASE("subset growth follows strong correlations") {
    // two independent strongly-correlated blocks {0..3} and {4..7}
    Rng rng(109);
    Matrix d(4000, 8);
    for (size_t i = 0; i < d.rows; ++i) {
        double a = rng.normal(), b = rng.normal();
        for (int j = 0; j < 4; ++j) d(i, j) = a + 0.1 * rng.normal();
        for (int j = 4; j < 8; ++j) d(i, j) = b + 0.1 * rng.normal();
    }
    Matrix rho = summary_stats(d).rho;
    auto subsets = sample_subsets(rho, 4, 200, 11);
    int pure = 0;
    for (const auto& s : subsets) {
        bool lo = std::all_of(s.begin(), s.end(), [](int v) { return v < 4; });
        bool hi = std::all_of(s.begin(), s.end(), [](int v) { return v >= 4; });
        if (lo || hi) ++pure;
    }
    CHECK(pure > 180);
}

TEST_CASE("local estimates are deterministic and index covered pairs") {
    Rng rng(113);
    Matrix d(800, 6);
    for (auto& x : d.data) x = rng.normal();
    LocalEstimates a = local_estimates(d, 3, 12, 0.05, 31);
    LocalEstimates b = local_estimates(d, 3, 12, 0.05, 31);
    REQUIRE(a.subsets.size() == 12);
    CHECK(a.subsets == b.subsets);
    CHECK(a.n == 6);
    CHECK(a.k == 3);
    for (const auto& [pair, slots] : a.pair_index) {
        CHECK(pair.first != pair.second);
        for (int t : slots) {
            const auto& s = a.subsets[t];
            CHECK(std::count(s.begin(), s.end(), pair.first) == 1);
            CHECK(std::count(s.begin(), s.end(), pair.second) == 1);
        }
    }
    // every subset contributes all of its ordered pairs to the index
    for (size_t t = 0; t < a.subsets.size(); ++t)
        for (int i : a.subsets[t])
            for (int j : a.subsets[t])
                if (i != j) {
                    auto it = a.pair_index.find({i, j});
                    REQUIRE(it != a.pair_index.end());
                    CHECK(std::count(it->second.begin(), it->second.end(),
                                     static_cast<int>(t)) == 1);
                }
}
