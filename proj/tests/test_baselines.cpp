#include <algorithm>
#include <cmath>

#include "cdn/baselines.hpp"
#include "cdn/scm.hpp"
#include "doctest.h"

using namespace cdn;

namespace {

Scm chain4() {
    Scm scm;
    scm.dag.n = 4;
    scm.dag.edges = {{0, 1}, {1, 2}, {2, 3}};
    scm.mech.family = MechanismFamily::Linear;
    scm.mech.nodes.resize(4);
    for (int v = 1; v < 4; ++v) {
        scm.mech.nodes[v].parents = {v - 1};
        scm.mech.nodes[v].w = {0.9};
        scm.mech.nodes[v].noise_std = 0.3;
    }
    return scm;
}

int argmax(const std::vector<double>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST_CASE("hard detector counts severed in-edges") {
    Dag g_obs;
    g_obs.n = 4;
    g_obs.edges = {{0, 2}, {1, 2}, {2, 3}};
    Dag g_int = g_obs;
    g_int.edges.erase({0, 2});
    g_int.edges.erase({1, 2});
    auto scores = analytic_hard_detector(g_obs, g_int);
    CHECK(scores == std::vector<double>{0, 0, 2, 0});
    // added edges never count negatively
    Dag g_extra = g_obs;
    g_extra.edges.insert({0, 3});
    CHECK(analytic_hard_detector(g_obs, g_extra) ==
          std::vector<double>{0, 0, 0, 0});
}

TEST_CASE("soft detector counts exactly the qualifying entries") {
    SummaryStats so, si;
    so.n = si.n = 3;
    so.rho = Matrix(3, 3);
    so.cov = Matrix(3, 3);
    for (int i = 0; i < 3; ++i) {
        so.rho(i, i) = 1.0;
        so.cov(i, i) = 1.0;
    }
    si = so;
    si.cov(0, 0) = 2.0;           // counts once for node 0
    si.cov(0, 1) = si.cov(1, 0) = 0.8;  // counts for nodes 0 and 1
    si.rho(1, 2) = si.rho(2, 1) = 0.9;  // correlation moved: entry disqualified
    si.cov(1, 2) = si.cov(2, 1) = 0.7;
    auto scores = analytic_soft_detector(so, si, 0.1, 0.5);
    CHECK(scores == std::vector<double>{2, 1, 0});
    // an infinite threshold silences everything
    auto silent = analytic_soft_detector(so, si, 0.1, 1e18);
    CHECK(silent == std::vector<double>{0, 0, 0});
}

TEST_CASE("default soft thresholds follow the sample-size law") {
    Rng rng(3);
    Matrix obs(400, 3), intv(100, 3);
    for (auto& x : obs.data) x = rng.normal();
    for (auto& x : intv.data) x = rng.normal();
    SoftThresholds th = default_soft_thresholds(obs, intv, 50, 9);
    CHECK(th.eps_r == doctest::Approx(3.0 / std::sqrt(100.0)));
    REQUIRE(th.eps_s.rows == 3);
    REQUIRE(th.eps_s.cols == 3);
    for (double v : th.eps_s.data) CHECK(v > 0.0);
    SoftThresholds again = default_soft_thresholds(obs, intv, 50, 9);
    CHECK(again.eps_s.data == th.eps_s.data);
}

TEST_CASE("soft detector finds a scaled sink on a linear chain") {
    Scm scm = chain4();
    InterventionRegime regime;
    regime.targets.push_back({3, InterventionKind::Scale, -1, 1, 0, 3.0});
    auto [scm_int, g_int] = mutilate(scm, regime);
    Matrix obs = sample_data(scm, 50000, 11);
    Matrix intv = sample_data(scm_int, 50000, 13);
    SoftThresholds th = default_soft_thresholds(obs, intv, 50, 17);
    auto scores = analytic_soft_detector(summary_stats(obs), summary_stats(intv),
                                         th.eps_r, th.eps_s);
    CHECK(argmax(scores) == 3);
    for (int i = 0; i < 3; ++i) CHECK(scores[3] > scores[i]);
}

TEST_CASE("mb+ci boundary is symmetric in the domain label and empty under "
          "identical regimes") {
    Scm scm = chain4();
    Matrix a = sample_data(scm, 3000, 19);
    Matrix b = sample_data(scm, 3000, 23);
    auto fwd = mb_ci_boundary(a, b);
    auto rev = mb_ci_boundary(b, a);
    CHECK(fwd == rev);
    auto scores = mb_ci_scores(a, b);
    REQUIRE(scores.size() == 4);
    for (double s : scores) {
        CHECK(s >= 0.0);
        CHECK(std::isfinite(s));
    }
    // an absurd penalty empties the boundary
    CHECK(mb_ci_boundary(a, b, 1e6).empty());
    CHECK(mb_ci_scores(a, b, 1e6) == std::vector<double>{0, 0, 0, 0});
}

TEST_CASE("mb+ci ranks a shifted root first") {
    // shifting the root changes only the root's conditional; downstream
    // conditionals given parents are untouched
    Scm scm = chain4();
    InterventionRegime regime;
    regime.targets.push_back({0, InterventionKind::Shift, -1, 1, 3.0, 1});
    auto [scm_int, g_int] = mutilate(scm, regime);
    Matrix obs = sample_data(scm, 4000, 29);
    Matrix intv = sample_data(scm_int, 4000, 31);
    auto scores = mb_ci_scores(obs, intv);
    CHECK(argmax(scores) == 0);
    for (int i = 1; i < 4; ++i) CHECK(scores[0] > scores[i] + 0.1);
}

TEST_CASE("dge scores a single shifted column far above the rest") {
    Rng rng(37);
    Matrix obs(500, 4), intv(250, 4);
    for (auto& x : obs.data) x = rng.normal();
    for (size_t i = 0; i < intv.rows; ++i)
        for (int j = 0; j < 4; ++j)
            intv(i, j) = rng.normal() + (j == 2 ? 2.5 : 0.0);
    auto scores = dge_scores(obs, intv);
    REQUIRE(scores.size() == 4);
    CHECK(argmax(scores) == 2);
    for (int j = 0; j < 4; ++j)
        if (j != 2) CHECK(scores[2] > scores[j] + 5.0);
    for (double s : scores) CHECK(std::isfinite(s));
}

TEST_CASE("dge breaks exact p-value ties by fold change") {
    // both columns have the same extreme rank configuration, so the adjusted
    // p-values tie exactly; only the fold change separates them
    Matrix obs(4, 2), intv(4, 2);
    double o0[] = {1, 2, 3, 4}, i0[] = {5, 6, 7, 8};
    double o1[] = {10, 20, 30, 40}, i1[] = {400, 600, 800, 1000};
    for (int r = 0; r < 4; ++r) {
        obs(r, 0) = o0[r];
        intv(r, 0) = i0[r];
        obs(r, 1) = o1[r];
        intv(r, 1) = i1[r];
    }
    auto scores = dge_scores(obs, intv);
    CHECK(scores[1] > scores[0]);
    CHECK(scores[1] - scores[0] < 1e-6);  // tie-break term is tiny
}
