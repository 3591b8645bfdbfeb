#include <cmath>
#include <set>

#include "cdn/model.hpp"
#include "doctest.h"

using namespace cdn;
using nn::Tensor;

namespace {

Matrix gaussian_data(size_t m, size_t n, uint64_t seed) {
    Rng rng(seed);
    Matrix d(m, n);
    for (auto& x : d.data) x = rng.normal();
    return d;
}

CdnConfig tiny_config() {
    CdnConfig cfg;
    cfg.d = 8;
    cfg.structure_layers = 1;
    cfg.diff_layers = 1;
    cfg.n_max = 16;
    cfg.dropout = 0.0;
    cfg.t = 3;
    cfg.k = 3;
    return cfg;
}

}  // namespace

TEST_CASE("cdn config json is strict and round-trips") {
    CdnConfig cfg = cdn_config_from_json(R"({"d": 32, "variant": "cat", "t": 7})");
    CHECK(cfg.d == 32);
    CHECK(cfg.variant == CdnVariant::Cat);
    CHECK(cfg.t == 7);
    CHECK(cfg.resolved_diff_layers() == 3);
    CHECK(cfg.diff_width() == 64);
    CHECK_THROWS(cdn_config_from_json(R"({"d": 32, "bogus": 1})"));
    CdnConfig back = cdn_config_from_json(cdn_config_to_json(cfg));
    CHECK(back.d == cfg.d);
    CHECK(back.variant == cfg.variant);
    CHECK(back.t == cfg.t);
}

TEST_CASE("node permutation is an injection into the table") {
    Rng rng(3);
    auto perm = sample_node_permutation(5, 16, rng);
    REQUIRE(perm.size() == 5);
    std::set<int> uniq(perm.begin(), perm.end());
    CHECK(uniq.size() == 5);
    for (int v : perm) {
        CHECK(v >= 0);
        CHECK(v < 16);
    }
}

TEST_CASE("featurize_pair is deterministic with the expected shapes") {
    CdnConfig cfg = tiny_config();
    Matrix obs = gaussian_data(80, 4, 5), intv = gaussian_data(40, 4, 7);
    FeatureBundle a = featurize_pair(obs, intv, cfg, 11);
    FeatureBundle b = featurize_pair(obs, intv, cfg, 11);
    CHECK(a.rho_obs.data == b.rho_obs.data);
    CHECK(a.local_obs.subsets == b.local_obs.subsets);
    CHECK(a.local_int.subsets == b.local_int.subsets);
    CHECK(a.rho_obs.rows == 4);
    CHECK(a.moments_obs.rows == 4);
    CHECK(a.moments_obs.cols == 2);
    CHECK(a.local_obs.subsets.size() == 3);
}

TEST_CASE("model forward produces finite outputs of the right shapes") {
    CdnConfig cfg = tiny_config();
    Matrix obs = gaussian_data(80, 4, 13), intv = gaussian_data(40, 4, 17);
    FeatureBundle fb = featurize_pair(obs, intv, cfg, 19);
    auto params = make_params(cfg, 23);
    Rng perm_rng(29), drop_rng(31);
    auto perm = sample_node_permutation(4, cfg.n_max, perm_rng);
    ModelOutput out = model_forward(fb, perm, cfg, params, false, drop_rng);
    REQUIRE(out.pairs.size() == 6);
    CHECK(out.edge_logits_obs.shape() == nn::Shape{6, 3});
    CHECK(out.edge_logits_int.shape() == nn::Shape{6, 3});
    CHECK(out.target_logits.shape() == nn::Shape{4});
    for (double v : out.target_logits.values()) CHECK(std::isfinite(v));
    for (double v : out.edge_logits_obs.values()) CHECK(std::isfinite(v));
}

TEST_CASE("losses on uniform logits hit the entropy constants") {
    ModelOutput out;
    out.pairs = {{0, 1}, {0, 2}, {1, 2}};
    out.edge_logits_obs = Tensor({3, 3}, 0.0, true);
    out.edge_logits_int = Tensor({3, 3}, 0.0, true);
    out.target_logits = Tensor({3}, 0.0, true);
    Dag g_obs;
    g_obs.n = 3;
    g_obs.edges = {{0, 1}};
    Dag g_int = g_obs;
    Losses l = compute_losses(out, g_obs, g_int, {1});
    CHECK(l.l_g.scalar() == doctest::Approx(2.0 * std::log(3.0)).epsilon(1e-12));
    CHECK(l.l_i.scalar() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(l.total.scalar() == doctest::Approx(2.0 * std::log(3.0) + std::log(2.0)));
}

TEST_CASE("identical sides give node-symmetric diff logits") {
    CdnConfig cfg = tiny_config();
    Matrix obs = gaussian_data(60, 4, 37);
    FeatureBundle fb = featurize_pair(obs, obs, cfg, 41);
    // force bit-identical sides (subset sampling seeds differ per side)
    fb.rho_int = fb.rho_obs;
    fb.moments_int = fb.moments_obs;
    fb.local_int = fb.local_obs;
    auto params = make_params(cfg, 43);
    Rng perm_rng(47), drop_rng(53);
    auto perm = sample_node_permutation(4, cfg.n_max, perm_rng);
    ModelOutput out = model_forward(fb, perm, cfg, params, false, drop_rng);
    // h_obs == h_int so the difference stream is all-zero; every node sees the
    // same tokens and the logits collapse to a single value
    double first = out.target_logits.values()[0];
    for (double v : out.target_logits.values())
        CHECK(v == doctest::Approx(first).epsilon(1e-9));
}

TEST_CASE("target logits are equivariant under node relabeling") {
    CdnConfig cfg = tiny_config();
    Matrix obs = gaussian_data(80, 4, 59), intv = gaussian_data(40, 4, 61);
    FeatureBundle fb = featurize_pair(obs, intv, cfg, 67);
    auto params = make_params(cfg, 71);
    Rng perm_rng(73), drop_rng(79);
    auto perm = sample_node_permutation(4, cfg.n_max, perm_rng);
    Rng drop2(79);
    ModelOutput base = model_forward(fb, perm, cfg, params, false, drop_rng);

    std::vector<int> sigma = {2, 0, 3, 1};  // old = sigma[new]
    std::vector<int> inv(4);
    for (int a = 0; a < 4; ++a) inv[sigma[a]] = a;

    FeatureBundle pfb;
    pfb.rho_obs = Matrix(4, 4);
    pfb.rho_int = Matrix(4, 4);
    pfb.moments_obs = Matrix(4, 2);
    pfb.moments_int = Matrix(4, 2);
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            pfb.rho_obs(a, b) = fb.rho_obs(sigma[a], sigma[b]);
            pfb.rho_int(a, b) = fb.rho_int(sigma[a], sigma[b]);
        }
        for (int c = 0; c < 2; ++c) {
            pfb.moments_obs(a, c) = fb.moments_obs(sigma[a], c);
            pfb.moments_int(a, c) = fb.moments_int(sigma[a], c);
        }
    }
    auto relabel = [&](const LocalEstimates& src) {
        LocalEstimates dst = src;
        for (auto& subset : dst.subsets)
            for (auto& v : subset) v = inv[v];
        dst.pair_index.clear();
        dst.build_pair_index();
        return dst;
    };
    pfb.local_obs = relabel(fb.local_obs);
    pfb.local_int = relabel(fb.local_int);
    std::vector<int> pperm(4);
    for (int a = 0; a < 4; ++a) pperm[a] = perm[sigma[a]];

    ModelOutput moved = model_forward(pfb, pperm, cfg, params, false, drop2);
    for (int a = 0; a < 4; ++a)
        CHECK(std::abs(moved.target_logits.values()[a] -
                       base.target_logits.values()[sigma[a]]) < 1e-4);
}

TEST_CASE("end-to-end loss gradchecks through the whole network") {
    CdnConfig cfg = tiny_config();
    Matrix obs = gaussian_data(60, 4, 83), intv = gaussian_data(30, 4, 89);
    FeatureBundle fb = featurize_pair(obs, intv, cfg, 97);
    auto params = make_params(cfg, 101);
    Rng perm_rng(103);
    auto perm = sample_node_permutation(4, cfg.n_max, perm_rng);
    Dag g_obs;
    g_obs.n = 4;
    g_obs.edges = {{0, 1}, {1, 3}};
    Dag g_int = g_obs;
    auto loss_of = [&]() {
        Rng drop_rng(107);
        ModelOutput out = model_forward(fb, perm, cfg, params, false, drop_rng);
        return compute_losses(out, g_obs, g_int, {3}).total;
    };
    for (const char* name : {"head_w", "embed.mark_table", "s0.row.wq"}) {
        Tensor& p = params.at(name);
        auto f = [&](Tensor&) { return loss_of(); };
        CHECK(nn::grad_check(f, p) < 1e-4);
    }
}

TEST_CASE("prediction ensembles are deterministic probabilities") {
    CdnConfig cfg = tiny_config();
    Matrix obs = gaussian_data(80, 4, 109), intv = gaussian_data(40, 4, 113);
    auto params = make_params(cfg, 127);
    auto a = predict_targets(obs, intv, cfg, params, 131, 2);
    auto b = predict_targets(obs, intv, cfg, params, 131, 2);
    REQUIRE(a.size() == 4);
    CHECK(a == b);
    for (double p : a) {
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
}
