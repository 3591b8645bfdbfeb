#include <cmath>
#include <cstdio>

#include "cdn/attention.hpp"
#include "cdn/optim.hpp"
#include "cdn/tensor.hpp"
#include "doctest.h"

using namespace cdn;
using namespace cdn::nn;

namespace {

Tensor random_tensor(Shape shape, uint64_t seed, double spread = 1.0) {
    Rng rng(seed);
    Tensor t(std::move(shape), 0.0, true);
    for (auto& v : t.values()) v = spread * rng.normal();
    return t;
}

// weighted sum so constant-sum outputs (softmax) still get nontrivial grads
Tensor weighted_sum(const Tensor& y, uint64_t seed) {
    Tensor w = random_tensor(y.shape(), seed);
    w.set_requires_grad(false);
    return sum_all(mul(y, w));
}

}  // namespace

TEST_CASE("matmul gradients match central differences tightly") {
    Tensor a = random_tensor({3, 4}, 1);
    Tensor b = random_tensor({4, 5}, 2);
    b.set_requires_grad(false);
    auto fa = [&](Tensor& x) { return weighted_sum(matmul(x, b), 3); };
    CHECK(grad_check(fa, a) < 1e-6);
    a.set_requires_grad(false);
    b.set_requires_grad(true);
    auto fb = [&](Tensor& x) { return weighted_sum(matmul(a, x), 4); };
    CHECK(grad_check(fb, b) < 1e-6);
}

TEST_CASE("linear with bias over leading dims gradchecks") {
    Tensor x = random_tensor({2, 3, 4}, 5);
    Tensor w = random_tensor({4, 6}, 6);
    Tensor b = random_tensor({6}, 7);
    auto fx = [&](Tensor& t) { return weighted_sum(linear(t, w, b), 8); };
    CHECK(grad_check(fx, x) < 1e-6);
    auto fw = [&](Tensor& t) { return weighted_sum(linear(x, t, b), 9); };
    CHECK(grad_check(fw, w) < 1e-6);
    auto fbias = [&](Tensor& t) { return weighted_sum(linear(x, w, t), 10); };
    CHECK(grad_check(fbias, b) < 1e-6);
}

TEST_CASE("bmm gradchecks on both operands") {
    Tensor a = random_tensor({2, 3, 4}, 11);
    Tensor b = random_tensor({2, 4, 5}, 12);
    auto fa = [&](Tensor& x) { return weighted_sum(bmm(x, b), 13); };
    CHECK(grad_check(fa, a) < 1e-6);
    auto fb = [&](Tensor& x) { return weighted_sum(bmm(a, x), 14); };
    CHECK(grad_check(fb, b) < 1e-6);
}

TEST_CASE("elementwise arithmetic gradchecks") {
    Tensor a = random_tensor({3, 4}, 15);
    Tensor b = random_tensor({3, 4}, 16);
    auto f1 = [&](Tensor& x) { return weighted_sum(add(x, b), 17); };
    CHECK(grad_check(f1, a) < 1e-6);
    auto f2 = [&](Tensor& x) { return weighted_sum(sub(b, x), 18); };
    CHECK(grad_check(f2, a) < 1e-6);
    auto f3 = [&](Tensor& x) { return weighted_sum(mul(x, b), 19); };
    CHECK(grad_check(f3, a) < 1e-6);
    auto f4 = [&](Tensor& x) { return weighted_sum(scale(x, -2.5), 20); };
    CHECK(grad_check(f4, a) < 1e-6);
}

TEST_CASE("shape ops gradcheck") {
    Tensor a = random_tensor({2, 3, 4}, 21);
    Tensor b = random_tensor({2, 2, 4}, 22);
    b.set_requires_grad(false);
    auto f1 = [&](Tensor& x) { return weighted_sum(concat(x, b, 1), 23); };
    CHECK(grad_check(f1, a) < 1e-6);
    auto f2 = [&](Tensor& x) { return weighted_sum(permute(x, {2, 0, 1}), 24); };
    CHECK(grad_check(f2, a) < 1e-6);
    auto f3 = [&](Tensor& x) { return weighted_sum(reshape(x, {6, 4}), 25); };
    CHECK(grad_check(f3, a) < 1e-6);
    Tensor c = random_tensor({2, 1, 4}, 26);
    auto f4 = [&](Tensor& x) { return weighted_sum(tile(x, 1, 5), 27); };
    CHECK(grad_check(f4, c) < 1e-6);
}

TEST_CASE("reductions gradcheck") {
    Tensor a = random_tensor({3, 5, 2}, 28);
    auto f1 = [&](Tensor& x) { return weighted_sum(mean_axis(x, 1), 29); };
    CHECK(grad_check(f1, a) < 1e-6);
    auto f2 = [&](Tensor& x) { return weighted_sum(variance_axis(x, 1), 30); };
    CHECK(grad_check(f2, a) < 1e-5);
    auto f3 = [&](Tensor& x) { return sum_all(x); };
    CHECK(grad_check(f3, a) < 1e-6);
}

TEST_CASE("activations gradcheck away from kinks") {
    Tensor a = random_tensor({4, 4}, 31);
    for (auto& v : a.values())
        if (std::abs(v) < 0.1) v += 0.2;  // keep clear of the relu kink
    auto f1 = [&](Tensor& x) { return weighted_sum(relu(x), 32); };
    CHECK(grad_check(f1, a) < 1e-5);
    auto f2 = [&](Tensor& x) { return weighted_sum(tanh_act(x), 33); };
    CHECK(grad_check(f2, a) < 1e-5);
    auto f3 = [&](Tensor& x) { return weighted_sum(sigmoid_act(x), 34); };
    CHECK(grad_check(f3, a) < 1e-5);
    auto f4 = [&](Tensor& x) { return weighted_sum(softmax_last(x), 35); };
    CHECK(grad_check(f4, a) < 1e-5);
}

TEST_CASE("softmax rows sum to one") {
    Tensor a = random_tensor({3, 6}, 36, 5.0);
    Tensor y = softmax_last(a);
    for (int r = 0; r < 3; ++r) {
        double s = 0.0;
        for (int c = 0; c < 6; ++c) s += y.values()[r * 6 + c];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("layer norm gradchecks in all three arguments") {
    Tensor x = random_tensor({3, 5}, 37);
    Tensor g = random_tensor({5}, 38);
    Tensor b = random_tensor({5}, 39);
    auto fx = [&](Tensor& t) { return weighted_sum(layer_norm(t, g, b), 40); };
    CHECK(grad_check(fx, x) < 1e-5);
    auto fg = [&](Tensor& t) { return weighted_sum(layer_norm(x, t, b), 41); };
    CHECK(grad_check(fg, g) < 1e-5);
    auto fb = [&](Tensor& t) { return weighted_sum(layer_norm(x, g, t), 42); };
    CHECK(grad_check(fb, b) < 1e-5);
}

TEST_CASE("embedding accumulates into repeated rows") {
    Tensor table = random_tensor({4, 3}, 43);
    std::vector<int> idx = {2, 0, 2};
    auto f = [&](Tensor& t) { return weighted_sum(embedding(t, idx), 44); };
    CHECK(grad_check(f, table) < 1e-6);
    Tensor y = embedding(table, idx);
    CHECK(y.shape() == Shape{3, 3});
    for (int c = 0; c < 3; ++c)
        CHECK(y.values()[c] == table.values()[2 * 3 + c]);
}

TEST_CASE("loss ops gradcheck") {
    Tensor logits = random_tensor({6}, 45);
    std::vector<double> targets = {1, 0, 1, 1, 0, 0};
    auto f1 = [&](Tensor& x) { return bce_with_logits(x, targets); };
    CHECK(grad_check(f1, logits) < 1e-5);
    Tensor cls = random_tensor({4, 3}, 46);
    std::vector<int> labels = {0, 2, 1, 2};
    auto f2 = [&](Tensor& x) { return softmax_cross_entropy(x, labels); };
    CHECK(grad_check(f2, cls) < 1e-5);
}

TEST_CASE("gather_pair_rows pulls symmetric entries and gradchecks") {
    Tensor h = random_tensor({3, 3, 2}, 47);
    std::vector<std::pair<int, int>> pairs = {{0, 1}, {1, 2}};
    Tensor y = gather_pair_rows(h, pairs);
    REQUIRE(y.shape() == Shape{2, 4});
    CHECK(y.values()[0] == h.values()[(0 * 3 + 1) * 2 + 0]);
    CHECK(y.values()[2] == h.values()[(1 * 3 + 0) * 2 + 0]);
    auto f = [&](Tensor& x) { return weighted_sum(gather_pair_rows(x, pairs), 48); };
    CHECK(grad_check(f, h) < 1e-6);
}

TEST_CASE("dropout is identity in eval mode and rescales in train mode") {
    Rng rng(49);
    Tensor x = random_tensor({50, 20}, 50);
    Tensor eval_out = dropout(x, 0.5, false, rng);
    CHECK(eval_out.values() == x.values());
    Tensor train_out = dropout(x, 0.5, true, rng);
    int zeros = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        double v = train_out.values()[i];
        if (v == 0.0)
            ++zeros;
        else
            CHECK(v == doctest::Approx(x.values()[i] / 0.5));
    }
    CHECK(zeros > 300);
    CHECK(zeros < 700);
}

TEST_CASE("attention with zero output projection is the identity residual") {
    size_t d = 8;
    AttnParams p;
    p.wq = random_tensor({d, d}, 51);
    p.wk = random_tensor({d, d}, 52);
    p.wv = random_tensor({d, d}, 53);
    p.wo = Tensor({d, d}, 0.0, true);
    Tensor x = random_tensor({5, d}, 54);
    Tensor y = self_attention(x, p);
    for (size_t i = 0; i < x.size(); ++i)
        CHECK(y.values()[i] == doctest::Approx(x.values()[i]).epsilon(1e-12));
}

TEST_CASE("single-token attention reduces to the value path") {
    size_t d = 4;
    AttnParams p;
    p.wq = random_tensor({d, d}, 55);
    p.wk = random_tensor({d, d}, 56);
    p.wv = random_tensor({d, d}, 57);
    p.wo = random_tensor({d, d}, 58);
    Tensor x = random_tensor({1, d}, 59);
    Tensor core = attention_core(x, p);
    Tensor direct = linear(linear(x, p.wv), p.wo);
    for (size_t i = 0; i < d; ++i)
        CHECK(core.values()[i] == doctest::Approx(direct.values()[i]).epsilon(1e-10));
}

TEST_CASE("attention gradchecks including the multi-head path") {
    size_t d = 8;
    AttnParams p;
    p.wq = random_tensor({d, d}, 60);
    p.wk = random_tensor({d, d}, 61);
    p.wv = random_tensor({d, d}, 62);
    p.wo = random_tensor({d, d}, 63);
    Tensor x = random_tensor({2, 4, d}, 64);
    auto f1 = [&](Tensor& t) { return weighted_sum(self_attention(t, p, 1), 65); };
    CHECK(grad_check(f1, x) < 1e-5);
    auto f2 = [&](Tensor& t) { return weighted_sum(self_attention(t, p, 2), 66); };
    CHECK(grad_check(f2, x) < 1e-5);
    auto fw = [&](Tensor& t) {
        AttnParams q = p;
        q.wq = t;
        return weighted_sum(self_attention(x, q, 2), 67);
    };
    CHECK(grad_check(fw, p.wq) < 1e-5);
}

namespace {

AxialBlockParams random_axial(size_t d, uint64_t seed) {
    AxialBlockParams p;
    uint64_t s = seed;
    auto next = [&]() { return random_tensor({d, d}, ++s, 0.4); };
    p.row_attn = {next(), next(), next(), next()};
    p.col_attn = {next(), next(), next(), next()};
    p.ln1_g = Tensor({d}, 1.0, true);
    p.ln1_b = Tensor({d}, 0.0, true);
    p.ln2_g = Tensor({d}, 1.0, true);
    p.ln2_b = Tensor({d}, 0.0, true);
    p.ln3_g = Tensor({d}, 1.0, true);
    p.ln3_b = Tensor({d}, 0.0, true);
    p.ffn_w1 = random_tensor({d, 4 * d}, ++s, 0.4);
    p.ffn_b1 = random_tensor({4 * d}, ++s, 0.4);
    p.ffn_w2 = random_tensor({4 * d, d}, ++s, 0.4);
    p.ffn_b2 = random_tensor({d}, ++s, 0.4);
    return p;
}

}  // namespace

TEST_CASE("axial block with zeroed projections is the identity") {
    size_t d = 6;
    AxialBlockParams p = random_axial(d, 70);
    p.row_attn.wo = Tensor({d, d}, 0.0, true);
    p.col_attn.wo = Tensor({d, d}, 0.0, true);
    p.ffn_w2 = Tensor({4 * d, d}, 0.0, true);
    p.ffn_b2 = Tensor({d}, 0.0, true);
    Tensor h = random_tensor({3, 4, d}, 71);
    Rng rng(72);
    Tensor y = axial_block(h, p, 1, 0.0, false, rng);
    for (size_t i = 0; i < h.size(); ++i)
        CHECK(y.values()[i] == doctest::Approx(h.values()[i]).epsilon(1e-12));
}

TEST_CASE("axial block gradchecks end to end") {
    size_t d = 8;
    AxialBlockParams p = random_axial(d, 80);
    Tensor h = random_tensor({3, 4, d}, 81);
    Rng rng(82);
    auto f = [&](Tensor& t) {
        return weighted_sum(axial_block(t, p, 1, 0.0, false, rng), 83);
    };
    CHECK(grad_check(f, h) < 1e-4);
}

TEST_CASE("adamw leaves parameters alone on zero gradients without decay") {
    ParamStore params;
    params.add("w", random_tensor({4}, 90));
    std::vector<double> before = params.at("w").values();
    params.zero_grads();
    OptimizerState st;
    st.weight_decay = 0.0;
    adamw_step(params, st);
    CHECK(params.at("w").values() == before);
}

TEST_CASE("adamw decay is decoupled and multiplicative") {
    ParamStore params;
    params.add("w", random_tensor({4}, 91));
    std::vector<double> before = params.at("w").values();
    params.zero_grads();
    OptimizerState st;
    st.lr = 0.1;
    st.weight_decay = 0.01;
    adamw_step(params, st);
    for (size_t i = 0; i < 4; ++i)
        CHECK(params.at("w").values()[i] == doctest::Approx(before[i] * 0.999));
}

TEST_CASE("adamw step size approaches lr times the gradient sign") {
    ParamStore params;
    params.add("w", Tensor({2}, 0.0, true));
    OptimizerState st;
    st.lr = 0.01;
    st.weight_decay = 0.0;
    double prev0 = 0.0, prev1 = 0.0;
    for (int s = 0; s < 300; ++s) {
        prev0 = params.at("w").values()[0];
        prev1 = params.at("w").values()[1];
        params.at("w").grad() = {3.0, -0.5};
        adamw_step(params, st);
    }
    CHECK(params.at("w").values()[0] - prev0 == doctest::Approx(-0.01).epsilon(1e-4));
    CHECK(params.at("w").values()[1] - prev1 == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("adamw throws when a parameter has no gradient") {
    ParamStore params;
    params.add("w", random_tensor({3}, 92));
    OptimizerState st;
    CHECK_THROWS(adamw_step(params, st));
}

TEST_CASE("checkpoint roundtrip preserves order, values, state, and extras") {
    ParamStore params;
    params.add("b.second", random_tensor({2, 3}, 93));
    params.add("a.first", random_tensor({4}, 94));
    OptimizerState st;
    st.lr = 3e-4;
    st.weight_decay = 0.02;
    st.step = 17;
    const std::string path = "roundtrip_ckpt.bin";
    save_checkpoint(path, params, st, {{"note", "hello"}});
    Checkpoint ck = load_checkpoint(path);
    std::remove(path.c_str());
    REQUIRE(ck.params.names() == params.names());
    CHECK(ck.state.lr == st.lr);
    CHECK(ck.state.weight_decay == st.weight_decay);
    CHECK(ck.state.step == 17);
    CHECK(ck.extra.at("note") == "hello");
    for (const auto& name : params.names()) {
        const auto& a = params.at(name).values();
        const auto& b = ck.params.at(name).values();
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i)
            CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-6));  // binary32 storage
    }
}

TEST_CASE("grad_check flags a wrong gradient") {
    // deliberately corrupt the backward pass by scaling stored grads
    Tensor x = random_tensor({3}, 95);
    auto f = [&](Tensor& t) {
        Tensor y = sum_all(mul(t, t));
        // evaluate, then sabotage: report half the gradient via a scaled input
        Tensor z = scale(y, 1.0);
        auto inner = z.node()->backward_fn;
        z.node()->backward_fn = [inner](nn::TensorNode& node) {
            for (auto& g : node.grad) g *= 0.5;
            inner(node);
        };
        return z;
    };
    CHECK(grad_check(f, x) > 0.3);
}
