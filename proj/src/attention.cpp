#include "cdn/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace cdn::nn {

namespace {

// x is [B,L,d]; returns [B,L,d] without the residual
Tensor core_batched(const Tensor& x, const AttnParams& p, size_t heads) {
    size_t batch = x.dim(0), len = x.dim(1), d = x.dim(2);
    if (heads == 0 || d % heads != 0)
        throw std::invalid_argument("attention: d must be divisible by head count");
    size_t dh = d / heads;
    auto split = [&](const Tensor& t) {
        // [B,L,d] -> [B*H, L, dh]
        Tensor r = reshape(t, {batch, len, heads, dh});
        r = permute(r, {0, 2, 1, 3});
        return reshape(r, {batch * heads, len, dh});
    };
    Tensor q = split(linear(x, p.wq));
    Tensor k = split(linear(x, p.wk));
    Tensor v = split(linear(x, p.wv));
    Tensor kt = permute(k, {0, 2, 1});
    Tensor scores = scale(bmm(q, kt), 1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor attn = softmax_last(scores);
    Tensor ctx = bmm(attn, v);  // [B*H, L, dh]
    ctx = reshape(ctx, {batch, heads, len, dh});
    ctx = permute(ctx, {0, 2, 1, 3});
    ctx = reshape(ctx, {batch, len, d});
    return linear(ctx, p.wo);
}

}  // namespace

Tensor attention_core(const Tensor& x, const AttnParams& p, size_t heads) {
    if (x.shape().size() == 2) {
        Tensor b = reshape(x, {1, x.dim(0), x.dim(1)});
        return reshape(core_batched(b, p, heads), x.shape());
    }
    if (x.shape().size() != 3)
        throw std::invalid_argument("attention: input must be [L,d] or [B,L,d]");
    return core_batched(x, p, heads);
}

Tensor self_attention(const Tensor& x, const AttnParams& p, size_t heads) {
    return add(x, attention_core(x, p, heads));
}

Tensor axial_block(const Tensor& h, const AxialBlockParams& p, size_t heads,
                   double dropout_rate, bool train, Rng& rng) {
    if (h.shape().size() != 3)
        throw std::invalid_argument("axial_block: input must be [rows,cols,d]");
    // attention along rows: batch over columns
    Tensor x = permute(h, {1, 0, 2});
    Tensor a = attention_core(layer_norm(x, p.ln1_g, p.ln1_b), p.row_attn, heads);
    x = add(x, dropout(a, dropout_rate, train, rng));
    x = permute(x, {1, 0, 2});
    // attention along columns: rows are already the batch axis
    a = attention_core(layer_norm(x, p.ln2_g, p.ln2_b), p.col_attn, heads);
    x = add(x, dropout(a, dropout_rate, train, rng));
    // position-wise feed-forward
    Tensor f = layer_norm(x, p.ln3_g, p.ln3_b);
    f = linear(relu(linear(f, p.ffn_w1, p.ffn_b1)), p.ffn_w2, p.ffn_b2);
    return add(x, dropout(f, dropout_rate, train, rng));
}

}  // namespace cdn::nn
