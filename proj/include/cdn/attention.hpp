#pragma once

#include "cdn/tensor.hpp"

namespace cdn::nn {

struct AttnParams {
    Tensor wq, wk, wv, wo;  // each [d,d], no biases
};

struct AxialBlockParams {
    AttnParams row_attn, col_attn;
    Tensor ln1_g, ln1_b;  // before row attention
    Tensor ln2_g, ln2_b;  // before col attention
    Tensor ln3_g, ln3_b;  // before feed-forward
    Tensor ffn_w1, ffn_b1;  // d -> 4d
    Tensor ffn_w2, ffn_b2;  // 4d -> d
};

// scaled-dot-product attention without the residual; x is [L,d] or [B,L,d]
Tensor attention_core(const Tensor& x, const AttnParams& p, size_t heads = 1);

// out = x + attention_core(x)
Tensor self_attention(const Tensor& x, const AttnParams& p, size_t heads = 1);

// residual pre-layer-norm attention along rows (cols batched), then cols
// (rows batched), then a 4d relu feed-forward; h is [rows,cols,d]
Tensor axial_block(const Tensor& h, const AxialBlockParams& p, size_t heads,
                   double dropout_rate, bool train, Rng& rng);

}  // namespace cdn::nn
