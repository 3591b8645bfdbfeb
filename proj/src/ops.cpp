#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cdn/matmul.hpp"
#include "cdn/tensor.hpp"

namespace cdn::nn {

namespace {

Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<Tensor> parents, const char* op) {
    Tensor t = Tensor::from_data(std::move(shape), std::move(value));
    auto& node = *t.node();
    node.op = op;
    for (auto& p : parents) {
        node.parents.push_back(p.node());
        if (p.requires_grad()) node.requires_grad = true;
    }
    return t;
}

// collapse all axes but the last into row count
size_t leading_rows(const Shape& s) {
    size_t r = 1;
    for (size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
    return r;
}

std::vector<size_t> row_major_strides(const Shape& s) {
    std::vector<size_t> st(s.size(), 1);
    for (size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
    return st;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0))
        throw std::invalid_argument("matmul: need [m,k]x[k,n], got " +
                                    shape_str(a.shape()) + " x " + shape_str(b.shape()));
    size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> c(m * n);
    matmul_omp(a.values().data(), b.values().data(), c.data(), m, k, n);
    Tensor out = make_result({m, n}, std::move(c), {a, b}, "matmul");
    if (out.requires_grad()) {
        out.node()->backward_fn = [m, k, n](TensorNode& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                std::vector<double> da(m * k);
                matmul_nt_omp(self.grad.data(), pb.value.data(), da.data(), m, n, k);
                for (size_t i = 0; i < da.size(); ++i) pa.grad[i] += da[i];
            }
            if (pb.requires_grad)
                matmul_tn_acc_omp(pa.value.data(), self.grad.data(), pb.grad.data(), m,
                                  k, n);
        };
    }
    return out;
}

static Tensor linear_impl(const Tensor& x, const Tensor& w, const Tensor* bias) {
    if (w.shape().size() != 2 || x.shape().empty() || x.shape().back() != w.dim(0))
        throw std::invalid_argument("linear: got x " + shape_str(x.shape()) + ", w " +
                                    shape_str(w.shape()));
    size_t rows = leading_rows(x.shape());
    size_t in = w.dim(0), out_dim = w.dim(1);
    if (bias && (bias->shape().size() != 1 || bias->dim(0) != out_dim))
        throw std::invalid_argument("linear: bias must be [out]");
    std::vector<double> y(rows * out_dim);
    matmul_omp(x.values().data(), w.values().data(), y.data(), rows, in, out_dim);
    if (bias) {
        const auto& bv = bias->values();
        for (size_t r = 0; r < rows; ++r)
            for (size_t j = 0; j < out_dim; ++j) y[r * out_dim + j] += bv[j];
    }
    Shape out_shape = x.shape();
    out_shape.back() = out_dim;
    std::vector<Tensor> parents = {x, w};
    if (bias) parents.push_back(*bias);
    Tensor out = make_result(std::move(out_shape), std::move(y), std::move(parents),
                             "linear");
    if (out.requires_grad()) {
        bool has_bias = bias != nullptr;
        out.node()->backward_fn = [rows, in, out_dim, has_bias](TensorNode& self) {
            auto& px = *self.parents[0];
            auto& pw = *self.parents[1];
            if (px.requires_grad) {
                std::vector<double> dx(rows * in);
                matmul_nt_omp(self.grad.data(), pw.value.data(), dx.data(), rows,
                              out_dim, in);
                for (size_t i = 0; i < dx.size(); ++i) px.grad[i] += dx[i];
            }
            if (pw.requires_grad)
                matmul_tn_acc_omp(px.value.data(), self.grad.data(), pw.grad.data(),
                                  rows, in, out_dim);
            if (has_bias && self.parents[2]->requires_grad) {
                auto& pb = *self.parents[2];
                for (size_t r = 0; r < rows; ++r)
                    for (size_t j = 0; j < out_dim; ++j)
                        pb.grad[j] += self.grad[r * out_dim + j];
            }
        };
    }
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w) { return linear_impl(x, w, nullptr); }
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return linear_impl(x, w, &b);
}

Tensor bmm(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 3 || b.shape().size() != 3 || a.dim(0) != b.dim(0) ||
        a.dim(2) != b.dim(1))
        throw std::invalid_argument("bmm: need [B,m,k]x[B,k,n], got " +
                                    shape_str(a.shape()) + " x " + shape_str(b.shape()));
    size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
    std::vector<double> c(batch * m * n);
#pragma omp parallel for schedule(static)
    for (long long s = 0; s < static_cast<long long>(batch); ++s)
        matmul_serial(a.values().data() + s * m * k, b.values().data() + s * k * n,
                      c.data() + s * m * n, m, k, n);
    Tensor out = make_result({batch, m, n}, std::move(c), {a, b}, "bmm");
    if (out.requires_grad()) {
        out.node()->backward_fn = [batch, m, k, n](TensorNode& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                std::vector<double> da(m * k);
                for (size_t s = 0; s < batch; ++s) {
                    matmul_nt_serial(self.grad.data() + s * m * n,
                                     pb.value.data() + s * k * n, da.data(), m, n, k);
                    double* g = pa.grad.data() + s * m * k;
                    for (size_t i = 0; i < m * k; ++i) g[i] += da[i];
                }
            }
            if (pb.requires_grad)
                for (size_t s = 0; s < batch; ++s)
                    matmul_tn_acc_serial(pa.value.data() + s * m * k,
                                         self.grad.data() + s * m * n,
                                         pb.grad.data() + s * k * n, m, k, n);
        };
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> v(a.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] + b.values()[i];
    Tensor out = make_result(a.shape(), std::move(v), {a, b}, "add");
    if (out.requires_grad())
        out.node()->backward_fn = [](TensorNode& self) {
            for (auto& p : self.parents)
                if (p->requires_grad)
                    for (size_t i = 0; i < self.grad.size(); ++i)
                        p->grad[i] += self.grad[i];
        };
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> v(a.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] - b.values()[i];
    Tensor out = make_result(a.shape(), std::move(v), {a, b}, "sub");
    if (out.requires_grad())
        out.node()->backward_fn = [](TensorNode& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            for (size_t i = 0; i < self.grad.size(); ++i) {
                if (pa.requires_grad) pa.grad[i] += self.grad[i];
                if (pb.requires_grad) pb.grad[i] -= self.grad[i];
            }
        };
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> v(a.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] * b.values()[i];
    Tensor out = make_result(a.shape(), std::move(v), {a, b}, "mul");
    if (out.requires_grad())
        out.node()->backward_fn = [](TensorNode& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            for (size_t i = 0; i < self.grad.size(); ++i) {
                if (pa.requires_grad) pa.grad[i] += self.grad[i] * pb.value[i];
                if (pb.requires_grad) pb.grad[i] += self.grad[i] * pa.value[i];
            }
        };
    return out;
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> v(a.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] * c;
    Tensor out = make_result(a.shape(), std::move(v), {a}, "scale");
    if (out.requires_grad())
        out.node()->backward_fn = [c](TensorNode& self) {
            auto& p = *self.parents[0];
            for (size_t i = 0; i < self.grad.size(); ++i)
                p.grad[i] += self.grad[i] * c;
        };
    return out;
}

Tensor concat(const Tensor& a, const Tensor& b, size_t axis) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() != sb.size() || axis >= sa.size())
        throw std::invalid_argument("concat: rank mismatch or bad axis");
    for (size_t i = 0; i < sa.size(); ++i)
        if (i != axis && sa[i] != sb[i])
            throw std::invalid_argument("concat: shapes differ off the concat axis");
    Shape so = sa;
    so[axis] = sa[axis] + sb[axis];
    size_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= sa[i];
    for (size_t i = axis + 1; i < sa.size(); ++i) inner *= sa[i];
    size_t ablk = sa[axis] * inner, bblk = sb[axis] * inner;
    std::vector<double> v(numel(so));
    for (size_t o = 0; o < outer; ++o) {
        std::copy_n(a.values().data() + o * ablk, ablk,
                    v.data() + o * (ablk + bblk));
        std::copy_n(b.values().data() + o * bblk, bblk,
                    v.data() + o * (ablk + bblk) + ablk);
    }
    Tensor out = make_result(std::move(so), std::move(v), {a, b}, "concat");
    if (out.requires_grad())
        out.node()->backward_fn = [outer, ablk, bblk](TensorNode& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            for (size_t o = 0; o < outer; ++o) {
                const double* g = self.grad.data() + o * (ablk + bblk);
                if (pa.requires_grad)
                    for (size_t i = 0; i < ablk; ++i) pa.grad[o * ablk + i] += g[i];
                if (pb.requires_grad)
                    for (size_t i = 0; i < bblk; ++i)
                        pb.grad[o * bblk + i] += g[ablk + i];
            }
        };
    return out;
}

Tensor tile(const Tensor& a, size_t axis, size_t times) {
    const Shape& sa = a.shape();
    if (axis >= sa.size() || sa[axis] != 1)
        throw std::invalid_argument("tile: axis must exist and have extent 1");
    Shape so = sa;
    so[axis] = times;
    size_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= sa[i];
    for (size_t i = axis + 1; i < sa.size(); ++i) inner *= sa[i];
    std::vector<double> v(numel(so));
    for (size_t o = 0; o < outer; ++o)
        for (size_t t = 0; t < times; ++t)
            std::copy_n(a.values().data() + o * inner, inner,
                        v.data() + (o * times + t) * inner);
    Tensor out = make_result(std::move(so), std::move(v), {a}, "tile");
    if (out.requires_grad())
        out.node()->backward_fn = [outer, inner, times](TensorNode& self) {
            auto& p = *self.parents[0];
            for (size_t o = 0; o < outer; ++o)
                for (size_t t = 0; t < times; ++t) {
                    const double* g = self.grad.data() + (o * times + t) * inner;
                    for (size_t i = 0; i < inner; ++i) p.grad[o * inner + i] += g[i];
                }
        };
    return out;
}

Tensor mean_axis(const Tensor& a, size_t axis) {
    const Shape& sa = a.shape();
    if (axis >= sa.size()) throw std::invalid_argument("mean_axis: bad axis");
    size_t outer = 1, inner = 1, len = sa[axis];
    for (size_t i = 0; i < axis; ++i) outer *= sa[i];
    for (size_t i = axis + 1; i < sa.size(); ++i) inner *= sa[i];
    Shape so;
    for (size_t i = 0; i < sa.size(); ++i)
        if (i != axis) so.push_back(sa[i]);
    if (so.empty()) so.push_back(1);
    std::vector<double> v(outer * inner, 0.0);
    for (size_t o = 0; o < outer; ++o)
        for (size_t t = 0; t < len; ++t) {
            const double* src = a.values().data() + (o * len + t) * inner;
            for (size_t i = 0; i < inner; ++i) v[o * inner + i] += src[i];
        }
    for (auto& x : v) x /= static_cast<double>(len);
    Tensor out = make_result(std::move(so), std::move(v), {a}, "mean_axis");
    if (out.requires_grad())
        out.node()->backward_fn = [outer, inner, len](TensorNode& self) {
            auto& p = *self.parents[0];
            double inv = 1.0 / static_cast<double>(len);
            for (size_t o = 0; o < outer; ++o)
                for (size_t t = 0; t < len; ++t) {
                    double* g = p.grad.data() + (o * len + t) * inner;
                    for (size_t i = 0; i < inner; ++i)
                        g[i] += self.grad[o * inner + i] * inv;
                }
        };
    return out;
}

Tensor variance_axis(const Tensor& a, size_t axis) {
    const Shape& sa = a.shape();
    if (axis >= sa.size()) throw std::invalid_argument("variance_axis: bad axis");
    size_t outer = 1, inner = 1, len = sa[axis];
    for (size_t i = 0; i < axis; ++i) outer *= sa[i];
    for (size_t i = axis + 1; i < sa.size(); ++i) inner *= sa[i];
    Shape so;
    for (size_t i = 0; i < sa.size(); ++i)
        if (i != axis) so.push_back(sa[i]);
    if (so.empty()) so.push_back(1);
    std::vector<double> mean(outer * inner, 0.0), v(outer * inner, 0.0);
    for (size_t o = 0; o < outer; ++o)
        for (size_t t = 0; t < len; ++t) {
            const double* src = a.values().data() + (o * len + t) * inner;
            for (size_t i = 0; i < inner; ++i) mean[o * inner + i] += src[i];
        }
    for (auto& x : mean) x /= static_cast<double>(len);
    for (size_t o = 0; o < outer; ++o)
        for (size_t t = 0; t < len; ++t) {
            const double* src = a.values().data() + (o * len + t) * inner;
            for (size_t i = 0; i < inner; ++i) {
                double d = src[i] - mean[o * inner + i];
                v[o * inner + i] += d * d;
            }
        }
    for (auto& x : v) x /= static_cast<double>(len);
    Tensor out = make_result(std::move(so), std::move(v), {a}, "variance_axis");
    if (out.requires_grad())
        out.node()->backward_fn = [outer, inner, len, mean](TensorNode& self) {
            auto& p = *self.parents[0];
            double inv = 2.0 / static_cast<double>(len);
            for (size_t o = 0; o < outer; ++o)
                for (size_t t = 0; t < len; ++t) {
                    const double* src = p.value.data() + (o * len + t) * inner;
                    double* g = p.grad.data() + (o * len + t) * inner;
                    for (size_t i = 0; i < inner; ++i)
                        g[i] += self.grad[o * inner + i] * inv *
                                (src[i] - mean[o * inner + i]);
                }
        };
    return out;
}

Tensor relu(const Tensor& a) {
    std::vector<double> v(a.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] > 0 ? a.values()[i] : 0;
    Tensor out = make_result(a.shape(), std::move(v), {a}, "relu");
    if (out.requires_grad())
        out.node()->backward_fn = [](TensorNode& self) {
            auto& p = *self.parents[0];
            for (size_t i = 0; i < self.grad.size(); ++i)
                if (p.value[i] > 0) p.grad[i] += self.grad[i];
        };
    return out;
}

Tensor tanh_act(const Tensor& a) {
    std::vector<double> v(a.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(a.values()[i]);
    Tensor out = make_result(a.shape(), std::move(v), {a}, "tanh");
    if (out.requires_grad())
        out.node()->backward_fn = [](TensorNode& self) {
            auto& p = *self.parents[0];
            for (size_t i = 0; i < self.grad.size(); ++i)
                p.grad[i] += self.grad[i] * (1.0 - self.value[i] * self.value[i]);
        };
    return out;
}

Tensor sigmoid_act(const Tensor& a) {
    std::vector<double> v(a.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / (1.0 + std::exp(-a.values()[i]));
    Tensor out = make_result(a.shape(), std::move(v), {a}, "sigmoid");
    if (out.requires_grad())
        out.node()->backward_fn = [](TensorNode& self) {
            auto& p = *self.parents[0];
            for (size_t i = 0; i < self.grad.size(); ++i)
                p.grad[i] += self.grad[i] * self.value[i] * (1.0 - self.value[i]);
        };
    return out;
}

Tensor softmax_last(const Tensor& a) {
    size_t cols = a.shape().back();
    size_t rows = leading_rows(a.shape());
    std::vector<double> v(a.size());
    for (size_t r = 0; r < rows; ++r) {
        const double* x = a.values().data() + r * cols;
        double* y = v.data() + r * cols;
        double mx = *std::max_element(x, x + cols);
        double z = 0.0;
        for (size_t j = 0; j < cols; ++j) {
            y[j] = std::exp(x[j] - mx);
            z += y[j];
        }
        for (size_t j = 0; j < cols; ++j) y[j] /= z;
    }
    Tensor out = make_result(a.shape(), std::move(v), {a}, "softmax");
    if (out.requires_grad())
        out.node()->backward_fn = [rows, cols](TensorNode& self) {
            auto& p = *self.parents[0];
            for (size_t r = 0; r < rows; ++r) {
                const double* y = self.value.data() + r * cols;
                const double* g = self.grad.data() + r * cols;
                double dot = 0.0;
                for (size_t j = 0; j < cols; ++j) dot += g[j] * y[j];
                double* px = p.grad.data() + r * cols;
                for (size_t j = 0; j < cols; ++j) px[j] += y[j] * (g[j] - dot);
            }
        };
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    size_t d = x.shape().back();
    if (gain.size() != d || bias.size() != d)
        throw std::invalid_argument("layer_norm: gain/bias must match last axis");
    size_t rows = leading_rows(x.shape());
    std::vector<double> v(x.size()), xhat(x.size()), inv_sigma(rows);
    for (size_t r = 0; r < rows; ++r) {
        const double* xr = x.values().data() + r * d;
        double mu = 0.0;
        for (size_t j = 0; j < d; ++j) mu += xr[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= static_cast<double>(d);
        double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[r] = is;
        for (size_t j = 0; j < d; ++j) {
            xhat[r * d + j] = (xr[j] - mu) * is;
            v[r * d + j] = gain.values()[j] * xhat[r * d + j] + bias.values()[j];
        }
    }
    Tensor out = make_result(x.shape(), std::move(v), {x, gain, bias}, "layer_norm");
    if (out.requires_grad())
        out.node()->backward_fn = [rows, d, xhat = std::move(xhat),
                                   inv_sigma = std::move(inv_sigma)](TensorNode& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            auto& pb = *self.parents[2];
            for (size_t r = 0; r < rows; ++r) {
                const double* g = self.grad.data() + r * d;
                const double* xh = xhat.data() + r * d;
                if (pg.requires_grad)
                    for (size_t j = 0; j < d; ++j) pg.grad[j] += g[j] * xh[j];
                if (pb.requires_grad)
                    for (size_t j = 0; j < d; ++j) pb.grad[j] += g[j];
                if (px.requires_grad) {
                    double m1 = 0.0, m2 = 0.0;
                    for (size_t j = 0; j < d; ++j) {
                        double gg = g[j] * pg.value[j];
                        m1 += gg;
                        m2 += gg * xh[j];
                    }
                    m1 /= static_cast<double>(d);
                    m2 /= static_cast<double>(d);
                    double* px_g = px.grad.data() + r * d;
                    for (size_t j = 0; j < d; ++j)
                        px_g[j] += inv_sigma[r] *
                                   (g[j] * pg.value[j] - m1 - xh[j] * m2);
                }
            }
        };
    return out;
}

Tensor dropout(const Tensor& x, double rate, bool train, Rng& rng) {
    if (!train || rate <= 0.0) return x;
    if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
    double keep = 1.0 - rate;
    std::vector<double> mask(x.size());
    for (auto& m : mask) m = rng.uniform() < rate ? 0.0 : 1.0 / keep;
    std::vector<double> v(x.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = x.values()[i] * mask[i];
    Tensor out = make_result(x.shape(), std::move(v), {x}, "dropout");
    if (out.requires_grad())
        out.node()->backward_fn = [mask = std::move(mask)](TensorNode& self) {
            auto& p = *self.parents[0];
            for (size_t i = 0; i < self.grad.size(); ++i)
                p.grad[i] += self.grad[i] * mask[i];
        };
    return out;
}

Tensor embedding(const Tensor& table, const std::vector<int>& indices) {
    if (table.shape().size() != 2)
        throw std::invalid_argument("embedding: table must be 2-D");
    size_t vocab = table.dim(0), d = table.dim(1);
    std::vector<double> v(indices.size() * d);
    for (size_t r = 0; r < indices.size(); ++r) {
        int idx = indices[r];
        if (idx < 0 || static_cast<size_t>(idx) >= vocab)
            throw std::out_of_range("embedding: index out of range");
        std::copy_n(table.values().data() + idx * d, d, v.data() + r * d);
    }
    Tensor out = make_result({indices.size(), d}, std::move(v), {table}, "embedding");
    if (out.requires_grad())
        out.node()->backward_fn = [indices, d](TensorNode& self) {
            auto& p = *self.parents[0];
            for (size_t r = 0; r < indices.size(); ++r) {
                const double* g = self.grad.data() + r * d;
                double* t = p.grad.data() + indices[r] * d;
                for (size_t j = 0; j < d; ++j) t[j] += g[j];
            }
        };
    return out;
}

Tensor permute(const Tensor& a, const std::vector<size_t>& axes) {
    const Shape& sa = a.shape();
    if (axes.size() != sa.size())
        throw std::invalid_argument("permute: axes rank mismatch");
    Shape so(sa.size());
    for (size_t i = 0; i < axes.size(); ++i) so[i] = sa[axes[i]];
    auto in_strides = row_major_strides(sa);
    auto out_strides = row_major_strides(so);
    std::vector<double> v(a.size());
    size_t rank = sa.size();
    std::vector<size_t> idx(rank, 0);
    for (size_t lin = 0; lin < v.size(); ++lin) {
        size_t src = 0;
        for (size_t i = 0; i < rank; ++i) src += idx[i] * in_strides[axes[i]];
        v[lin] = a.values()[src];
        for (size_t i = rank; i-- > 0;) {
            if (++idx[i] < so[i]) break;
            idx[i] = 0;
        }
    }
    Tensor out = make_result(std::move(so), std::move(v), {a}, "permute");
    if (out.requires_grad())
        out.node()->backward_fn = [axes, in_strides, rank](TensorNode& self) {
            auto& p = *self.parents[0];
            std::vector<size_t> idx(rank, 0);
            for (size_t lin = 0; lin < self.grad.size(); ++lin) {
                size_t src = 0;
                for (size_t i = 0; i < rank; ++i) src += idx[i] * in_strides[axes[i]];
                p.grad[src] += self.grad[lin];
                for (size_t i = rank; i-- > 0;) {
                    if (++idx[i] < self.shape[i]) break;
                    idx[i] = 0;
                }
            }
        };
    return out;
}

Tensor reshape(const Tensor& a, Shape new_shape) {
    if (numel(new_shape) != a.size())
        throw std::invalid_argument("reshape: element count mismatch");
    Tensor out = make_result(std::move(new_shape), a.values(), {a}, "reshape");
    if (out.requires_grad())
        out.node()->backward_fn = [](TensorNode& self) {
            auto& p = *self.parents[0];
            for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
        };
    return out;
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double x : a.values()) s += x;
    Tensor out = make_result({1}, {s}, {a}, "sum_all");
    if (out.requires_grad())
        out.node()->backward_fn = [](TensorNode& self) {
            auto& p = *self.parents[0];
            for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[0];
        };
    return out;
}

Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets) {
    if (logits.size() != targets.size())
        throw std::invalid_argument("bce_with_logits: size mismatch");
    size_t n = targets.size();
    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double z = logits.values()[i], y = targets[i];
        loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
    loss /= static_cast<double>(n);
    Tensor out = make_result({1}, {loss}, {logits}, "bce_with_logits");
    if (out.requires_grad())
        out.node()->backward_fn = [targets, n](TensorNode& self) {
            auto& p = *self.parents[0];
            double g = self.grad[0] / static_cast<double>(n);
            for (size_t i = 0; i < n; ++i) {
                double sig = 1.0 / (1.0 + std::exp(-p.value[i]));
                p.grad[i] += g * (sig - targets[i]);
            }
        };
    return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.shape().size() != 2 || logits.dim(0) != labels.size())
        throw std::invalid_argument("softmax_cross_entropy: need [R,C] logits");
    size_t rows = logits.dim(0), cols = logits.dim(1);
    std::vector<double> probs(logits.size());
    double loss = 0.0;
    for (size_t r = 0; r < rows; ++r) {
        const double* x = logits.values().data() + r * cols;
        double* pr = probs.data() + r * cols;
        double mx = *std::max_element(x, x + cols);
        double z = 0.0;
        for (size_t j = 0; j < cols; ++j) {
            pr[j] = std::exp(x[j] - mx);
            z += pr[j];
        }
        for (size_t j = 0; j < cols; ++j) pr[j] /= z;
        int y = labels[r];
        if (y < 0 || static_cast<size_t>(y) >= cols)
            throw std::out_of_range("softmax_cross_entropy: bad label");
        loss -= std::log(std::max(pr[y], 1e-300));
    }
    loss /= static_cast<double>(rows);
    Tensor out = make_result({1}, {loss}, {logits}, "softmax_cross_entropy");
    if (out.requires_grad())
        out.node()->backward_fn = [labels, rows, cols,
                                   probs = std::move(probs)](TensorNode& self) {
            auto& p = *self.parents[0];
            double g = self.grad[0] / static_cast<double>(rows);
            for (size_t r = 0; r < rows; ++r)
                for (size_t j = 0; j < cols; ++j) {
                    double t = (static_cast<size_t>(labels[r]) == j) ? 1.0 : 0.0;
                    p.grad[r * cols + j] += g * (probs[r * cols + j] - t);
                }
        };
    return out;
}

Tensor gather_pair_rows(const Tensor& h, const std::vector<std::pair<int, int>>& pairs) {
    if (h.shape().size() != 3 || h.dim(0) != h.dim(1))
        throw std::invalid_argument("gather_pair_rows: need [N,N,d]");
    size_t n = h.dim(0), d = h.dim(2);
    std::vector<double> v(pairs.size() * 2 * d);
    for (size_t r = 0; r < pairs.size(); ++r) {
        auto [i, j] = pairs[r];
        if (i < 0 || j < 0 || static_cast<size_t>(i) >= n || static_cast<size_t>(j) >= n)
            throw std::out_of_range("gather_pair_rows: pair out of range");
        std::copy_n(h.values().data() + (i * n + j) * d, d, v.data() + r * 2 * d);
        std::copy_n(h.values().data() + (j * n + i) * d, d, v.data() + r * 2 * d + d);
    }
    Tensor out = make_result({pairs.size(), 2 * d}, std::move(v), {h},
                             "gather_pair_rows");
    if (out.requires_grad())
        out.node()->backward_fn = [pairs, n, d](TensorNode& self) {
            auto& p = *self.parents[0];
            for (size_t r = 0; r < pairs.size(); ++r) {
                auto [i, j] = pairs[r];
                const double* g = self.grad.data() + r * 2 * d;
                double* gij = p.grad.data() + (i * n + j) * d;
                double* gji = p.grad.data() + (j * n + i) * d;
                for (size_t t = 0; t < d; ++t) {
                    gij[t] += g[t];
                    gji[t] += g[d + t];
                }
            }
        };
    return out;
}

}  // namespace cdn::nn
