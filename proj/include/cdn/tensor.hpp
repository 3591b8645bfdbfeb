#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cdn/rng.hpp"

namespace cdn::nn {

using Shape = std::vector<size_t>;

size_t numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<TensorNode>> parents;
    // propagates this node's grad into the parents' grad buffers (accumulating)
    std::function<void(TensorNode&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

// Cheap handle over a shared autodiff node; value semantics on the handle.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar_of(double v);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    size_t size() const { return node_->value.size(); }
    size_t dim(size_t i) const { return node_->shape[i]; }

    std::vector<double>& values() { return node_->value; }
    const std::vector<double>& values() const { return node_->value; }
    std::vector<double>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }
    void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

    double scalar() const;

    std::shared_ptr<TensorNode>& node() { return node_; }
    const std::shared_ptr<TensorNode>& node() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

// Reverse-mode sweep from a scalar root.
void backward(const Tensor& root);

// --- differentiable ops ---------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);          // 2-D
Tensor linear(const Tensor& x, const Tensor& w);          // last axis, no bias
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor bmm(const Tensor& a, const Tensor& b);             // [B,m,k] x [B,k,n]
Tensor add(const Tensor& a, const Tensor& b);             // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);             // elementwise
Tensor scale(const Tensor& a, double c);
Tensor concat(const Tensor& a, const Tensor& b, size_t axis);
Tensor tile(const Tensor& a, size_t axis, size_t times);  // axis must have extent 1
Tensor mean_axis(const Tensor& a, size_t axis);
Tensor variance_axis(const Tensor& a, size_t axis);       // population variance
Tensor relu(const Tensor& a);
Tensor tanh_act(const Tensor& a);
Tensor sigmoid_act(const Tensor& a);
Tensor softmax_last(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
Tensor dropout(const Tensor& x, double rate, bool train, Rng& rng);
Tensor embedding(const Tensor& table, const std::vector<int>& indices);
Tensor permute(const Tensor& a, const std::vector<size_t>& axes);
Tensor reshape(const Tensor& a, Shape new_shape);
Tensor sum_all(const Tensor& a);  // scalar

// mean binary cross entropy from logits against 0/1 targets
Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets);
// mean cross entropy of [R,C] logits against integer class labels
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// rows of the result: [h[i,j,:], h[j,i,:]] for each listed ordered pair; h is [N,N,d]
Tensor gather_pair_rows(const Tensor& h, const std::vector<std::pair<int, int>>& pairs);

}  // namespace cdn::nn
