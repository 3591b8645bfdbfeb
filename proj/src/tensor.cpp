#include "cdn/tensor.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace cdn::nn {

size_t numel(const Shape& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
    node_ = std::make_shared<TensorNode>();
    node_->shape = std::move(shape);
    node_->value.assign(numel(node_->shape), fill);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (numel(shape) != data.size())
        throw std::invalid_argument("Tensor::from_data: shape/data size mismatch");
    Tensor t;
    t.node_ = std::make_shared<TensorNode>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(data);
    t.node_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::scalar_of(double v) { return from_data({1}, {v}); }

double Tensor::scalar() const {
    if (node_->value.size() != 1)
        throw std::logic_error("Tensor::scalar: tensor is not a scalar");
    return node_->value[0];
}

void backward(const Tensor& root) {
    if (root.size() != 1)
        throw std::logic_error("backward: root must be a scalar");
    // topological order via iterative DFS
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, size_t>> stack;
    stack.push_back({root.node().get(), 0});
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx == 0 && visited.count(node)) {
            stack.pop_back();
            continue;
        }
        if (idx < node->parents.size()) {
            TensorNode* p = node->parents[idx].get();
            ++idx;
            if (!visited.count(p)) stack.push_back({p, 0});
        } else {
            visited.insert(node);
            order.push_back(node);
            stack.pop_back();
        }
    }
    root.node()->ensure_grad();
    root.node()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backward_fn && node->requires_grad) {
            node->ensure_grad();
            for (auto& p : node->parents)
                if (p->requires_grad) p->ensure_grad();
            node->backward_fn(*node);
        }
    }
}

}  // namespace cdn::nn
