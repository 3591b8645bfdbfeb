#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cdn/tensor.hpp"

namespace cdn::nn {

// ordered map from parameter name to tensor; iteration order is the
// serialization order
class ParamStore {
public:
    void add(const std::string& name, Tensor t);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool contains(const std::string& name) const;
    size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    void zero_grads();

private:
    std::vector<std::string> names_;
    std::map<std::string, Tensor> params_;
};

struct OptimizerState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-5;
    long long step = 0;
    std::map<std::string, std::vector<double>> m, v;
};

// AdamW with decoupled weight decay; reads gradients off the parameter tensors
void adamw_step(ParamStore& params, OptimizerState& state);

// max relative error between analytic and central-difference gradients of a
// scalar-valued function of x
double grad_check(const std::function<Tensor(Tensor&)>& fn, Tensor& x,
                  double eps = 1e-5);

// checkpoint: JSON header line (format version, param names/shapes/dtypes,
// optimizer hyperparams, step) followed by raw little-endian binary32 blocks
// in header order
void save_checkpoint(const std::string& path, const ParamStore& params,
                     const OptimizerState& state,
                     const std::map<std::string, std::string>& extra = {});
struct Checkpoint {
    ParamStore params;
    OptimizerState state;
    std::map<std::string, std::string> extra;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cdn::nn
