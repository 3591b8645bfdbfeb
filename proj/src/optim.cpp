#include "cdn/optim.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace cdn::nn {

using nlohmann::json;

void ParamStore::add(const std::string& name, Tensor t) {
    if (params_.count(name))
        throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    t.set_requires_grad(true);
    names_.push_back(name);
    params_.emplace(name, std::move(t));
}

Tensor& ParamStore::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end())
        throw std::out_of_range("ParamStore: unknown parameter " + name);
    return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end())
        throw std::out_of_range("ParamStore: unknown parameter " + name);
    return it->second;
}

bool ParamStore::contains(const std::string& name) const {
    return params_.count(name) > 0;
}

void ParamStore::zero_grads() {
    for (auto& [name, t] : params_) t.zero_grad();
}

void adamw_step(ParamStore& params, OptimizerState& state) {
    ++state.step;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (const auto& name : params.names()) {
        Tensor& p = params.at(name);
        if (p.node()->grad.size() != p.size())
            throw std::runtime_error("adamw_step: missing gradient for " + name);
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.size() != p.size()) m.assign(p.size(), 0.0);
        if (v.size() != p.size()) v.assign(p.size(), 0.0);
        auto& val = p.values();
        const auto& g = p.node()->grad;
        for (size_t i = 0; i < val.size(); ++i) {
            // decoupled decay, independent of the Adam update
            val[i] -= state.lr * state.weight_decay * val[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            val[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

double grad_check(const std::function<Tensor(Tensor&)>& fn, Tensor& x, double eps) {
    x.set_requires_grad(true);
    x.zero_grad();
    Tensor out = fn(x);
    backward(out);
    std::vector<double> analytic = x.node()->grad;
    double max_rel = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        double orig = x.values()[i];
        x.values()[i] = orig + eps;
        double up = fn(x).scalar();
        x.values()[i] = orig - eps;
        double down = fn(x).scalar();
        x.values()[i] = orig;
        double numeric = (up - down) / (2.0 * eps);
        double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
        max_rel = std::max(max_rel, std::abs(numeric - analytic[i]) / denom);
    }
    return max_rel;
}

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const OptimizerState& state,
                     const std::map<std::string, std::string>& extra) {
    json header;
    header["format_version"] = 1;
    header["step"] = state.step;
    header["optimizer"] = {{"lr", state.lr},
                           {"beta1", state.beta1},
                           {"beta2", state.beta2},
                           {"eps", state.eps},
                           {"weight_decay", state.weight_decay}};
    json plist = json::array();
    for (const auto& name : params.names()) {
        const Tensor& t = params.at(name);
        plist.push_back({{"name", name}, {"shape", t.shape()}, {"dtype", "f32"}});
    }
    header["params"] = plist;
    for (const auto& [k, v] : extra) header["extra"][k] = v;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    std::string h = header.dump();
    out << h << '\n';
    for (const auto& name : params.names()) {
        const auto& val = params.at(name).values();
        std::vector<float> buf(val.begin(), val.end());
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("write failure on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("truncated checkpoint header: " + path);
    json header = json::parse(line);
    Checkpoint ck;
    const auto& opt = header.at("optimizer");
    ck.state.lr = opt.at("lr");
    ck.state.beta1 = opt.at("beta1");
    ck.state.beta2 = opt.at("beta2");
    ck.state.eps = opt.at("eps");
    ck.state.weight_decay = opt.at("weight_decay");
    ck.state.step = header.at("step");
    if (header.contains("extra"))
        for (auto& [k, v] : header.at("extra").items())
            ck.extra[k] = v.get<std::string>();
    for (const auto& pj : header.at("params")) {
        Shape shape = pj.at("shape").get<Shape>();
        std::vector<float> buf(numel(shape));
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!in) throw std::runtime_error("truncated checkpoint blocks: " + path);
        std::vector<double> data(buf.begin(), buf.end());
        ck.params.add(pj.at("name").get<std::string>(),
                      Tensor::from_data(std::move(shape), std::move(data)));
    }
    return ck;
}

}  // namespace cdn::nn
