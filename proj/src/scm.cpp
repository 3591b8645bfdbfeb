#include "cdn/scm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cdn {

MechanismFamily mechanism_family_from_string(const std::string& s) {
    if (s == "linear") return MechanismFamily::Linear;
    if (s == "nn_additive") return MechanismFamily::NNAdditive;
    if (s == "nn_nonadditive") return MechanismFamily::NNNonAdditive;
    if (s == "polynomial") return MechanismFamily::Polynomial;
    if (s == "sigmoid") return MechanismFamily::Sigmoid;
    throw std::invalid_argument("unknown mechanism family: " + s);
}

std::string to_string(MechanismFamily f) {
    switch (f) {
        case MechanismFamily::Linear: return "linear";
        case MechanismFamily::NNAdditive: return "nn_additive";
        case MechanismFamily::NNNonAdditive: return "nn_nonadditive";
        case MechanismFamily::Polynomial: return "polynomial";
        case MechanismFamily::Sigmoid: return "sigmoid";
    }
    return "?";
}

InterventionKind intervention_kind_from_string(const std::string& s) {
    if (s == "hard") return InterventionKind::Hard;
    if (s == "shift") return InterventionKind::Shift;
    if (s == "scale") return InterventionKind::Scale;
    throw std::invalid_argument("unknown intervention kind: " + s);
}

std::string to_string(InterventionKind k) {
    switch (k) {
        case InterventionKind::Hard: return "hard";
        case InterventionKind::Shift: return "shift";
        case InterventionKind::Scale: return "scale";
    }
    return "?";
}

std::vector<int> InterventionRegime::target_nodes() const {
    std::vector<int> out;
    out.reserve(targets.size());
    for (const auto& t : targets) out.push_back(t.node);
    return out;
}

namespace {

double sample_signed_weight(Rng& rng, const ScmSamplingConfig& cfg) {
    double mag = rng.uniform(cfg.weight_low, cfg.weight_high);
    return rng.uniform() < 0.5 ? -mag : mag;
}

}  // namespace

Scm instantiate_scm(const Dag& dag, MechanismFamily family, uint64_t seed,
                    const ScmSamplingConfig& cfg) {
    Rng rng(seed);
    Scm scm;
    scm.dag = dag;
    scm.mech.family = family;
    scm.mech.hidden_width = cfg.hidden_width;
    scm.mech.root_low = cfg.root_low;
    scm.mech.root_high = cfg.root_high;
    scm.mech.nodes.resize(dag.n);

    for (int v = 0; v < dag.n; ++v) {
        NodeMechanism& nm = scm.mech.nodes[v];
        nm.parents = dag.parents(v);
        std::sort(nm.parents.begin(), nm.parents.end());
        nm.noise_std = rng.uniform(cfg.noise_std_low, cfg.noise_std_high);
        size_t np = nm.parents.size();
        if (np == 0) continue;  // roots draw from the uniform root distribution

        switch (family) {
            case MechanismFamily::Linear:
            case MechanismFamily::Sigmoid:
                nm.w.resize(np);
                for (auto& w : nm.w) w = sample_signed_weight(rng, cfg);
                break;
            case MechanismFamily::Polynomial:
                nm.w0 = sample_signed_weight(rng, cfg);
                nm.w.resize(np);
                nm.w2.resize(np);
                for (auto& w : nm.w) w = sample_signed_weight(rng, cfg);
                for (auto& w : nm.w2) w = sample_signed_weight(rng, cfg);
                break;
            case MechanismFamily::NNAdditive:
            case MechanismFamily::NNNonAdditive: {
                size_t in = np + (family == MechanismFamily::NNNonAdditive ? 1 : 0);
                int h = cfg.hidden_width;
                nm.w_in.resize(in * h);
                nm.b_in.resize(h);
                nm.w_out.resize(h);
                double scale_in = 1.0 / std::sqrt(static_cast<double>(in));
                for (auto& w : nm.w_in) w = rng.normal(0.0, scale_in);
                for (auto& b : nm.b_in) b = rng.normal(0.0, 0.1);
                double scale_out = 1.0 / std::sqrt(static_cast<double>(h));
                for (auto& w : nm.w_out) w = rng.normal(0.0, scale_out);
                break;
            }
        }
    }
    return scm;
}

namespace {

double eval_mechanism(const Scm& scm, int v, const std::vector<double>& x, Rng& rng) {
    const NodeMechanism& nm = scm.mech.nodes[v];
    const size_t np = nm.parents.size();
    double value;

    if (np == 0) {
        value = rng.uniform(scm.mech.root_low, scm.mech.root_high);
    } else {
        double noise = rng.normal(0.0, nm.noise_std);
        switch (scm.mech.family) {
            case MechanismFamily::Linear: {
                double s = 0.0;
                for (size_t p = 0; p < np; ++p) s += nm.w[p] * x[nm.parents[p]];
                value = s + noise;
                break;
            }
            case MechanismFamily::Polynomial: {
                double s = nm.w0;
                for (size_t p = 0; p < np; ++p) {
                    double xp = x[nm.parents[p]];
                    s += nm.w[p] * xp + nm.w2[p] * xp * xp;
                }
                value = s + noise;
                break;
            }
            case MechanismFamily::Sigmoid: {
                double s = 0.0;
                for (size_t p = 0; p < np; ++p)
                    s += nm.w[p] / (1.0 + std::exp(-x[nm.parents[p]]));
                value = s + noise;
                break;
            }
            case MechanismFamily::NNAdditive: {
                int h = scm.mech.hidden_width;
                double s = 0.0;
                for (int j = 0; j < h; ++j) {
                    double a = nm.b_in[j];
                    for (size_t p = 0; p < np; ++p)
                        a += nm.w_in[p * h + j] * x[nm.parents[p]];
                    s += nm.w_out[j] * std::tanh(a);
                }
                value = s + noise;
                break;
            }
            case MechanismFamily::NNNonAdditive: {
                int h = scm.mech.hidden_width;
                double s = 0.0;
                for (int j = 0; j < h; ++j) {
                    double a = nm.b_in[j];
                    for (size_t p = 0; p < np; ++p)
                        a += nm.w_in[p * h + j] * x[nm.parents[p]];
                    a += nm.w_in[np * h + j] * noise;
                    s += nm.w_out[j] * std::tanh(a);
                }
                value = s;
                break;
            }
            default:
                throw std::logic_error("eval_mechanism: unhandled family");
        }
    }

    switch (nm.iv) {
        case NodeIntervention::None: break;
        case NodeIntervention::HardUniform: value = rng.uniform(nm.iv_a, nm.iv_b); break;
        case NodeIntervention::Shift: value += nm.iv_a; break;
        case NodeIntervention::Scale: value *= nm.iv_a; break;
    }
    return value;
}

}  // namespace

Matrix sample_data(const Scm& scm, size_t m, uint64_t seed) {
    const int n = scm.dag.n;
    Matrix out(m, static_cast<size_t>(n));
    if (m == 0) return out;
    std::vector<int> order = scm.dag.topological_order();
    Rng rng(seed);
    std::vector<double> x(n);
    for (size_t i = 0; i < m; ++i) {
        for (int v : order) x[v] = eval_mechanism(scm, v, x, rng);
        for (int v = 0; v < n; ++v) out(i, v) = x[v];
    }
    return out;
}

std::pair<Scm, Dag> mutilate(const Scm& scm, const InterventionRegime& regime) {
    if (regime.targets.empty())
        throw std::invalid_argument("mutilate: regime has no targets");
    Scm out = scm;
    Dag g_int = scm.dag;
    for (const auto& t : regime.targets) {
        if (t.node < 0 || t.node >= scm.dag.n)
            throw std::invalid_argument("mutilate: target out of range");
        NodeMechanism& nm = out.mech.nodes[t.node];
        switch (t.kind) {
            case InterventionKind::Hard: {
                nm.iv = NodeIntervention::HardUniform;
                nm.iv_a = t.low;
                nm.iv_b = t.high;
                // sever parent dependence
                nm.parents.clear();
                nm.w.clear();
                nm.w2.clear();
                nm.w_in.clear();
                nm.b_in.clear();
                nm.w_out.clear();
                for (auto it = g_int.edges.begin(); it != g_int.edges.end();) {
                    if (it->second == t.node)
                        it = g_int.edges.erase(it);
                    else
                        ++it;
                }
                break;
            }
            case InterventionKind::Shift:
                nm.iv = NodeIntervention::Shift;
                nm.iv_a = t.delta;
                break;
            case InterventionKind::Scale:
                nm.iv = NodeIntervention::Scale;
                nm.iv_a = t.factor;
                break;
        }
    }
    return {out, g_int};
}

InterventionRegime sample_regime(const std::vector<int>& targets, InterventionKind kind,
                                 Rng& rng) {
    InterventionRegime regime;
    for (int node : targets) {
        TargetIntervention t;
        t.node = node;
        t.kind = kind;
        double z1 = rng.uniform(2.0, 4.0);
        double z = rng.uniform(-1.0, 1.0);
        double sign = z < 0.0 ? -1.0 : 1.0;
        switch (kind) {
            case InterventionKind::Hard:
                t.low = -1.0;
                t.high = 1.0;
                break;
            case InterventionKind::Shift:
                t.delta = sign * z1;
                break;
            case InterventionKind::Scale:
                t.factor = std::pow(z1, sign);
                break;
        }
        regime.targets.push_back(t);
    }
    return regime;
}

Matrix linear_scm_covariance(const Scm& scm) {
    if (scm.mech.family != MechanismFamily::Linear)
        throw std::invalid_argument("linear_scm_covariance: SCM is not linear");
    const int n = scm.dag.n;
    // x = W^T x + e  =>  Cov = (I - W)^-T D (I - W)^-1 with W[p][c] the edge weight
    std::vector<double> a(n * n, 0.0);  // (I - W^T) row-major: x = A^{-1} e
    for (int v = 0; v < n; ++v) {
        const NodeMechanism& nm = scm.mech.nodes[v];
        // scale intervention x_v = c (w.x_par + e_v)  <=>  x_v / c - w.x_par = e_v
        a[v * n + v] = nm.iv == NodeIntervention::Scale ? 1.0 / nm.iv_a : 1.0;
        for (size_t p = 0; p < nm.parents.size(); ++p) a[v * n + nm.parents[p]] -= nm.w[p];
    }
    std::vector<double> ainv;
    if (!linalg::invert(a, n, ainv))
        throw std::runtime_error("linear_scm_covariance: singular system");
    std::vector<double> d(n);
    for (int v = 0; v < n; ++v) {
        const NodeMechanism& nm = scm.mech.nodes[v];
        bool is_root = nm.parents.empty();
        if (nm.iv == NodeIntervention::HardUniform) {
            double w = nm.iv_b - nm.iv_a;
            d[v] = w * w / 12.0;
        } else if (is_root) {
            double w = scm.mech.root_high - scm.mech.root_low;
            d[v] = w * w / 12.0;
        } else {
            d[v] = nm.noise_std * nm.noise_std;
        }
    }
    Matrix cov(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += ainv[i * n + k] * d[k] * ainv[j * n + k];
            cov(i, j) = s;
        }
    return cov;
}

}  // namespace cdn
