#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdn/dag.hpp"
#include "cdn/matrix.hpp"
#include "cdn/rng.hpp"

namespace cdn {

enum class MechanismFamily { Linear, NNAdditive, NNNonAdditive, Polynomial, Sigmoid };

MechanismFamily mechanism_family_from_string(const std::string& s);
std::string to_string(MechanismFamily f);

// Per-node mechanism parameters. Which blocks are populated depends on the family:
//   Linear:        w (one weight per parent)
//   Polynomial:    w0, w (degree-1), w2 (degree-2)
//   Sigmoid:       w
//   NNAdditive:    w_in (parents x hidden), b_in, w_out (hidden)
//   NNNonAdditive: w_in ((parents+1) x hidden, noise as extra input), b_in, w_out
enum class NodeIntervention { None, HardUniform, Shift, Scale };

struct NodeMechanism {
    std::vector<int> parents;  // sorted parent indices
    std::vector<double> w;
    std::vector<double> w2;
    double w0 = 0.0;
    std::vector<double> w_in;
    std::vector<double> b_in;
    std::vector<double> w_out;
    double noise_std = 0.5;
    // applied after the mechanism evaluates (set by mutilate)
    NodeIntervention iv = NodeIntervention::None;
    double iv_a = 0.0;  // HardUniform low / Shift delta / Scale factor
    double iv_b = 0.0;  // HardUniform high
};

struct MechanismSpec {
    MechanismFamily family = MechanismFamily::Linear;
    int hidden_width = 10;
    double root_low = -1.0;
    double root_high = 1.0;
    std::vector<NodeMechanism> nodes;
};

struct Scm {
    Dag dag;
    MechanismSpec mech;
};

enum class InterventionKind { Hard, Shift, Scale };

InterventionKind intervention_kind_from_string(const std::string& s);
std::string to_string(InterventionKind k);

struct TargetIntervention {
    int node = 0;
    InterventionKind kind = InterventionKind::Hard;
    // Hard: draw Uniform(low, high); Shift: add delta; Scale: multiply by factor.
    double low = -1.0;
    double high = 1.0;
    double delta = 0.0;
    double factor = 1.0;
};

struct InterventionRegime {
    std::vector<TargetIntervention> targets;  // 1..3 distinct nodes
    std::vector<int> target_nodes() const;
};

struct ScmSamplingConfig {
    double weight_low = 0.25;   // |w| range for linear / polynomial / sigmoid
    double weight_high = 1.0;
    double noise_std_low = 0.2;
    double noise_std_high = 0.8;
    int hidden_width = 10;
    double root_low = -1.0;
    double root_high = 1.0;
};

Scm instantiate_scm(const Dag& dag, MechanismFamily family, uint64_t seed,
                    const ScmSamplingConfig& cfg = {});

// Ancestral sampling; m rows, one column per node. Deterministic given seed.
Matrix sample_data(const Scm& scm, size_t m, uint64_t seed);

// Apply a regime: returns the mutilated SCM and the interventional graph
// (in-edges of hard targets removed; identical to scm.dag for soft regimes).
std::pair<Scm, Dag> mutilate(const Scm& scm, const InterventionRegime& regime);

// Sample regime parameters per the uniform laws (z1 ~ U(2,4), z ~ U(-1,1)).
InterventionRegime sample_regime(const std::vector<int>& targets, InterventionKind kind,
                                 Rng& rng);

// Analytic covariance of a linear SCM (noise-propagation closed form). Only
// valid for MechanismFamily::Linear; used by tests and simulation checks.
Matrix linear_scm_covariance(const Scm& scm);

}  // namespace cdn
