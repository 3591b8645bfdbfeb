#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cdn/attention.hpp"
#include "cdn/features.hpp"
#include "cdn/optim.hpp"

namespace cdn {

enum class CdnVariant { Diff, Cat };

CdnVariant cdn_variant_from_string(const std::string& s);
std::string to_string(CdnVariant v);

struct CdnConfig {
    int d = 64;
    int structure_layers = 4;  // L_s
    int diff_layers = -1;      // L_d; -1 -> 2 for diff, 3 for cat
    CdnVariant variant = CdnVariant::Diff;
    int n_max = 128;           // permutation embedding table size
    double dropout = 0.1;
    int heads = 1;
    // featurization
    int t = 100;
    int k = 5;
    double alpha = 0.05;

    int resolved_diff_layers() const {
        if (diff_layers >= 0) return diff_layers;
        return variant == CdnVariant::Diff ? 2 : 3;
    }
    int diff_width() const { return variant == CdnVariant::Cat ? 2 * d : d; }
};

CdnConfig cdn_config_from_json(const std::string& text);  // strict keys
std::string cdn_config_to_json(const CdnConfig& cfg);

// Featurized (obs, int) pair: inputs to the network.
struct FeatureBundle {
    Matrix rho_obs, rho_int;          // N x N
    Matrix moments_obs, moments_int;  // N x 2 (mean, variance)
    LocalEstimates local_obs, local_int;
};

FeatureBundle featurize_pair(const Matrix& obs, const Matrix& intv,
                             const CdnConfig& cfg, uint64_t seed);
FeatureBundle bundle_from_sides(const SideFeatures& obs_side,
                                const SideFeatures& int_side, const Matrix& obs,
                                const Matrix& intv);

struct ModelOutput {
    std::vector<std::pair<int, int>> pairs;  // unordered pairs i<j
    nn::Tensor edge_logits_obs;              // [P,3] classes {i->j, j->i, none}
    nn::Tensor edge_logits_int;
    nn::Tensor target_logits;                // [N]
    nn::Tensor h_obs, h_int;                 // [N,N,d]
};

// fresh random injection of 0..n-1 into the embedding table slots
std::vector<int> sample_node_permutation(int n, int n_max, Rng& rng);

nn::ParamStore make_params(const CdnConfig& cfg, uint64_t seed);

// token lattice for one side: [N*N, T+1, d]
nn::Tensor embed_features(const Matrix& rho, const LocalEstimates& est,
                          const std::vector<int>& perm, const CdnConfig& cfg,
                          nn::ParamStore& params);

struct StructureOut {
    nn::Tensor h;  // [N,N,d]
    nn::Tensor edge_logits;
    std::vector<std::pair<int, int>> pairs;
};
StructureOut structure_forward(const nn::Tensor& lattice, int n, const CdnConfig& cfg,
                               nn::ParamStore& params, bool train, Rng& dropout_rng);

nn::Tensor diff_forward(const nn::Tensor& h_obs, const nn::Tensor& h_int,
                        const Matrix& moments_obs, const Matrix& moments_int,
                        const CdnConfig& cfg, nn::ParamStore& params, bool train,
                        Rng& dropout_rng);

ModelOutput model_forward(const FeatureBundle& fb, const std::vector<int>& perm,
                          const CdnConfig& cfg, nn::ParamStore& params, bool train,
                          Rng& dropout_rng);

struct Losses {
    nn::Tensor l_g, l_i, total;
};
Losses compute_losses(const ModelOutput& out, const Dag& g_obs, const Dag& g_int,
                      const std::vector<int>& targets);

// end-to-end prediction with a permutation ensemble averaged in probability space
std::vector<double> predict_targets(const Matrix& obs, const Matrix& intv,
                                    const CdnConfig& cfg, nn::ParamStore& params,
                                    uint64_t seed, int ensemble = 4);
std::vector<double> predict_targets(const FeatureBundle& fb, const CdnConfig& cfg,
                                    nn::ParamStore& params, uint64_t seed,
                                    int ensemble = 4);

}  // namespace cdn
