#pragma once

#include <string>
#include <vector>

#include "cdn/eval.hpp"
#include "cdn/model.hpp"

namespace cdn {

struct TrainConfig {
    int batch_size = 16;
    int max_epochs = 1000;
    int patience = 50;
    double lr = 1e-4;
    double weight_decay = 1e-5;
    double val_fraction = 0.1;
    uint64_t seed = 0;
};

TrainConfig train_config_from_json(const std::string& text);  // strict keys
std::string train_config_to_json(const TrainConfig& cfg);

// Computes and caches features_obs.bin / features_int.bin next to each dataset
// side. With allow_compute=false, missing or stale caches are an error.
void ensure_features(const std::string& corpus_dir,
                     const std::vector<DatasetRecord>& records, const CdnConfig& cfg,
                     int workers, bool allow_compute);

struct TrainResult {
    std::string checkpoint_path;
    std::string log_path;
    int best_epoch = -1;
    double best_val_map = 0.0;
    double best_val_auc = 0.0;
    int epochs_run = 0;
};

TrainResult train(const std::string& corpus_dir, const CdnConfig& cfg,
                  const TrainConfig& tcfg, const std::string& out_dir, int workers = 1,
                  bool no_featurize = false);

// scorer over a corpus using cached features (featurizing on the fly if allowed)
RegimeScorer make_cdn_scorer(const CdnConfig& cfg, nn::ParamStore& params,
                             uint64_t seed, int ensemble = 4);

}  // namespace cdn
