#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdn/scm.hpp"

namespace cdn {

struct CorpusConfig {
    std::vector<int> node_counts{10, 20};
    std::vector<double> edge_multipliers{1.0, 2.0};  // expected edges = mult * n
    std::vector<MechanismFamily> families{MechanismFamily::Linear};
    std::vector<InterventionKind> kinds{InterventionKind::Hard};
    int datasets_per_config = 1;
    size_t m_obs = 1000;
    size_t m_int = 500;
    int regimes_per_size = -1;  // -1 -> n regimes per target size (3n total)
    uint64_t seed = 0;
    ScmSamplingConfig scm;
};

// strict parse: unknown keys are an error
CorpusConfig corpus_config_from_json(const std::string& text);
std::string corpus_config_to_json(const CorpusConfig& cfg);

struct DatasetRecord {
    std::string id;
    std::string dir;  // relative to the corpus root
    int n = 0;
    double edge_multiplier = 1.0;
    MechanismFamily family = MechanismFamily::Linear;
    uint64_t seed = 0;
    int num_regimes = 0;
    size_t m_obs = 0, m_int = 0;
};

// writes the full corpus layout under out_dir and returns the manifest entries
std::vector<DatasetRecord> generate_corpus(const CorpusConfig& cfg,
                                           const std::string& out_dir,
                                           int workers = 0);

std::vector<DatasetRecord> read_manifest(const std::string& out_dir);

struct LoadedRegime {
    Matrix data;  // m_int x n
    InterventionRegime regime;
    Dag g_int;
};

struct LoadedDataset {
    std::string dir;
    int n = 0;
    MechanismFamily family = MechanismFamily::Linear;
    int num_regimes = 0;
    size_t m_obs = 0, m_int = 0;
    Matrix obs;
    Dag g_obs;
};

LoadedDataset load_dataset(const std::string& dir);
LoadedRegime load_regime(const LoadedDataset& ds, int r);

// shared low-level IO (also used by predict/baseline on ad-hoc matrices)
void write_f32(const std::string& path, const Matrix& m);
Matrix read_f32(const std::string& path, size_t rows, size_t cols);
void write_graph_csv(const std::string& path, const Dag& g);
Dag read_graph_csv(const std::string& path, int n);

}  // namespace cdn
