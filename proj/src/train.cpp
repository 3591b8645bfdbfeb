#include "cdn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cdn/log.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cdn {

TrainConfig train_config_from_json(const std::string& text) {
    json j = json::parse(text);
    static const std::set<std::string> allowed = {
        "batch_size", "max_epochs", "patience", "lr",
        "weight_decay", "val_fraction", "seed"};
    for (auto& [k, v] : j.items())
        if (!allowed.count(k))
            throw std::invalid_argument("unknown config key \"" + k +
                                        "\" in train config");
    TrainConfig cfg;
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"];
    if (j.contains("max_epochs")) cfg.max_epochs = j["max_epochs"];
    if (j.contains("patience")) cfg.patience = j["patience"];
    if (j.contains("lr")) cfg.lr = j["lr"];
    if (j.contains("weight_decay")) cfg.weight_decay = j["weight_decay"];
    if (j.contains("val_fraction")) cfg.val_fraction = j["val_fraction"];
    if (j.contains("seed")) cfg.seed = j["seed"];
    if (cfg.batch_size < 1 || cfg.max_epochs < 1 || cfg.patience < 1 ||
        cfg.val_fraction <= 0.0 || cfg.val_fraction >= 1.0)
        throw std::invalid_argument("train config: invalid values");
    return cfg;
}

std::string train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["batch_size"] = cfg.batch_size;
    j["max_epochs"] = cfg.max_epochs;
    j["patience"] = cfg.patience;
    j["lr"] = cfg.lr;
    j["weight_decay"] = cfg.weight_decay;
    j["val_fraction"] = cfg.val_fraction;
    j["seed"] = cfg.seed;
    return j.dump();
}

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t obs_feature_seed(uint64_t ds_seed) { return Rng(ds_seed).fork(0xF0).next_u64(); }
uint64_t int_feature_seed(uint64_t ds_seed, int r) {
    return Rng(ds_seed).fork(0xF1).fork(r + 1).next_u64();
}

bool features_match(const SideFeatures& fb, const CdnConfig& cfg, int n) {
    return fb.est.n == n && fb.est.k == cfg.k &&
           fb.est.subsets.size() == static_cast<size_t>(cfg.t) &&
           fb.alpha == cfg.alpha;
}

SideFeatures side_features_cached(const std::string& data_path,
                                  const std::string& cache_path, size_t rows,
                                  size_t cols, const CdnConfig& cfg, uint64_t seed,
                                  bool allow_compute, Matrix* data_out) {
    Matrix data = read_f32(data_path, rows, cols);
    if (fs::exists(cache_path)) {
        SideFeatures fb = load_features(cache_path);
        if (features_match(fb, cfg, static_cast<int>(cols))) {
            if (data_out) *data_out = std::move(data);
            return fb;
        }
        if (!allow_compute)
            throw std::runtime_error("stale feature cache: " + cache_path);
    } else if (!allow_compute) {
        throw std::runtime_error("missing feature cache: " + cache_path);
    }
    SideFeatures fb = featurize_side(data, cfg.k, cfg.t, cfg.alpha, seed);
    save_features(cache_path, fb);
    if (data_out) *data_out = std::move(data);
    return fb;
}

struct TrainItem {
    FeatureBundle fb;
    Dag g_obs, g_int;
    std::vector<int> targets;
    int n = 0;
};

}  // namespace

void ensure_features(const std::string& corpus_dir,
                     const std::vector<DatasetRecord>& records, const CdnConfig& cfg,
                     int workers, bool allow_compute) {
#ifdef _OPENMP
    if (workers > 0) omp_set_num_threads(workers);
#endif
    std::string failure;
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(records.size()); ++i) {
        try {
            const auto& rec = records[i];
            fs::path ds_dir = fs::path(corpus_dir) / rec.dir;
            side_features_cached((ds_dir / "obs.f32").string(),
                                 (ds_dir / "features_obs.bin").string(), rec.m_obs,
                                 rec.n, cfg, obs_feature_seed(rec.seed), allow_compute,
                                 nullptr);
            for (int r = 0; r < rec.num_regimes; ++r) {
                fs::path rdir = ds_dir / ("regime_" + std::to_string(r));
                side_features_cached((rdir / "int.f32").string(),
                                     (rdir / "features_int.bin").string(), rec.m_int,
                                     rec.n, cfg, int_feature_seed(rec.seed, r),
                                     allow_compute, nullptr);
            }
        } catch (const std::exception& e) {
#pragma omp critical
            failure = e.what();
        }
    }
    if (!failure.empty()) throw std::runtime_error(failure);
}

TrainResult train(const std::string& corpus_dir, const CdnConfig& cfg,
                  const TrainConfig& tcfg, const std::string& out_dir, int workers,
                  bool no_featurize) {
    auto records = read_manifest(corpus_dir);
    if (records.empty()) throw std::runtime_error("train: empty corpus");
    ensure_features(corpus_dir, records, cfg, workers, !no_featurize);
    log_info("featurization ready for " + std::to_string(records.size()) +
             " datasets");

    // load everything into memory, one item per (dataset, regime) pair
    std::vector<std::vector<TrainItem>> per_dataset(records.size());
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(records.size()); ++i) {
        const auto& rec = records[i];
        fs::path ds_dir = fs::path(corpus_dir) / rec.dir;
        LoadedDataset ds = load_dataset(ds_dir.string());
        Matrix obs;
        SideFeatures so = side_features_cached(
            (ds_dir / "obs.f32").string(), (ds_dir / "features_obs.bin").string(),
            rec.m_obs, rec.n, cfg, obs_feature_seed(rec.seed), false, &obs);
        for (int r = 0; r < rec.num_regimes; ++r) {
            fs::path rdir = ds_dir / ("regime_" + std::to_string(r));
            LoadedRegime lr = load_regime(ds, r);
            Matrix intv;
            SideFeatures si = side_features_cached(
                (rdir / "int.f32").string(), (rdir / "features_int.bin").string(),
                rec.m_int, rec.n, cfg, int_feature_seed(rec.seed, r), false, &intv);
            TrainItem item;
            item.fb = bundle_from_sides(so, si, obs, intv);
            item.g_obs = ds.g_obs;
            item.g_int = lr.g_int;
            item.targets = lr.regime.target_nodes();
            item.n = rec.n;
            per_dataset[i].push_back(std::move(item));
        }
    }

    // dataset-level train/validation split
    Rng split_rng = Rng(tcfg.seed).fork(123);
    std::vector<int> order = split_rng.permutation(static_cast<int>(records.size()));
    size_t val_count = std::max<size_t>(
        1, static_cast<size_t>(std::lround(tcfg.val_fraction * records.size())));
    if (val_count >= records.size())
        throw std::runtime_error("train: validation split leaves no training data");
    std::vector<TrainItem> train_items, val_items;
    for (size_t i = 0; i < order.size(); ++i) {
        auto& dst = i < val_count ? val_items : train_items;
        for (auto& item : per_dataset[order[i]]) dst.push_back(std::move(item));
    }
    log_info("train pairs: " + std::to_string(train_items.size()) +
             ", val pairs: " + std::to_string(val_items.size()));

    nn::ParamStore params = make_params(cfg, Rng(tcfg.seed).fork(7).next_u64());
    nn::OptimizerState opt;
    opt.lr = tcfg.lr;
    opt.weight_decay = tcfg.weight_decay;

    fs::create_directories(out_dir);
    TrainResult result;
    result.checkpoint_path = (fs::path(out_dir) / "checkpoint.bin").string();
    result.log_path = (fs::path(out_dir) / "train_log.csv").string();
    std::ofstream log(result.log_path);
    log << "epoch,L_G,L_I,val_mAP,val_AUC,seconds\n";
    if (!log) throw std::runtime_error("cannot write training log");

    auto validate = [&](double& map_out, double& auc_out) {
        double map = 0.0, auc = 0.0;
        for (size_t i = 0; i < val_items.size(); ++i) {
            const auto& item = val_items[i];
            Rng perm_rng = Rng(tcfg.seed).fork(50000 + i);
            auto perm = sample_node_permutation(item.n, cfg.n_max, perm_rng);
            Rng drop_rng(1);  // dropout off at evaluation
            nn::Tensor logits =
                model_forward(item.fb, perm, cfg, params, false, drop_rng)
                    .target_logits;
            std::vector<double> scores(item.n);
            for (int v = 0; v < item.n; ++v)
                scores[v] = 1.0 / (1.0 + std::exp(-logits.values()[v]));
            std::vector<int> labels(item.n, 0);
            for (int t : item.targets) labels[t] = 1;
            map += average_precision(scores, labels);
            auc += auroc(scores, labels);
        }
        map_out = map / val_items.size();
        auc_out = auc / val_items.size();
    };

    Rng base(tcfg.seed);
    for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        Rng epoch_rng = base.fork(1000 + epoch);
        std::vector<int> idx =
            epoch_rng.permutation(static_cast<int>(train_items.size()));
        double sum_lg = 0.0, sum_li = 0.0;
        for (size_t start = 0; start < idx.size();
             start += static_cast<size_t>(tcfg.batch_size)) {
            size_t stop = std::min(idx.size(), start + tcfg.batch_size);
            params.zero_grads();
            for (size_t b = start; b < stop; ++b) {
                const auto& item = train_items[idx[b]];
                auto perm = sample_node_permutation(item.n, cfg.n_max, epoch_rng);
                ModelOutput out =
                    model_forward(item.fb, perm, cfg, params, true, epoch_rng);
                Losses l = compute_losses(out, item.g_obs, item.g_int, item.targets);
                sum_lg += l.l_g.scalar();
                sum_li += l.l_i.scalar();
                nn::backward(nn::scale(l.total, 1.0 / static_cast<double>(stop - start)));
            }
            adamw_step(params, opt);
        }
        double val_map = 0.0, val_auc = 0.0;
        validate(val_map, val_auc);
        auto t1 = std::chrono::steady_clock::now();
        double seconds = std::chrono::duration<double>(t1 - t0).count();
        log << epoch << "," << sum_lg / train_items.size() << ","
            << sum_li / train_items.size() << "," << val_map << "," << val_auc << ","
            << seconds << "\n";
        log.flush();
        log_debug("epoch " + std::to_string(epoch) + " val_mAP " +
                  std::to_string(val_map));
        result.epochs_run = epoch;
        if (val_map > result.best_val_map || result.best_epoch < 0) {
            result.best_val_map = val_map;
            result.best_val_auc = val_auc;
            result.best_epoch = epoch;
            nn::save_checkpoint(result.checkpoint_path, params, opt,
                                {{"cdn_config", cdn_config_to_json(cfg)}});
        }
        if (epoch - result.best_epoch >= tcfg.patience) break;
    }
    return result;
}

RegimeScorer make_cdn_scorer(const CdnConfig& cfg, nn::ParamStore& params,
                             uint64_t seed, int ensemble) {
    return [&params, cfg, seed, ensemble](const LoadedDataset& ds,
                                          const LoadedRegime& lr, int regime_index) {
        fs::path ds_dir(ds.dir);
        fs::path rdir = ds_dir / ("regime_" + std::to_string(regime_index));
        uint64_t base = Rng(seed).fork(fnv1a(ds.dir)).next_u64();
        Matrix obs = ds.obs;
        SideFeatures so = side_features_cached(
            (ds_dir / "obs.f32").string(), (ds_dir / "features_obs.bin").string(),
            ds.m_obs, ds.n, cfg, Rng(base).fork(0xF0).next_u64(), true, nullptr);
        SideFeatures si = side_features_cached(
            (rdir / "int.f32").string(), (rdir / "features_int.bin").string(), ds.m_int,
            ds.n, cfg, Rng(base).fork(0xF1).fork(regime_index + 1).next_u64(), true,
            nullptr);
        FeatureBundle fb = bundle_from_sides(so, si, obs, lr.data);
        return predict_targets(fb, cfg, params,
                               Rng(base).fork(regime_index + 7).next_u64(), ensemble);
    };
}

}  // namespace cdn
