#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cdn/baselines.hpp"
#include "cdn/log.hpp"
#include "cdn/train.hpp"
#include "json.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --config for train/eval: {"model": {...}, "train": {...}}, both optional
void parse_run_config(const std::string& path, cdn::CdnConfig& model,
                      cdn::TrainConfig& tcfg) {
    json j = json::parse(read_file(path));
    for (auto& [k, v] : j.items())
        if (k != "model" && k != "train")
            throw std::invalid_argument("unknown config key \"" + k + "\" in " + path);
    if (j.contains("model")) model = cdn::cdn_config_from_json(j["model"].dump());
    if (j.contains("train")) tcfg = cdn::train_config_from_json(j["train"].dump());
}

void set_workers(int workers) {
#ifdef _OPENMP
    if (workers > 0) omp_set_num_threads(workers);
#endif
}

cdn::Dag graph_from_edge_logits(const cdn::ModelOutput& out, bool interventional,
                                int n) {
    cdn::Dag g;
    g.n = n;
    const auto& logits =
        interventional ? out.edge_logits_int.values() : out.edge_logits_obs.values();
    for (size_t p = 0; p < out.pairs.size(); ++p) {
        const double* z = logits.data() + p * 3;
        int cls = 0;
        if (z[1] > z[cls]) cls = 1;
        if (z[2] > z[cls]) cls = 2;
        auto [i, j] = out.pairs[p];
        if (cls == 0) g.edges.insert({i, j});
        if (cls == 1) g.edges.insert({j, i});
    }
    return g;
}

cdn::RegimeScorer make_scorer(const std::string& method, const cdn::CdnConfig& cfg,
                              cdn::nn::ParamStore* params, bool oracle_graphs,
                              uint64_t seed) {
    using cdn::LoadedDataset;
    using cdn::LoadedRegime;
    if (method == "cdn") {
        if (!params) throw std::invalid_argument("--ckpt is required for method cdn");
        return cdn::make_cdn_scorer(cfg, *params, seed);
    }
    if (method == "analytic-hard") {
        if (oracle_graphs)
            return [](const LoadedDataset& ds, const LoadedRegime& lr, int) {
                return cdn::analytic_hard_detector(ds.g_obs, lr.g_int);
            };
        if (!params)
            throw std::invalid_argument(
                "analytic-hard needs --oracle-graphs or --ckpt (estimated graphs)");
        return [params, cfg, seed](const LoadedDataset& ds, const LoadedRegime& lr,
                                   int r) {
            cdn::FeatureBundle fb = cdn::featurize_pair(
                ds.obs, lr.data, cfg, cdn::Rng(seed).fork(r + 1).next_u64());
            cdn::Rng perm_rng = cdn::Rng(seed).fork(999 + r);
            auto perm = cdn::sample_node_permutation(ds.n, cfg.n_max, perm_rng);
            cdn::Rng drop(1);
            cdn::ModelOutput out =
                cdn::model_forward(fb, perm, cfg, *params, false, drop);
            return cdn::analytic_hard_detector(graph_from_edge_logits(out, false, ds.n),
                                               graph_from_edge_logits(out, true, ds.n));
        };
    }
    if (method == "analytic-soft")
        return [seed](const LoadedDataset& ds, const LoadedRegime& lr, int r) {
            auto th = cdn::default_soft_thresholds(ds.obs, lr.data, 50,
                                                   seed ^ (r + 1));
            return cdn::analytic_soft_detector(cdn::summary_stats(ds.obs),
                                               cdn::summary_stats(lr.data), th.eps_r,
                                               th.eps_s);
        };
    if (method == "mbci")
        return [](const LoadedDataset& ds, const LoadedRegime& lr, int) {
            return cdn::mb_ci_scores(ds.obs, lr.data);
        };
    if (method == "dge")
        return [](const LoadedDataset& ds, const LoadedRegime& lr, int) {
            return cdn::dge_scores(ds.obs, lr.data);
        };
    throw std::invalid_argument("unknown method: " + method);
}

int run(int argc, char** argv) {
    CLI::App app{"causal differential networks: corpus generation, featurization, "
                 "training, prediction, baselines, evaluation"};
    app.require_subcommand(1);

    std::string config_path, out_path, corpus_dir, ckpt_path, method, variant,
        report_dir, aggregation = "per-regime";
    uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0;
    bool oracle_graphs = false, no_featurize = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "master seed")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_option("--workers", workers, "worker thread count");
    };

    auto* gen = app.add_subcommand("gen", "generate a synthetic corpus");
    gen->add_option("--config", config_path, "corpus config JSON")->required();
    gen->add_option("--out", out_path, "output corpus directory")->required();
    add_common(gen);

    auto* feat = app.add_subcommand("featurize", "cache features per dataset side");
    feat->add_option("--corpus", corpus_dir, "corpus directory")->required();
    feat->add_option("--config", config_path, "model config JSON (t, k, alpha)");
    feat->add_option("--variant", variant, "model variant {diff,cat}");
    add_common(feat);

    auto* train = app.add_subcommand("train", "train the model");
    train->add_option("--corpus", corpus_dir, "corpus directory")->required();
    train->add_option("--config", config_path, "run config JSON {model, train}");
    train->add_option("--out", out_path, "checkpoint/log directory")->required();
    train->add_option("--variant", variant, "model variant {diff,cat}");
    train->add_flag("--no-featurize", no_featurize,
                    "require cached features; never compute");
    add_common(train);

    auto* predict = app.add_subcommand("predict", "per-regime target probabilities");
    predict->add_option("--corpus", corpus_dir, "corpus directory")->required();
    predict->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    predict->add_option("--out", out_path, "output CSV path")->required();
    add_common(predict);

    auto* baseline = app.add_subcommand("baseline", "baseline scores CSV");
    baseline->add_option("--corpus", corpus_dir, "corpus directory")->required();
    baseline
        ->add_option("--method", method,
                     "one of {mbci,dge,analytic-hard,analytic-soft}")
        ->required();
    baseline->add_option("--out", out_path, "output CSV path")->required();
    baseline->add_option("--ckpt", ckpt_path, "checkpoint (estimated graphs)");
    baseline->add_flag("--oracle-graphs", oracle_graphs, "use ground-truth graphs");
    add_common(baseline);

    auto* eval = app.add_subcommand("eval", "evaluate a method over a corpus");
    eval->add_option("--corpus", corpus_dir, "corpus directory")->required();
    eval->add_option("--method", method,
                     "one of {cdn,mbci,dge,analytic-hard,analytic-soft}")
        ->required();
    eval->add_option("--ckpt", ckpt_path, "checkpoint file (cdn)");
    eval->add_option("--config", config_path, "run config JSON");
    eval->add_option("--report", report_dir, "report output directory")->required();
    eval->add_flag("--oracle-graphs", oracle_graphs, "use ground-truth graphs");
    eval->add_option("--metric-aggregation", aggregation,
                     "per-regime (default) or pooled")
        ->check(CLI::IsMember({"per-regime", "pooled"}));
    add_common(eval);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    cdn::CdnConfig model_cfg;
    cdn::TrainConfig train_cfg;
    if (!config_path.empty() && !gen->parsed())
        parse_run_config(config_path, model_cfg, train_cfg);
    if (!variant.empty()) {
        model_cfg.variant = cdn::cdn_variant_from_string(variant);
        model_cfg.diff_layers = -1;
    }
    set_workers(workers);

    cdn::nn::ParamStore params;
    bool have_ckpt = false;
    if (!ckpt_path.empty()) {
        cdn::nn::Checkpoint ck = cdn::nn::load_checkpoint(ckpt_path);
        params = std::move(ck.params);
        if (ck.extra.count("cdn_config"))
            model_cfg = cdn::cdn_config_from_json(ck.extra.at("cdn_config"));
        have_ckpt = true;
    }

    if (gen->parsed()) {
        cdn::CorpusConfig cfg = cdn::corpus_config_from_json(read_file(config_path));
        if (seed_set) cfg.seed = seed;
        auto records = cdn::generate_corpus(cfg, out_path, workers);
        cdn::log_info("generated " + std::to_string(records.size()) + " datasets in " +
                      out_path);
        return 0;
    }
    if (feat->parsed()) {
        auto records = cdn::read_manifest(corpus_dir);
        cdn::ensure_features(corpus_dir, records, model_cfg, workers, true);
        cdn::log_info("featurized " + std::to_string(records.size()) + " datasets");
        return 0;
    }
    if (train->parsed()) {
        if (seed_set) train_cfg.seed = seed;
        auto result = cdn::train(corpus_dir, model_cfg, train_cfg, out_path, workers,
                                 no_featurize);
        cdn::log_info("best epoch " + std::to_string(result.best_epoch) + ", val mAP " +
                      std::to_string(result.best_val_map));
        return 0;
    }
    if (predict->parsed()) {
        if (!have_ckpt) throw std::runtime_error("predict: checkpoint failed to load");
        auto records = cdn::read_manifest(corpus_dir);
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write: " + out_path);
        out << "dataset,regime,node,probability\n";
        auto scorer = cdn::make_cdn_scorer(model_cfg, params, seed);
        for (const auto& rec : records) {
            cdn::LoadedDataset ds =
                cdn::load_dataset((fs::path(corpus_dir) / rec.dir).string());
            for (int r = 0; r < ds.num_regimes; ++r) {
                cdn::LoadedRegime lr = cdn::load_regime(ds, r);
                auto probs = scorer(ds, lr, r);
                for (int v = 0; v < ds.n; ++v)
                    out << rec.id << "," << r << "," << v << "," << probs[v] << "\n";
            }
        }
        return 0;
    }
    if (baseline->parsed() || eval->parsed()) {
        auto scorer = make_scorer(eval->parsed() ? method : method, model_cfg,
                                  have_ckpt ? &params : nullptr, oracle_graphs, seed);
        auto records = cdn::read_manifest(corpus_dir);
        if (baseline->parsed()) {
            std::ofstream out(out_path);
            if (!out) throw std::runtime_error("cannot write: " + out_path);
            out << "dataset,regime,node,score\n";
            for (const auto& rec : records) {
                cdn::LoadedDataset ds =
                    cdn::load_dataset((fs::path(corpus_dir) / rec.dir).string());
                for (int r = 0; r < ds.num_regimes; ++r) {
                    cdn::LoadedRegime lr = cdn::load_regime(ds, r);
                    auto scores = scorer(ds, lr, r);
                    for (int v = 0; v < ds.n; ++v)
                        out << rec.id << "," << r << "," << v << "," << scores[v]
                            << "\n";
                }
            }
            return 0;
        }
        std::vector<cdn::RegimeResult> rows;
        cdn::Report report =
            cdn::evaluate_suite(corpus_dir, records, scorer, method,
                                aggregation == "pooled", cdn::default_recall_grid(),
                                &rows);
        cdn::write_report(report_dir, report, rows);
        cdn::log_info("method " + method + ": mAP " + std::to_string(report.map) +
                      ", AUC " + std::to_string(report.auc));
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::invalid_argument& e) {
        cdn::log_error(e.what());
        return 1;
    } catch (const std::exception& e) {
        cdn::log_error(e.what());
        return 2;
    }
}
