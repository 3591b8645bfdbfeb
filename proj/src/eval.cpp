#include "cdn/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cdn {

namespace {

// descending by score; within ties, negatives first (worst-case-last policy)
std::vector<size_t> ranking(const std::vector<double>& scores,
                            const std::vector<int>& labels) {
    std::vector<size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return labels[a] < labels[b];
    });
    return idx;
}

// 1-based average position of index `target` under descending scores
double tie_averaged_position(const std::vector<double>& scores, int target) {
    double s = scores[target];
    int greater = 0, tied = 0;
    for (double x : scores) {
        if (x > s) ++greater;
        if (x == s) ++tied;
    }
    return greater + (tied + 1) / 2.0;
}

}  // namespace

double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("average_precision: length mismatch");
    int positives = std::accumulate(labels.begin(), labels.end(), 0);
    if (positives == 0)
        throw std::invalid_argument("average_precision: no positive labels");
    auto idx = ranking(scores, labels);
    double ap = 0.0;
    int hits = 0;
    for (size_t r = 0; r < idx.size(); ++r) {
        if (labels[idx[r]] == 1) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    return ap / positives;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("auroc: length mismatch");
    double wins = 0.0;
    size_t np = 0, nn = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == 1) {
            ++np;
            for (size_t j = 0; j < scores.size(); ++j) {
                if (labels[j] != 0) continue;
                if (scores[i] > scores[j])
                    wins += 1.0;
                else if (scores[i] == scores[j])
                    wins += 0.5;
            }
        } else {
            ++nn;
        }
    }
    if (np == 0 || nn == 0)
        throw std::invalid_argument("auroc: need both classes");
    return wins / (static_cast<double>(np) * static_cast<double>(nn));
}

double normalized_rank(const std::vector<double>& scores, int target_index) {
    size_t c = scores.size();
    if (c < 2) throw std::invalid_argument("normalized_rank: need >= 2 candidates");
    if (target_index < 0 || static_cast<size_t>(target_index) >= c)
        throw std::invalid_argument("normalized_rank: target out of range");
    double pos = tie_averaged_position(scores, target_index);
    return (static_cast<double>(c) - pos) / (static_cast<double>(c) - 1.0);
}

std::pair<double, double> effect_correlation(const std::vector<double>& pred,
                                             const std::vector<double>& truth) {
    size_t n = pred.size();
    if (n != truth.size() || n < 3)
        throw std::invalid_argument("effect_correlation: need equal lengths >= 3");
    auto pearson = [n](const std::vector<double>& a, const std::vector<double>& b) {
        double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
        double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
        double sab = 0.0, saa = 0.0, sbb = 0.0;
        for (size_t i = 0; i < n; ++i) {
            sab += (a[i] - ma) * (b[i] - mb);
            saa += (a[i] - ma) * (a[i] - ma);
            sbb += (b[i] - mb) * (b[i] - mb);
        }
        if (saa == 0.0 || sbb == 0.0)
            return std::numeric_limits<double>::quiet_NaN();
        return sab / std::sqrt(saa * sbb);
    };
    auto avg_ranks = [n](const std::vector<double>& a) {
        std::vector<double> r(n);
        for (size_t i = 0; i < n; ++i) {
            int less = 0, tied = 0;
            for (size_t j = 0; j < n; ++j) {
                if (a[j] < a[i]) ++less;
                if (a[j] == a[i]) ++tied;
            }
            r[i] = less + (tied + 1) / 2.0;
        }
        return r;
    };
    return {pearson(avg_ranks(pred), avg_ranks(truth)), pearson(pred, truth)};
}

std::vector<std::pair<double, double>> recall_curve(
    const std::vector<RegimeResult>& results, const std::vector<double>& grid) {
    std::vector<std::pair<double, double>> curve;
    for (double p : grid) {
        long long hits = 0, total = 0;
        for (const auto& res : results) {
            if (res.failed) continue;
            double c = static_cast<double>(res.scores.size());
            double cutoff = std::ceil(p * c);
            for (int t : res.targets) {
                ++total;
                if (tie_averaged_position(res.scores, t) <= cutoff) ++hits;
            }
        }
        curve.push_back({p, total ? static_cast<double>(hits) / total : 0.0});
    }
    return curve;
}

std::vector<double> default_recall_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 20; ++i) grid.push_back(i * 0.05);
    return grid;
}

Report evaluate_suite(const std::string& corpus_dir,
                      const std::vector<DatasetRecord>& subset, RegimeScorer scorer,
                      const std::string& method, bool pooled,
                      const std::vector<double>& grid,
                      std::vector<RegimeResult>* rows_out) {
    std::vector<RegimeResult> rows;
    for (const auto& rec : subset) {
        LoadedDataset ds = load_dataset((fs::path(corpus_dir) / rec.dir).string());
        for (int r = 0; r < ds.num_regimes; ++r) {
            RegimeResult res;
            res.dataset_id = rec.id;
            res.regime_id = r;
            res.method = method;
            res.family = to_string(rec.family);
            try {
                LoadedRegime lr = load_regime(ds, r);
                res.targets = lr.regime.target_nodes();
                res.kind = to_string(lr.regime.targets.at(0).kind);
                auto t0 = std::chrono::steady_clock::now();
                res.scores = scorer(ds, lr, r);
                auto t1 = std::chrono::steady_clock::now();
                res.seconds = std::chrono::duration<double>(t1 - t0).count();
                if (res.scores.size() != static_cast<size_t>(ds.n))
                    throw std::runtime_error("scorer returned wrong length");
            } catch (const std::exception& e) {
                res.failed = true;
                res.error = e.what();
            }
            rows.push_back(std::move(res));
        }
    }

    Report report;
    report.method = method;
    report.aggregation = pooled ? "pooled" : "per_regime";
    report.regime_count = static_cast<int>(rows.size());

    std::map<std::tuple<std::string, std::string, int>, std::vector<const RegimeResult*>>
        groups;
    std::vector<const RegimeResult*> ok;
    for (const auto& res : rows) {
        if (res.failed) {
            ++report.failure_count;
            continue;
        }
        ok.push_back(&res);
        groups[{res.family, res.kind, static_cast<int>(res.targets.size())}].push_back(
            &res);
    }

    auto labels_of = [](const RegimeResult& res) {
        std::vector<int> labels(res.scores.size(), 0);
        for (int t : res.targets) labels[t] = 1;
        return labels;
    };
    auto aggregate = [&](const std::vector<const RegimeResult*>& members, double& map,
                         double& auc, double& mean_rank) {
        if (members.empty()) return;
        if (pooled) {
            std::vector<double> scores;
            std::vector<int> labels;
            for (const auto* res : members) {
                auto l = labels_of(*res);
                scores.insert(scores.end(), res->scores.begin(), res->scores.end());
                labels.insert(labels.end(), l.begin(), l.end());
            }
            map = average_precision(scores, labels);
            auc = auroc(scores, labels);
        } else {
            for (const auto* res : members) {
                auto l = labels_of(*res);
                map += average_precision(res->scores, l);
                auc += auroc(res->scores, l);
            }
            map /= members.size();
            auc /= members.size();
        }
        long long targets = 0;
        for (const auto* res : members)
            for (int t : res->targets) {
                mean_rank += normalized_rank(res->scores, t);
                ++targets;
            }
        if (targets) mean_rank /= static_cast<double>(targets);
    };

    for (const auto& [key, members] : groups) {
        GroupMetrics g;
        g.family = std::get<0>(key);
        g.kind = std::get<1>(key);
        g.target_count = std::get<2>(key);
        g.count = static_cast<int>(members.size());
        aggregate(members, g.map, g.auc, g.mean_rank);
        report.groups.push_back(g);
    }
    aggregate(ok, report.map, report.auc, report.mean_rank);
    report.recall = recall_curve(rows, grid);

    if (!ok.empty()) {
        double mn = std::numeric_limits<double>::infinity(), mx = 0.0, sum = 0.0;
        for (const auto* res : ok) {
            mn = std::min(mn, res->seconds);
            mx = std::max(mx, res->seconds);
            sum += res->seconds;
        }
        report.sec_min = mn;
        report.sec_max = mx;
        report.sec_mean = sum / ok.size();
        double ss = 0.0;
        for (const auto* res : ok)
            ss += (res->seconds - report.sec_mean) * (res->seconds - report.sec_mean);
        report.sec_std = std::sqrt(ss / ok.size());
    }
    if (rows_out) *rows_out = std::move(rows);
    return report;
}

void write_report(const std::string& out_dir, const Report& report,
                  const std::vector<RegimeResult>& rows) {
    fs::create_directories(out_dir);
    json j;
    j["method"] = report.method;
    j["aggregation"] = report.aggregation;
    j["regime_count"] = report.regime_count;
    j["failure_count"] = report.failure_count;
    j["mAP"] = report.map;
    j["AUC"] = report.auc;
    j["mean_normalized_rank"] = report.mean_rank;
    j["runtime"] = {{"min", report.sec_min},
                    {"max", report.sec_max},
                    {"mean", report.sec_mean},
                    {"std", report.sec_std}};
    j["groups"] = json::array();
    for (const auto& g : report.groups)
        j["groups"].push_back({{"family", g.family},
                               {"kind", g.kind},
                               {"target_count", g.target_count},
                               {"count", g.count},
                               {"mAP", g.map},
                               {"AUC", g.auc},
                               {"mean_normalized_rank", g.mean_rank}});
    std::ofstream jout(fs::path(out_dir) / "report.json");
    jout << j.dump(2) << "\n";
    if (!jout) throw std::runtime_error("write failure: report.json");

    std::ofstream cout_(fs::path(out_dir) / "per_regime.csv");
    cout_ << "dataset,regime,method,mAP,AUC,rank,seconds\n";
    for (const auto& res : rows) {
        if (res.failed) {
            cout_ << res.dataset_id << "," << res.regime_id << "," << res.method
                  << ",,,," << "\n";
            continue;
        }
        std::vector<int> labels(res.scores.size(), 0);
        for (int t : res.targets) labels[t] = 1;
        double rank = 0.0;
        for (int t : res.targets) rank += normalized_rank(res.scores, t);
        rank /= res.targets.size();
        cout_ << res.dataset_id << "," << res.regime_id << "," << res.method << ","
              << average_precision(res.scores, labels) << ","
              << auroc(res.scores, labels) << "," << rank << "," << res.seconds
              << "\n";
    }
    if (!cout_) throw std::runtime_error("write failure: per_regime.csv");

    std::ofstream rout(fs::path(out_dir) / "recall_curve.csv");
    rout << "p,recall\n";
    for (const auto& [p, rec] : report.recall) rout << p << "," << rec << "\n";
    if (!rout) throw std::runtime_error("write failure: recall_curve.csv");
}

}  // namespace cdn
