#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cdn/corpus.hpp"

namespace cdn {

// AP = mean over positives of precision at that positive's rank, descending
// scores; tied items are ordered worst-case-last (negatives before positives).
double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels);

// Mann-Whitney form: P(score_pos > score_neg) + 0.5 P(tie).
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// (C - pos)/(C - 1) with pos the 1-based descending position of the target,
// ties assigned the mean position of their group.
double normalized_rank(const std::vector<double>& scores, int target_index);

// (spearman, pearson); zero-variance input yields NaN sentinels
std::pair<double, double> effect_correlation(const std::vector<double>& pred,
                                             const std::vector<double>& truth);

struct RegimeResult {
    std::string dataset_id;
    int regime_id = 0;
    std::vector<int> targets;
    std::vector<double> scores;
    std::string method;
    std::string family;
    std::string kind;
    double seconds = 0.0;
    bool failed = false;
    std::string error;
};

// for each p: fraction of (regime, target) pairs whose target position is
// within the top ceil(p*C)
std::vector<std::pair<double, double>> recall_curve(
    const std::vector<RegimeResult>& results, const std::vector<double>& grid);

struct GroupMetrics {
    std::string family;
    std::string kind;
    int target_count = 0;
    int count = 0;
    double map = 0.0;
    double auc = 0.0;
    double mean_rank = 0.0;
};

struct Report {
    std::string method;
    std::string aggregation;  // "per_regime" or "pooled"
    std::vector<GroupMetrics> groups;
    int regime_count = 0;
    int failure_count = 0;
    double map = 0.0;   // overall
    double auc = 0.0;
    double mean_rank = 0.0;
    std::vector<std::pair<double, double>> recall;
    double sec_min = 0.0, sec_max = 0.0, sec_mean = 0.0, sec_std = 0.0;
};

using RegimeScorer = std::function<std::vector<double>(
    const LoadedDataset&, const LoadedRegime&, int regime_index)>;

std::vector<double> default_recall_grid();

Report evaluate_suite(const std::string& corpus_dir,
                      const std::vector<DatasetRecord>& subset, RegimeScorer scorer,
                      const std::string& method, bool pooled = false,
                      const std::vector<double>& grid = default_recall_grid(),
                      std::vector<RegimeResult>* rows_out = nullptr);

// report.json, per_regime.csv, recall_curve.csv under out_dir
void write_report(const std::string& out_dir, const Report& report,
                  const std::vector<RegimeResult>& rows);

}  // namespace cdn
