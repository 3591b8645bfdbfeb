#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "cdn/baselines.hpp"
#include "cdn/eval.hpp"
#include "doctest.h"

using namespace cdn;
namespace fs = std::filesystem;

namespace {

// independent quadratic-time reference: explicit worst-case-last ordering
double ap_oracle(std::vector<double> scores, std::vector<int> labels) {
    std::vector<int> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return labels[a] < labels[b];
    });
    double hits = 0.0, sum = 0.0, positives = 0.0;
    for (size_t r = 0; r < idx.size(); ++r) {
        if (labels[idx[r]] == 1) {
            hits += 1.0;
            positives += 1.0;
            sum += hits / static_cast<double>(r + 1);
        }
    }
    return sum / positives;
}

double auc_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0, pairs = 0.0;
    for (size_t i = 0; i < scores.size(); ++i)
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[i] != 1 || labels[j] != 0) continue;
            pairs += 1.0;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    return wins / pairs;
}

}  // namespace

TEST_CASE("average precision and auroc on worked examples") {
    std::vector<double> s = {0.9, 0.8, 0.7};
    std::vector<int> l = {1, 0, 1};
    CHECK(average_precision(s, l) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK(auroc(s, l) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ties rank positives last") {
    std::vector<double> s = {1.0, 1.0, 1.0, 1.0};
    std::vector<int> l = {1, 0, 0, 0};
    CHECK(average_precision(s, l) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(auroc(s, l) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("metrics match the brute-force oracles on random tied instances") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        size_t n = 3 + rng.below(12);
        std::vector<double> s(n);
        std::vector<int> l(n);
        bool has_pos = false, has_neg = false;
        for (size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.below(4));  // force heavy ties
            l[i] = static_cast<int>(rng.below(2));
            (l[i] ? has_pos : has_neg) = true;
        }
        if (!has_pos) l[0] = 1;
        if (!has_neg) l[n - 1] = 0;
        CHECK(std::abs(average_precision(s, l) - ap_oracle(s, l)) < 1e-12);
        CHECK(std::abs(auroc(s, l) - auc_oracle(s, l)) < 1e-12);
    }
}

TEST_CASE("degenerate label sets throw") {
    CHECK_THROWS(average_precision({1.0, 2.0}, {0, 0}));
    CHECK_THROWS(auroc({1.0, 2.0}, {1, 1}));
    CHECK_THROWS(auroc({1.0, 2.0}, {0, 0}));
}

TEST_CASE("normalized rank with averaged tie positions") {
    std::vector<double> s = {5.0, 1.0, 1.0, 1.0, 0.0};
    // tied group occupies positions 2..4, average 3
    CHECK(normalized_rank(s, 2) == doctest::Approx((5.0 - 3.0) / 4.0).epsilon(1e-12));
    CHECK(normalized_rank(s, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(normalized_rank(s, 4) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("effect correlation on the quadratic example") {
    auto [spearman, pearson] = effect_correlation({1, 2, 3}, {1, 4, 9});
    CHECK(spearman == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pearson == doctest::Approx(8.0 / std::sqrt(2.0 * 294.0 / 9.0)).epsilon(1e-12));
    // spearman is invariant under monotone transforms of either side
    auto [s2, p2] = effect_correlation({0.1, 0.2, 0.3}, {std::exp(1.0), std::exp(4.0),
                                                         std::exp(9.0)});
    CHECK(s2 == doctest::Approx(1.0).epsilon(1e-12));
    auto [s3, p3] = effect_correlation({1, 1, 1}, {1, 2, 3});
    CHECK(std::isnan(s3));
    CHECK(std::isnan(p3));
    CHECK_THROWS(effect_correlation({1, 2}, {1, 2}));
}

TEST_CASE("recall curve on the per-node grid integrates to the mean rank") {
    Rng rng(7);
    const int c = 10;
    std::vector<RegimeResult> results;
    for (int r = 0; r < 40; ++r) {
        RegimeResult rr;
        rr.scores.resize(c);
        for (auto& v : rr.scores) v = rng.normal();
        int t1 = static_cast<int>(rng.below(c));
        int t2 = (t1 + 1 + static_cast<int>(rng.below(c - 1))) % c;
        rr.targets = {t1, t2};
        results.push_back(rr);
    }
    std::vector<double> grid(c);
    for (int i = 0; i < c; ++i) grid[i] = static_cast<double>(i + 1) / c;
    auto curve = recall_curve(results, grid);
    REQUIRE(curve.size() == grid.size());
    double integral = 0.0;
    for (auto& [p, rec] : curve) {
        CHECK(rec >= 0.0);
        CHECK(rec <= 1.0);
        integral += rec / grid.size();
    }
    CHECK(curve.back().second == doctest::Approx(1.0));
    double mean_rank = 0.0;
    int count = 0;
    for (const auto& rr : results)
        for (int t : rr.targets) {
            mean_rank += normalized_rank(rr.scores, t);
            ++count;
        }
    mean_rank /= count;
    CHECK(std::abs(integral - mean_rank) < 1.0 / c);
}

TEST_CASE("evaluate_suite aggregates an oracle scorer and records failures") {
    fs::path dir = fs::path("tmp_tests") / "eval_suite";
    fs::remove_all(dir);
    CorpusConfig cfg;
    cfg.node_counts = {6};
    cfg.edge_multipliers = {1.5};
    cfg.families = {MechanismFamily::Linear};
    cfg.kinds = {InterventionKind::Hard};
    cfg.datasets_per_config = 2;
    cfg.m_obs = 40;
    cfg.m_int = 20;
    cfg.regimes_per_size = 2;
    cfg.seed = 11;
    auto records = generate_corpus(cfg, dir.string(), 1);

    RegimeScorer oracle = [](const LoadedDataset& ds, const LoadedRegime& lr, int) {
        return analytic_hard_detector(ds.g_obs, lr.g_int);
    };
    Report rep = evaluate_suite(dir.string(), records, oracle, "oracle-hard");
    CHECK(rep.method == "oracle-hard");
    CHECK(rep.regime_count == 12);
    CHECK(rep.failure_count == 0);
    CHECK(rep.map > 0.4);  // hard targets with no parents score zero and tie
    CHECK(rep.auc > 0.4);
    REQUIRE(!rep.groups.empty());
    int total = 0;
    for (const auto& g : rep.groups) {
        CHECK(g.family == "linear");
        CHECK(g.kind == "hard");
        total += g.count;
    }
    CHECK(total == 12);

    std::vector<RegimeResult> rows;
    RegimeScorer flaky = [&](const LoadedDataset& ds, const LoadedRegime& lr,
                             int r) -> std::vector<double> {
        if (r == 0) throw std::runtime_error("synthetic failure");
        return analytic_hard_detector(ds.g_obs, lr.g_int);
    };
    Report rep2 =
        evaluate_suite(dir.string(), records, flaky, "flaky", false,
                       default_recall_grid(), &rows);
    CHECK(rep2.failure_count == 2);  // one per dataset
    CHECK(rep2.regime_count == 12);
    CHECK(rows.size() == 12);

    fs::path out = fs::path("tmp_tests") / "eval_report";
    fs::remove_all(out);
    write_report(out.string(), rep2, rows);
    CHECK(fs::exists(out / "report.json"));
    CHECK(fs::exists(out / "per_regime.csv"));
    CHECK(fs::exists(out / "recall_curve.csv"));
    fs::remove_all(dir);
    fs::remove_all(out);
}
