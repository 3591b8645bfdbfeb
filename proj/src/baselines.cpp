#include "cdn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cdn {

std::vector<double> analytic_hard_detector(const Dag& g_obs, const Dag& g_int) {
    if (g_obs.n != g_int.n)
        throw std::invalid_argument("analytic_hard_detector: node count mismatch");
    std::vector<double> scores(g_obs.n, 0.0);
    for (const auto& [s, d] : g_obs.edges)
        if (!g_int.has_edge(s, d)) scores[d] += 1.0;
    return scores;
}

SoftThresholds default_soft_thresholds(const Matrix& obs, const Matrix& intv,
                                       int bootstrap, uint64_t seed) {
    if (obs.cols != intv.cols)
        throw std::invalid_argument("default_soft_thresholds: column mismatch");
    size_t n = obs.cols;
    SoftThresholds th;
    th.eps_r = 3.0 / std::sqrt(static_cast<double>(std::min(obs.rows, intv.rows)));
    // bootstrap SE of each side's covariance entry; the difference threshold
    // combines them in quadrature
    auto boot_var = [&](const Matrix& d, Rng& rng) {
        Matrix mean(n, n), m2(n, n);
        for (int b = 0; b < bootstrap; ++b) {
            std::vector<size_t> rows(d.rows);
            for (auto& r : rows) r = rng.below(d.rows);
            Matrix sample(d.rows, n);
            for (size_t r = 0; r < d.rows; ++r)
                for (size_t c = 0; c < n; ++c) sample(r, c) = d(rows[r], c);
            Matrix cov = summary_stats(sample).cov;
            for (size_t i = 0; i < n * n; ++i) {
                double delta = cov.data[i] - mean.data[i];
                mean.data[i] += delta / (b + 1);
                m2.data[i] += delta * (cov.data[i] - mean.data[i]);
            }
        }
        Matrix var(n, n);
        for (size_t i = 0; i < n * n; ++i)
            var.data[i] = bootstrap > 1 ? m2.data[i] / (bootstrap - 1) : 0.0;
        return var;
    };
    Rng rng(seed ? seed : 0x50f7u);
    Rng ro = rng.fork(1), ri = rng.fork(2);
    Matrix vo = boot_var(obs, ro), vi = boot_var(intv, ri);
    th.eps_s = Matrix(n, n);
    for (size_t i = 0; i < n * n; ++i)
        th.eps_s.data[i] = 3.0 * std::sqrt(vo.data[i] + vi.data[i]);
    return th;
}

std::vector<double> analytic_soft_detector(const SummaryStats& stats_obs,
                                           const SummaryStats& stats_int, double eps_r,
                                           const Matrix& eps_s) {
    int n = stats_obs.n;
    if (n != stats_int.n || eps_s.rows != static_cast<size_t>(n) ||
        eps_s.cols != static_cast<size_t>(n))
        throw std::invalid_argument("analytic_soft_detector: shape mismatch");
    std::vector<double> scores(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double ds = std::abs(stats_int.cov(i, j) - stats_obs.cov(i, j));
            double dr = std::abs(stats_int.rho(i, j) - stats_obs.rho(i, j));
            if (ds > eps_s(i, j) && dr < eps_r) scores[i] += 1.0;
        }
    return scores;
}

std::vector<double> analytic_soft_detector(const SummaryStats& stats_obs,
                                           const SummaryStats& stats_int, double eps_r,
                                           double eps_s) {
    Matrix m(stats_obs.n, stats_obs.n, eps_s);
    return analytic_soft_detector(stats_obs, stats_int, eps_r, m);
}

namespace {

Matrix joint_with_domain(const Matrix& obs, const Matrix& intv) {
    if (obs.cols != intv.cols)
        throw std::invalid_argument("mb_ci: column count mismatch");
    size_t n = obs.cols;
    Matrix joint(obs.rows + intv.rows, n + 1);
    for (size_t r = 0; r < obs.rows; ++r) {
        for (size_t c = 0; c < n; ++c) joint(r, c) = obs(r, c);
        joint(r, n) = 0.0;
    }
    for (size_t r = 0; r < intv.rows; ++r) {
        for (size_t c = 0; c < n; ++c) joint(obs.rows + r, c) = intv(r, c);
        joint(obs.rows + r, n) = 1.0;
    }
    return joint;
}

}  // namespace

std::vector<int> mb_ci_boundary(const Matrix& obs, const Matrix& intv, double lambda) {
    return markov_boundary(joint_with_domain(obs, intv), lambda);
}

std::vector<double> mb_ci_scores(const Matrix& obs, const Matrix& intv, double lambda) {
    Matrix joint = joint_with_domain(obs, intv);
    int n = static_cast<int>(obs.cols);
    std::vector<int> boundary = markov_boundary(joint, lambda);
    std::vector<double> scores(n, 0.0);
    for (int v : boundary) {
        std::vector<int> cond;
        for (int u : boundary)
            if (u != v) cond.push_back(u);
        bool degenerate = false;
        double cmi = gaussian_cmi(joint, n, v, cond, &degenerate);
        // keep scores finite; the cap dominates every regular value
        scores[v] = degenerate ? 50.0 : std::min(cmi, 50.0);
    }
    return scores;
}

std::vector<double> dge_scores(const Matrix& obs, const Matrix& intv) {
    std::vector<double> padj = wilcoxon_bh(obs, intv);
    std::vector<double> lfc = log_fold_change(obs, intv);
    std::vector<double> scores(padj.size());
    for (size_t i = 0; i < padj.size(); ++i) {
        double s = -std::log10(std::max(padj[i], 1e-300));
        // secondary key: |log fold change| breaks exact adjusted-p ties
        scores[i] = s + 1e-9 * (std::abs(lfc[i]) / (1.0 + std::abs(lfc[i])));
    }
    return scores;
}

}  // namespace cdn
