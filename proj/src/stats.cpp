#include "cdn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cdn {

namespace linalg {

bool lu_factor(std::vector<double>& a, int n, std::vector<int>& piv) {
    piv.resize(n);
    for (int i = 0; i < n; ++i) piv[i] = i;
    for (int k = 0; k < n; ++k) {
        int p = k;
        double best = std::fabs(a[k * n + k]);
        for (int i = k + 1; i < n; ++i) {
            double v = std::fabs(a[i * n + k]);
            if (v > best) { best = v; p = i; }
        }
        if (best < 1e-14) return false;
        if (p != k) {
            for (int j = 0; j < n; ++j) std::swap(a[k * n + j], a[p * n + j]);
            std::swap(piv[k], piv[p]);
        }
        for (int i = k + 1; i < n; ++i) {
            a[i * n + k] /= a[k * n + k];
            double f = a[i * n + k];
            for (int j = k + 1; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
        }
    }
    return true;
}

bool invert(const std::vector<double>& a_in, int n, std::vector<double>& inv) {
    std::vector<double> a = a_in;
    std::vector<int> piv;
    if (!lu_factor(a, n, piv)) return false;
    inv.assign(n * n, 0.0);
    std::vector<double> col(n), x(n);
    for (int c = 0; c < n; ++c) {
        for (int i = 0; i < n; ++i) col[i] = piv[i] == c ? 1.0 : 0.0;
        // forward substitution (unit lower)
        for (int i = 0; i < n; ++i) {
            x[i] = col[i];
            for (int j = 0; j < i; ++j) x[i] -= a[i * n + j] * x[j];
        }
        // back substitution
        for (int i = n - 1; i >= 0; --i) {
            for (int j = i + 1; j < n; ++j) x[i] -= a[i * n + j] * x[j];
            x[i] /= a[i * n + i];
        }
        for (int i = 0; i < n; ++i) inv[i * n + c] = x[i];
    }
    return true;
}

bool logdet_spd(const std::vector<double>& a_in, int n, double& out) {
    std::vector<double> a = a_in;
    std::vector<int> piv;
    if (!lu_factor(a, n, piv)) return false;
    // pivoting can flip individual signs but the product stays positive for SPD
    // inputs, so log|det| over the LU diagonal is the SPD log-determinant
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::log(std::fabs(a[i * n + i]));
    out = s;
    return true;
}

}  // namespace linalg

SummaryStats summary_stats(const Matrix& d) {
    if (d.rows < 2) throw std::invalid_argument("summary_stats: need at least 2 samples");
    const int n = static_cast<int>(d.cols);
    const size_t m = d.rows;
    SummaryStats s;
    s.n = n;
    s.m = m;
    s.mean.assign(n, 0.0);
    s.var.assign(n, 0.0);
    s.cov = Matrix(n, n);
    s.rho = Matrix(n, n);

    for (size_t i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) s.mean[j] += d(i, j);
    for (int j = 0; j < n; ++j) s.mean[j] /= static_cast<double>(m);

    for (size_t i = 0; i < m; ++i) {
        for (int a = 0; a < n; ++a) {
            double da = d(i, a) - s.mean[a];
            for (int b = a; b < n; ++b) s.cov(a, b) += da * (d(i, b) - s.mean[b]);
        }
    }
    for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) {
            double c = s.cov(a, b) / static_cast<double>(m - 1);
            s.cov(a, b) = c;
            s.cov(b, a) = c;
        }
    for (int j = 0; j < n; ++j) s.var[j] = s.cov(j, j);

    for (int a = 0; a < n; ++a) {
        s.rho(a, a) = 1.0;
        for (int b = a + 1; b < n; ++b) {
            double denom = std::sqrt(s.var[a] * s.var[b]);
            double r = denom > 0.0 ? s.cov(a, b) / denom : 0.0;
            r = std::clamp(r, -1.0, 1.0);
            s.rho(a, b) = r;
            s.rho(b, a) = r;
        }
    }
    return s;
}

bool partial_correlation(const Matrix& rho, int i, int j, const std::vector<int>& s,
                         double& r_out) {
    const int k = static_cast<int>(s.size()) + 2;
    std::vector<int> idx;
    idx.reserve(k);
    idx.push_back(i);
    idx.push_back(j);
    for (int v : s) idx.push_back(v);
    std::vector<double> sub(k * k);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) sub[a * k + b] = rho(idx[a], idx[b]);
    std::vector<double> prec;
    if (!linalg::invert(sub, k, prec)) return false;
    double denom = prec[0] * prec[k + 1];
    if (denom <= 0.0) return false;
    r_out = -prec[1] / std::sqrt(denom);
    r_out = std::clamp(r_out, -1.0, 1.0);
    return true;
}

double normal_two_sided_p(double z) {
    return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

CITestResult fisher_z_test_from_corr(const Matrix& rho, size_t m, int i, int j,
                                     const std::vector<int>& s, double alpha) {
    if (i == j) throw std::invalid_argument("fisher_z_test: i == j");
    CITestResult res;
    double r;
    if (!partial_correlation(rho, i, j, s, r)) {
        res.degenerate = true;
        res.p_value = 0.0;
        res.independent = false;
        return res;
    }
    double df = static_cast<double>(m) - static_cast<double>(s.size()) - 3.0;
    if (df < 1.0) df = 1.0;
    // guard atanh at |r| = 1
    double rc = std::clamp(r, -1.0 + 1e-12, 1.0 - 1e-12);
    double z = std::sqrt(df) * std::atanh(rc);
    res.statistic = z;
    res.p_value = normal_two_sided_p(z);
    res.independent = res.p_value > alpha;
    return res;
}

CITestResult fisher_z_test(const Matrix& d, int i, int j, const std::vector<int>& s,
                           double alpha) {
    if (d.rows < s.size() + 4)
        throw std::invalid_argument("fisher_z_test: |S| must be <= m - 4");
    SummaryStats st = summary_stats(d);
    return fisher_z_test_from_corr(st.rho, d.rows, i, j, s, alpha);
}

double gaussian_cmi(const Matrix& d, int x, int y, const std::vector<int>& s,
                    bool* degenerate) {
    SummaryStats st = summary_stats(d);
    double r;
    if (degenerate) *degenerate = false;
    if (!partial_correlation(st.rho, x, y, s, r) || std::fabs(r) >= 1.0 - 1e-12) {
        if (degenerate) *degenerate = true;
        return std::numeric_limits<double>::infinity();
    }
    return -0.5 * std::log(1.0 - r * r);
}

double rank_sum_p(const std::vector<double>& a, const std::vector<double>& b) {
    const size_t n1 = a.size(), n2 = b.size();
    if (n1 == 0 || n2 == 0) throw std::invalid_argument("rank_sum_p: empty sample");
    std::vector<std::pair<double, int>> pooled;
    pooled.reserve(n1 + n2);
    for (double v : a) pooled.push_back({v, 0});
    for (double v : b) pooled.push_back({v, 1});
    std::sort(pooled.begin(), pooled.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });

    const size_t n = n1 + n2;
    std::vector<double> rank(n);
    double tie_term = 0.0;
    bool any_tie = false;
    for (size_t i = 0; i < n;) {
        size_t j = i;
        while (j < n && pooled[j].first == pooled[i].first) ++j;
        double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (size_t k = i; k < j; ++k) rank[k] = avg;
        double t = static_cast<double>(j - i);
        if (t > 1.0) {
            any_tie = true;
            tie_term += t * (t * t - 1.0);
        }
        i = j;
    }
    double w = 0.0;  // rank sum of sample a
    for (size_t i = 0; i < n; ++i)
        if (pooled[i].second == 0) w += rank[i];

    // exact enumeration for small untied samples: distribution of the rank sum
    // of n1 items drawn from ranks 1..n
    if (!any_tie && n <= 25) {
        int wmax = static_cast<int>(n * (n + 1) / 2);
        std::vector<std::vector<double>> c(n1 + 1, std::vector<double>(wmax + 1, 0.0));
        c[0][0] = 1.0;
        for (size_t r = 1; r <= n; ++r) {
            for (size_t k = std::min(n1, r); k >= 1; --k) {
                for (int ws = wmax; ws >= static_cast<int>(r); --ws)
                    c[k][ws] += c[k - 1][ws - r];
                if (k == 1) break;
            }
        }
        double total = 0.0, tail = 0.0;
        double mu = static_cast<double>(n1) * (n + 1) / 2.0;
        double dev = std::fabs(w - mu);
        for (int ws = 0; ws <= wmax; ++ws) {
            double cnt = c[n1][ws];
            total += cnt;
            if (std::fabs(ws - mu) >= dev - 1e-9) tail += cnt;
        }
        return std::min(1.0, tail / total);
    }

    double mu = static_cast<double>(n1) * (n + 1) / 2.0;
    double var = static_cast<double>(n1) * n2 / 12.0 *
                 (static_cast<double>(n + 1) -
                  tie_term / (static_cast<double>(n) * (n - 1.0)));
    if (var <= 0.0) return 1.0;  // all values tied
    double z = (w - mu) / std::sqrt(var);
    // continuity correction
    double zc = (std::fabs(w - mu) - 0.5) / std::sqrt(var);
    if (zc < 0.0) zc = 0.0;
    (void)z;
    return normal_two_sided_p(zc);
}

std::vector<double> benjamini_hochberg(const std::vector<double>& p) {
    const size_t n = p.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return p[a] < p[b]; });
    std::vector<double> adj(n);
    double running = 1.0;
    for (size_t i = n; i >= 1; --i) {
        size_t idx = order[i - 1];
        double v = p[idx] * static_cast<double>(n) / static_cast<double>(i);
        running = std::min(running, v);
        adj[idx] = std::min(1.0, running);
    }
    return adj;
}

std::vector<double> wilcoxon_bh(const Matrix& obs, const Matrix& intv) {
    if (obs.cols != intv.cols) throw std::invalid_argument("wilcoxon_bh: column mismatch");
    if (obs.rows == 0 || intv.rows == 0)
        throw std::invalid_argument("wilcoxon_bh: empty matrix");
    const int n = static_cast<int>(obs.cols);
    std::vector<double> raw(n);
    std::vector<double> a(obs.rows), b(intv.rows);
    for (int j = 0; j < n; ++j) {
        for (size_t i = 0; i < obs.rows; ++i) a[i] = obs(i, j);
        for (size_t i = 0; i < intv.rows; ++i) b[i] = intv(i, j);
        raw[j] = rank_sum_p(a, b);
    }
    return benjamini_hochberg(raw);
}

std::vector<int> markov_boundary(const Matrix& d_joint, double lambda) {
    if (lambda <= 0.0) throw std::invalid_argument("markov_boundary: lambda must be > 0");
    const int n = static_cast<int>(d_joint.cols);
    SummaryStats st = summary_stats(d_joint);
    // standardized inputs: run glasso on the correlation matrix
    GlassoResult g = graphical_lasso(st.rho, lambda);
    std::vector<int> boundary;
    for (int v = 0; v < n - 1; ++v)
        if (std::fabs(g.precision(v, n - 1)) > 1e-8) boundary.push_back(v);
    return boundary;
}

std::vector<double> log_fold_change(const Matrix& obs, const Matrix& intv) {
    if (obs.cols != intv.cols)
        throw std::invalid_argument("log_fold_change: column mismatch");
    const int n = static_cast<int>(obs.cols);
    std::vector<double> out(n, 0.0);
    for (int j = 0; j < n; ++j) {
        double mo = 0.0, mi = 0.0;
        for (size_t i = 0; i < obs.rows; ++i) mo += obs(i, j);
        for (size_t i = 0; i < intv.rows; ++i) mi += intv(i, j);
        if (obs.rows) mo /= static_cast<double>(obs.rows);
        if (intv.rows) mi /= static_cast<double>(intv.rows);
        out[j] = mi - mo;
    }
    return out;
}

}  // namespace cdn
