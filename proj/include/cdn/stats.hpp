#pragma once

#include <vector>

#include "cdn/matrix.hpp"

namespace cdn {

struct SummaryStats {
    int n = 0;       // variable count
    size_t m = 0;    // sample count
    Matrix rho;      // n x n Pearson correlation
    Matrix cov;      // n x n covariance (unbiased)
    std::vector<double> mean;
    std::vector<double> var;
};

SummaryStats summary_stats(const Matrix& d);

struct CITestResult {
    double statistic = 0.0;
    double p_value = 0.0;
    bool independent = false;
    bool degenerate = false;
};

// Fisher-z partial correlation test of columns i, j given conditioning set s.
CITestResult fisher_z_test(const Matrix& d, int i, int j, const std::vector<int>& s,
                           double alpha);
// Same test evaluated from a precomputed correlation matrix (m samples).
CITestResult fisher_z_test_from_corr(const Matrix& rho, size_t m, int i, int j,
                                     const std::vector<int>& s, double alpha);

// Partial correlation of i, j given s computed from a correlation (or covariance)
// matrix via precision-submatrix inversion. Returns false on singularity.
bool partial_correlation(const Matrix& rho, int i, int j, const std::vector<int>& s,
                         double& r_out);

// Gaussian conditional mutual information plug-in: -0.5 ln(1 - r^2), in nats.
// Degenerate conditioning returns +infinity with *degenerate set.
double gaussian_cmi(const Matrix& d, int x, int y, const std::vector<int>& s,
                    bool* degenerate = nullptr);

// Per-column two-sided Wilcoxon rank-sum between obs and intv samples with
// Benjamini-Hochberg step-up adjustment across columns.
std::vector<double> wilcoxon_bh(const Matrix& obs, const Matrix& intv);
// raw (unadjusted) two-sided rank-sum p-value for two samples
double rank_sum_p(const std::vector<double>& a, const std::vector<double>& b);
std::vector<double> benjamini_hochberg(const std::vector<double>& p);

// Markov boundary of the last column of d_joint via L1-penalised precision
// estimation (graphical lasso on the standardized covariance).
std::vector<int> markov_boundary(const Matrix& d_joint, double lambda);

std::vector<double> log_fold_change(const Matrix& obs, const Matrix& intv);

// two-sided standard normal tail: P(|Z| > |z|)
double normal_two_sided_p(double z);

// Graphical lasso: sparse precision estimate for covariance s with penalty lambda.
// Off-diagonal entries are penalised. Throws on non-convergence.
struct GlassoResult {
    Matrix precision;
    Matrix covariance;  // estimated (regularised) covariance W
    int sweeps = 0;
    std::vector<double> objective;  // penalised negative log-likelihood per sweep
};
GlassoResult graphical_lasso(const Matrix& s, double lambda, int max_sweeps = 200,
                             double tol = 1e-5);

}  // namespace cdn
