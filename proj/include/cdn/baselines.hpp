#pragma once

#include <cstdint>
#include <vector>

#include "cdn/dag.hpp"
#include "cdn/stats.hpp"

namespace cdn {

// score(i) = #{ j : adj_obs[j][i] = 1 and adj_int[j][i] = 0 }, i.e. the column
// counts of (E - E') clamped at zero
std::vector<double> analytic_hard_detector(const Dag& g_obs, const Dag& g_int);

struct SoftThresholds {
    double eps_r = 0.0;
    Matrix eps_s;  // per covariance entry
};

// eps_r = 3/sqrt(min(M_obs, M_int)); eps_s = 3x the bootstrap (B draws) standard
// error of each covariance-difference entry
SoftThresholds default_soft_thresholds(const Matrix& obs, const Matrix& intv,
                                       int bootstrap = 50, uint64_t seed = 0);

// score(i) = #{ j : |cov_int - cov_obs|_ij > eps_s_ij and |rho_int - rho_obs|_ij
// < eps_r }, j over all N including the diagonal
std::vector<double> analytic_soft_detector(const SummaryStats& stats_obs,
                                           const SummaryStats& stats_int, double eps_r,
                                           const Matrix& eps_s);
std::vector<double> analytic_soft_detector(const SummaryStats& stats_obs,
                                           const SummaryStats& stats_int, double eps_r,
                                           double eps_s);

// Markov boundary of the obs/int domain indicator via graphical lasso, then
// conditional mutual information of each boundary member with the indicator
std::vector<double> mb_ci_scores(const Matrix& obs, const Matrix& intv,
                                 double lambda = 0.1);
// the boundary alone (exposed for the domain-flip symmetry check)
std::vector<int> mb_ci_boundary(const Matrix& obs, const Matrix& intv,
                                double lambda = 0.1);

// -log10 of the BH-adjusted rank-sum p-value; exact ties broken by absolute
// log fold change
std::vector<double> dge_scores(const Matrix& obs, const Matrix& intv);

}  // namespace cdn
