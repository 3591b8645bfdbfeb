#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cdn/stats.hpp"

namespace cdn {

namespace {

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

// penalised negative log-likelihood: -logdet(Theta) + tr(S Theta) + lambda ||Theta||_1,off
double glasso_objective(const Matrix& s, const Matrix& theta, double lambda) {
    const int n = static_cast<int>(s.rows);
    double ld;
    if (!linalg::logdet_spd(theta.data, n, ld)) return std::numeric_limits<double>::infinity();
    double tr = 0.0, l1 = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            tr += s(i, j) * theta(j, i);
            if (i != j) l1 += std::fabs(theta(i, j));
        }
    return -ld + tr + lambda * l1;
}

}  // namespace

GlassoResult graphical_lasso(const Matrix& s, double lambda, int max_sweeps, double tol) {
    const int n = static_cast<int>(s.rows);
    if (s.cols != static_cast<size_t>(n))
        throw std::invalid_argument("graphical_lasso: covariance not square");

    GlassoResult res;
    Matrix w = s;  // working covariance estimate
    for (int i = 0; i < n; ++i) w(i, i) += lambda;
    std::vector<std::vector<double>> beta(n, std::vector<double>(n, 0.0));

    double avg_offdiag = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) avg_offdiag += std::fabs(s(i, j));
    avg_offdiag /= std::max(1, n * (n - 1));
    const double thresh = tol * std::max(avg_offdiag, 1e-12);

    auto recover_theta = [&]() {
        Matrix theta(n, n);
        for (int j = 0; j < n; ++j) {
            double dot = 0.0;
            for (int b = 0; b < n; ++b)
                if (b != j) dot += w(j, b) * beta[j][b];
            double t22 = 1.0 / (w(j, j) - dot);
            theta(j, j) = t22;
            for (int a = 0; a < n; ++a)
                if (a != j) theta(a, j) = -beta[j][a] * t22;
        }
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                double v = 0.5 * (theta(i, j) + theta(j, i));
                if (theta(i, j) == 0.0 || theta(j, i) == 0.0) v = 0.0;
                theta(i, j) = v;
                theta(j, i) = v;
            }
        return theta;
    };

    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        double max_delta = 0.0;
        for (int j = 0; j < n; ++j) {
            // lasso subproblem on column j: minimise over beta
            //   0.5 beta' W11 beta - s12' beta + lambda |beta|_1
            for (int pass = 0; pass < 50; ++pass) {
                double inner_delta = 0.0;
                for (int a = 0; a < n; ++a) {
                    if (a == j) continue;
                    double grad = s(a, j);
                    for (int b = 0; b < n; ++b) {
                        if (b == j || b == a) continue;
                        grad -= w(a, b) * beta[j][b];
                    }
                    double old = beta[j][a];
                    double nb = soft_threshold(grad, lambda) / w(a, a);
                    beta[j][a] = nb;
                    inner_delta = std::max(inner_delta, std::fabs(nb - old));
                }
                if (inner_delta < thresh) break;
            }
            // update column j of W: w12 = W11 beta
            for (int a = 0; a < n; ++a) {
                if (a == j) continue;
                double v = 0.0;
                for (int b = 0; b < n; ++b) {
                    if (b == j) continue;
                    v += w(a, b) * beta[j][b];
                }
                max_delta = std::max(max_delta, std::fabs(w(a, j) - v));
                w(a, j) = v;
                w(j, a) = v;
            }
        }
        res.objective.push_back(glasso_objective(s, recover_theta(), lambda));
        if (max_delta < thresh) {
            ++sweep;
            break;
        }
    }

    res.precision = recover_theta();
    res.covariance = w;
    res.sweeps = sweep;
    if (sweep >= max_sweeps)
        throw std::runtime_error(
            "graphical_lasso: no convergence after " + std::to_string(max_sweeps) +
            " sweeps (last objective " + std::to_string(res.objective.back()) + ")");
    return res;
}

}  // namespace cdn
