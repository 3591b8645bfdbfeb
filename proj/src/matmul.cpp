#include "cdn/matmul.hpp"

#include <cstring>

namespace cdn::nn {

void matmul_serial(const double* a, const double* b, double* c, size_t m, size_t k,
                   size_t n) {
    std::memset(c, 0, m * n * sizeof(double));
    for (size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (size_t p = 0; p < k; ++p) {
            double aip = ai[p];
            const double* bp = b + p * n;
            for (size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void matmul_omp(const double* a, const double* b, double* c, size_t m, size_t k,
                size_t n) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(m); ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (size_t j = 0; j < n; ++j) ci[j] = 0.0;
        for (size_t p = 0; p < k; ++p) {
            double aip = ai[p];
            const double* bp = b + p * n;
            for (size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void matmul_nt_serial(const double* a, const double* b, double* c, size_t m, size_t k,
                      size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double s = 0.0;
            for (size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
            ci[j] = s;
        }
    }
}

void matmul_nt_omp(const double* a, const double* b, double* c, size_t m, size_t k,
                   size_t n) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(m); ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double s = 0.0;
            for (size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
            ci[j] = s;
        }
    }
}

void matmul_tn_acc_serial(const double* a, const double* b, double* c, size_t m,
                          size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        const double* bi = b + i * n;
        for (size_t p = 0; p < k; ++p) {
            double aip = ai[p];
            double* cp = c + p * n;
            for (size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
        }
    }
}

void matmul_tn_acc_omp(const double* a, const double* b, double* c, size_t m, size_t k,
                       size_t n) {
    // rows of C are owned by the p-index; parallelise over p to stay deterministic
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(k); ++p) {
        double* cp = c + p * n;
        for (size_t i = 0; i < m; ++i) {
            double aip = a[i * k + p];
            const double* bi = b + i * n;
            for (size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
        }
    }
}

}  // namespace cdn::nn
