// Benchmark of the OpenMP kernels against the serial reference implementations.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "cdn/matmul.hpp"
#include "cdn/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace cdn;
using namespace cdn::nn;

namespace {

using Kernel = void (*)(const double*, const double*, double*, size_t, size_t, size_t);

double time_kernel(Kernel k, const std::vector<double>& a, const std::vector<double>& b,
                   std::vector<double>& c, size_t m, size_t kk, size_t n, int reps) {
    double best = 1e30;
    for (int r = 0; r < reps; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        k(a.data(), b.data(), c.data(), m, kk, n);
        auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("openmp: disabled\n");
#endif
    Rng rng(42);
    std::printf("%8s %12s %12s %10s %10s\n", "size", "serial(ms)", "omp(ms)", "speedup",
                "max|diff|");
    for (size_t s : {64, 128, 256, 512}) {
        std::vector<double> a(s * s), b(s * s), c1(s * s), c2(s * s);
        for (auto& x : a) x = rng.normal();
        for (auto& x : b) x = rng.normal();
        double ts = time_kernel(matmul_serial, a, b, c1, s, s, s, 3);
        double tp = time_kernel(matmul_omp, a, b, c2, s, s, s, 3);
        double diff = 0.0;
        for (size_t i = 0; i < c1.size(); ++i)
            diff = std::max(diff, std::abs(c1[i] - c2[i]));
        std::printf("%8zu %12.3f %12.3f %10.2fx %10.2e\n", s, ts * 1e3, tp * 1e3,
                    ts / tp, diff);
    }
    return 0;
}
