#pragma once

#include <string>

#include "cdn/fci.hpp"

namespace cdn {

// One featurized dataset side: correlation matrix plus the T local PAG estimates.
struct SideFeatures {
    Matrix rho;  // n x n
    double alpha = 0.05;
    LocalEstimates est;
};

SideFeatures featurize_side(const Matrix& data, int k, int t, double alpha,
                            uint64_t seed);

// features.bin layout (all little-endian):
//   u32 magic 'CDNF', u32 N, u32 k, u32 T, f64 alpha,
//   N*N f64 correlation entries (row-major),
//   T records of { k u32 subset indices, k*k u8 mark codes }.
void save_features(const std::string& path, const SideFeatures& fb);
SideFeatures load_features(const std::string& path);

}  // namespace cdn
