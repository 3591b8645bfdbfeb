#include "cdn/features.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace cdn {

namespace {

constexpr uint32_t kMagic = 0x464e4443;  // "CDNF"

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

SideFeatures featurize_side(const Matrix& data, int k, int t, double alpha,
                             uint64_t seed) {
    SideFeatures fb;
    SummaryStats st = summary_stats(data);
    fb.rho = st.rho;
    fb.alpha = alpha;
    fb.est = local_estimates(data, st, k, t, alpha, seed);
    return fb;
}

void save_features(const std::string& path, const SideFeatures& fb) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write features: " + path);
    uint32_t n = static_cast<uint32_t>(fb.rho.rows);
    write_pod(out, kMagic);
    write_pod(out, n);
    write_pod(out, static_cast<uint32_t>(fb.est.k));
    write_pod(out, static_cast<uint32_t>(fb.est.subsets.size()));
    write_pod(out, fb.alpha);
    out.write(reinterpret_cast<const char*>(fb.rho.data.data()),
              static_cast<std::streamsize>(fb.rho.data.size() * sizeof(double)));
    for (size_t s = 0; s < fb.est.subsets.size(); ++s) {
        for (int idx : fb.est.subsets[s]) write_pod(out, static_cast<uint32_t>(idx));
        const PagMatrix& pag = fb.est.pags[s];
        for (int i = 0; i < pag.size(); ++i)
            for (int j = 0; j < pag.size(); ++j)
                write_pod(out, static_cast<uint8_t>(pag.mark(i, j)));
    }
    if (!out) throw std::runtime_error("write failure on features: " + path);
}

SideFeatures load_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read features: " + path);
    if (read_pod<uint32_t>(in) != kMagic)
        throw std::runtime_error("bad features magic: " + path);
    uint32_t n = read_pod<uint32_t>(in);
    uint32_t k = read_pod<uint32_t>(in);
    uint32_t t = read_pod<uint32_t>(in);
    SideFeatures fb;
    fb.alpha = read_pod<double>(in);
    fb.rho = Matrix(n, n);
    in.read(reinterpret_cast<char*>(fb.rho.data.data()),
            static_cast<std::streamsize>(fb.rho.data.size() * sizeof(double)));
    fb.est.n = static_cast<int>(n);
    fb.est.k = static_cast<int>(k);
    for (uint32_t s = 0; s < t; ++s) {
        std::vector<int> subset(k);
        for (auto& idx : subset) idx = static_cast<int>(read_pod<uint32_t>(in));
        PagMatrix pag(static_cast<int>(k));
        for (uint32_t i = 0; i < k; ++i)
            for (uint32_t j = 0; j < k; ++j)
                pag.set_mark(i, j, static_cast<Mark>(read_pod<uint8_t>(in)));
        fb.est.subsets.push_back(std::move(subset));
        fb.est.pags.push_back(std::move(pag));
    }
    if (!in) throw std::runtime_error("truncated features file: " + path);
    fb.est.build_pair_index();
    return fb;
}

}  // namespace cdn
