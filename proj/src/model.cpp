#include "cdn/model.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace cdn {

using nn::ParamStore;
using nn::Tensor;
using nlohmann::json;

CdnVariant cdn_variant_from_string(const std::string& s) {
    if (s == "diff") return CdnVariant::Diff;
    if (s == "cat") return CdnVariant::Cat;
    throw std::invalid_argument("unknown variant: " + s);
}

std::string to_string(CdnVariant v) {
    return v == CdnVariant::Diff ? "diff" : "cat";
}

CdnConfig cdn_config_from_json(const std::string& text) {
    json j = json::parse(text);
    static const std::set<std::string> allowed = {
        "d", "structure_layers", "diff_layers", "variant", "n_max",
        "dropout", "heads", "t", "k", "alpha"};
    for (auto& [key, v] : j.items())
        if (!allowed.count(key))
            throw std::invalid_argument("unknown config key \"" + key +
                                        "\" in model config");
    CdnConfig cfg;
    if (j.contains("d")) cfg.d = j["d"];
    if (j.contains("structure_layers")) cfg.structure_layers = j["structure_layers"];
    if (j.contains("diff_layers")) cfg.diff_layers = j["diff_layers"];
    if (j.contains("variant"))
        cfg.variant = cdn_variant_from_string(j["variant"].get<std::string>());
    if (j.contains("n_max")) cfg.n_max = j["n_max"];
    if (j.contains("dropout")) cfg.dropout = j["dropout"];
    if (j.contains("heads")) cfg.heads = j["heads"];
    if (j.contains("t")) cfg.t = j["t"];
    if (j.contains("k")) cfg.k = j["k"];
    if (j.contains("alpha")) cfg.alpha = j["alpha"];
    if (cfg.d <= 0 || cfg.structure_layers < 0 || cfg.n_max <= 0 || cfg.t < 1 ||
        cfg.k < 2 || cfg.heads < 1)
        throw std::invalid_argument("model config: invalid sizes");
    return cfg;
}

std::string cdn_config_to_json(const CdnConfig& cfg) {
    json j;
    j["d"] = cfg.d;
    j["structure_layers"] = cfg.structure_layers;
    j["diff_layers"] = cfg.diff_layers;
    j["variant"] = to_string(cfg.variant);
    j["n_max"] = cfg.n_max;
    j["dropout"] = cfg.dropout;
    j["heads"] = cfg.heads;
    j["t"] = cfg.t;
    j["k"] = cfg.k;
    j["alpha"] = cfg.alpha;
    return j.dump();
}

FeatureBundle featurize_pair(const Matrix& obs, const Matrix& intv,
                             const CdnConfig& cfg, uint64_t seed) {
    if (obs.cols != intv.cols)
        throw std::invalid_argument("featurize_pair: column count mismatch");
    Rng rng(seed);
    SideFeatures so = featurize_side(obs, cfg.k, cfg.t, cfg.alpha,
                                     rng.fork(1).next_u64());
    SideFeatures si = featurize_side(intv, cfg.k, cfg.t, cfg.alpha,
                                     rng.fork(2).next_u64());
    return bundle_from_sides(so, si, obs, intv);
}

FeatureBundle bundle_from_sides(const SideFeatures& obs_side,
                                const SideFeatures& int_side, const Matrix& obs,
                                const Matrix& intv) {
    FeatureBundle fb;
    fb.rho_obs = obs_side.rho;
    fb.rho_int = int_side.rho;
    fb.local_obs = obs_side.est;
    fb.local_int = int_side.est;
    SummaryStats so = summary_stats(obs);
    SummaryStats si = summary_stats(intv);
    size_t n = obs.cols;
    fb.moments_obs = Matrix(n, 2);
    fb.moments_int = Matrix(n, 2);
    for (size_t i = 0; i < n; ++i) {
        fb.moments_obs(i, 0) = so.mean[i];
        fb.moments_obs(i, 1) = so.var[i];
        fb.moments_int(i, 0) = si.mean[i];
        fb.moments_int(i, 1) = si.var[i];
    }
    return fb;
}

std::vector<int> sample_node_permutation(int n, int n_max, Rng& rng) {
    if (n > n_max)
        throw std::invalid_argument("node count exceeds the embedding table size");
    std::vector<int> slots = rng.permutation(n_max);
    slots.resize(n);
    return slots;
}

namespace {

void add_linear(ParamStore& ps, const std::string& name, size_t in, size_t out,
                Rng& rng) {
    std::vector<double> w(in * out);
    double std = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& x : w) x = rng.normal(0.0, std);
    ps.add(name + "_w", Tensor::from_data({in, out}, std::move(w)));
    ps.add(name + "_b", Tensor(nn::Shape{out}, 0.0));
}

void add_attn(ParamStore& ps, const std::string& prefix, size_t d, Rng& rng) {
    for (const char* nm : {"wq", "wk", "wv", "wo"}) {
        std::vector<double> w(d * d);
        double std = 1.0 / std::sqrt(static_cast<double>(d));
        for (auto& x : w) x = rng.normal(0.0, std);
        ps.add(prefix + "." + nm, Tensor::from_data({d, d}, std::move(w)));
    }
}

void add_ln(ParamStore& ps, const std::string& prefix, size_t d) {
    ps.add(prefix + "_g", Tensor(nn::Shape{d}, 1.0));
    ps.add(prefix + "_b", Tensor(nn::Shape{d}, 0.0));
}

void add_axial_block(ParamStore& ps, const std::string& prefix, size_t d, Rng& rng) {
    add_attn(ps, prefix + ".row", d, rng);
    add_attn(ps, prefix + ".col", d, rng);
    add_ln(ps, prefix + ".ln1", d);
    add_ln(ps, prefix + ".ln2", d);
    add_ln(ps, prefix + ".ln3", d);
    add_linear(ps, prefix + ".ffn1", d, 4 * d, rng);
    add_linear(ps, prefix + ".ffn2", 4 * d, d, rng);
}

nn::AttnParams get_attn(ParamStore& ps, const std::string& prefix) {
    return {ps.at(prefix + ".wq"), ps.at(prefix + ".wk"), ps.at(prefix + ".wv"),
            ps.at(prefix + ".wo")};
}

nn::AxialBlockParams get_axial_block(ParamStore& ps, const std::string& prefix) {
    nn::AxialBlockParams p;
    p.row_attn = get_attn(ps, prefix + ".row");
    p.col_attn = get_attn(ps, prefix + ".col");
    p.ln1_g = ps.at(prefix + ".ln1_g");
    p.ln1_b = ps.at(prefix + ".ln1_b");
    p.ln2_g = ps.at(prefix + ".ln2_g");
    p.ln2_b = ps.at(prefix + ".ln2_b");
    p.ln3_g = ps.at(prefix + ".ln3_g");
    p.ln3_b = ps.at(prefix + ".ln3_b");
    p.ffn_w1 = ps.at(prefix + ".ffn1_w");
    p.ffn_b1 = ps.at(prefix + ".ffn1_b");
    p.ffn_w2 = ps.at(prefix + ".ffn2_w");
    p.ffn_b2 = ps.at(prefix + ".ffn2_b");
    return p;
}

// 16 ordered endpoint-mark pairs + one "not covered" code
constexpr int kNotCovered = 16;

int mark_pair_code(const PagMatrix& pag, int pos_i, int pos_j) {
    int at_i = static_cast<int>(pag.mark(pos_j, pos_i));
    int at_j = static_cast<int>(pag.mark(pos_i, pos_j));
    return 4 * at_i + at_j;
}

}  // namespace

ParamStore make_params(const CdnConfig& cfg, uint64_t seed) {
    Rng rng(seed);
    ParamStore ps;
    size_t d = cfg.d;
    add_linear(ps, "embed.rho", 1, d, rng);
    {
        std::vector<double> w(17 * d);
        for (auto& x : w) x = rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
        ps.add("embed.mark_table", Tensor::from_data({17, d}, std::move(w)));
    }
    {
        std::vector<double> w(static_cast<size_t>(cfg.n_max) * d);
        for (auto& x : w) x = rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
        ps.add("embed.node_table",
               Tensor::from_data({static_cast<size_t>(cfg.n_max), d}, std::move(w)));
    }
    add_linear(ps, "embed.pair1", 2 * d, d, rng);
    add_linear(ps, "embed.pair2", d, d, rng);
    add_ln(ps, "tpool.ln", d);
    add_attn(ps, "tpool", d, rng);
    for (int l = 0; l < cfg.structure_layers; ++l)
        add_axial_block(ps, "s" + std::to_string(l), d, rng);
    add_linear(ps, "edge.ffn1", 2 * d, d, rng);
    add_linear(ps, "edge.ffn2", d, 3, rng);
    add_linear(ps, "stats1", 2, d, rng);
    add_linear(ps, "stats2", d, d, rng);
    size_t w = cfg.diff_width();
    for (int l = 0; l < cfg.resolved_diff_layers(); ++l)
        add_axial_block(ps, "d" + std::to_string(l), w, rng);
    add_linear(ps, "head", w, 1, rng);
    return ps;
}

Tensor embed_features(const Matrix& rho, const LocalEstimates& est,
                      const std::vector<int>& perm, const CdnConfig& cfg,
                      ParamStore& params) {
    int n = static_cast<int>(rho.rows);
    if (static_cast<int>(perm.size()) != n)
        throw std::invalid_argument("embed_features: permutation length mismatch");
    for (int p : perm)
        if (p < 0 || p >= cfg.n_max)
            throw std::invalid_argument("embed_features: permutation slot out of range");
    size_t np = static_cast<size_t>(n) * n;
    size_t t = est.subsets.size();
    size_t d = cfg.d;

    // token 0: projected correlation entry
    std::vector<double> rv(np);
    for (size_t i = 0; i < np; ++i) rv[i] = rho.data[i];
    Tensor rho_tok = nn::linear(Tensor::from_data({np, 1}, std::move(rv)),
                                params.at("embed.rho_w"), params.at("embed.rho_b"));
    rho_tok = nn::reshape(rho_tok, {np, 1, d});

    // tokens 1..T: the mark-pair code of (i,j) per covering subset estimate
    std::vector<int> codes(np * t, kNotCovered);
    for (size_t s = 0; s < t; ++s) {
        const auto& subset = est.subsets[s];
        const PagMatrix& pag = est.pags[s];
        for (size_t a = 0; a < subset.size(); ++a)
            for (size_t b = 0; b < subset.size(); ++b) {
                if (a == b) continue;
                size_t i = subset[a], j = subset[b];
                codes[(i * n + j) * t + s] =
                    mark_pair_code(pag, static_cast<int>(a), static_cast<int>(b));
            }
    }
    Tensor mark_tok = nn::embedding(params.at("embed.mark_table"), codes);
    mark_tok = nn::reshape(mark_tok, {np, t, d});

    Tensor tokens = nn::concat(rho_tok, mark_tok, 1);  // [np, T+1, d]

    // additive pair embedding FFN([Embed(i), Embed(j)])
    std::vector<int> first(np), second(np);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            first[i * n + j] = perm[i];
            second[i * n + j] = perm[j];
        }
    Tensor ei = nn::embedding(params.at("embed.node_table"), first);
    Tensor ej = nn::embedding(params.at("embed.node_table"), second);
    Tensor pair = nn::concat(ei, ej, 1);  // [np, 2d]
    pair = nn::linear(pair, params.at("embed.pair1_w"), params.at("embed.pair1_b"));
    pair = nn::relu(pair);
    pair = nn::linear(pair, params.at("embed.pair2_w"), params.at("embed.pair2_b"));
    pair = nn::tile(nn::reshape(pair, {np, 1, d}), 1, t + 1);
    return nn::add(tokens, pair);
}

StructureOut structure_forward(const Tensor& lattice, int n, const CdnConfig& cfg,
                               ParamStore& params, bool train, Rng& dropout_rng) {
    size_t np = static_cast<size_t>(n) * n;
    size_t d = cfg.d;
    if (lattice.shape().size() != 3 || lattice.dim(0) != np || lattice.dim(2) != d)
        throw std::invalid_argument("structure_forward: bad lattice shape");
    // pooling over T': one residual pre-LN attention stage, then the mean
    Tensor x = lattice;
    Tensor a = nn::attention_core(
        nn::layer_norm(x, params.at("tpool.ln_g"), params.at("tpool.ln_b")),
        get_attn(params, "tpool"), cfg.heads);
    x = nn::add(x, nn::dropout(a, cfg.dropout, train, dropout_rng));
    Tensor h = nn::reshape(nn::mean_axis(x, 1), {static_cast<size_t>(n),
                                                 static_cast<size_t>(n), d});
    for (int l = 0; l < cfg.structure_layers; ++l)
        h = nn::axial_block(h, get_axial_block(params, "s" + std::to_string(l)),
                            cfg.heads, cfg.dropout, train, dropout_rng);
    StructureOut out;
    out.h = h;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) out.pairs.push_back({i, j});
    Tensor g = nn::gather_pair_rows(h, out.pairs);  // [P, 2d]
    g = nn::relu(nn::linear(g, params.at("edge.ffn1_w"), params.at("edge.ffn1_b")));
    out.edge_logits = nn::linear(g, params.at("edge.ffn2_w"), params.at("edge.ffn2_b"));
    return out;
}

namespace {

// h' per side: h with an extra node-statistics column, [N, N+1, d]
Tensor side_with_stats(const Tensor& h, const Matrix& moments, ParamStore& params) {
    size_t n = h.dim(0), d = h.dim(2);
    Tensor m = Tensor::from_data({n, 2}, moments.data);
    m = nn::relu(nn::linear(m, params.at("stats1_w"), params.at("stats1_b")));
    m = nn::linear(m, params.at("stats2_w"), params.at("stats2_b"));
    return nn::concat(h, nn::reshape(m, {n, 1, d}), 1);
}

}  // namespace

Tensor diff_forward(const Tensor& h_obs, const Tensor& h_int, const Matrix& moments_obs,
                    const Matrix& moments_int, const CdnConfig& cfg, ParamStore& params,
                    bool train, Rng& dropout_rng) {
    if (h_obs.shape() != h_int.shape())
        throw std::invalid_argument("diff_forward: side shape mismatch");
    size_t n = h_obs.dim(0);
    Tensor ho = side_with_stats(h_obs, moments_obs, params);
    Tensor hi = side_with_stats(h_int, moments_int, params);
    Tensor x = cfg.variant == CdnVariant::Diff ? nn::sub(hi, ho)
                                               : nn::concat(ho, hi, 2);
    for (int l = 0; l < cfg.resolved_diff_layers(); ++l)
        x = nn::axial_block(x, get_axial_block(params, "d" + std::to_string(l)),
                            cfg.heads, cfg.dropout, train, dropout_rng);
    x = nn::mean_axis(x, 1);  // [N, w]
    x = nn::linear(x, params.at("head_w"), params.at("head_b"));
    return nn::reshape(x, {n});
}

ModelOutput model_forward(const FeatureBundle& fb, const std::vector<int>& perm,
                          const CdnConfig& cfg, ParamStore& params, bool train,
                          Rng& dropout_rng) {
    int n = static_cast<int>(fb.rho_obs.rows);
    Tensor lat_obs = embed_features(fb.rho_obs, fb.local_obs, perm, cfg, params);
    Tensor lat_int = embed_features(fb.rho_int, fb.local_int, perm, cfg, params);
    StructureOut so = structure_forward(lat_obs, n, cfg, params, train, dropout_rng);
    StructureOut si = structure_forward(lat_int, n, cfg, params, train, dropout_rng);
    ModelOutput out;
    out.pairs = so.pairs;
    out.edge_logits_obs = so.edge_logits;
    out.edge_logits_int = si.edge_logits;
    out.h_obs = so.h;
    out.h_int = si.h;
    out.target_logits = diff_forward(so.h, si.h, fb.moments_obs, fb.moments_int, cfg,
                                     params, train, dropout_rng);
    return out;
}

Losses compute_losses(const ModelOutput& out, const Dag& g_obs, const Dag& g_int,
                      const std::vector<int>& targets) {
    auto labels_for = [&](const Dag& g) {
        std::vector<int> labels;
        labels.reserve(out.pairs.size());
        for (auto [i, j] : out.pairs) {
            if (g.has_edge(i, j))
                labels.push_back(0);
            else if (g.has_edge(j, i))
                labels.push_back(1);
            else
                labels.push_back(2);
        }
        return labels;
    };
    size_t n = out.target_logits.size();
    std::vector<double> indicator(n, 0.0);
    for (int t : targets) {
        if (t < 0 || static_cast<size_t>(t) >= n)
            throw std::invalid_argument("compute_losses: target out of range");
        indicator[t] = 1.0;
    }
    Losses l;
    l.l_g = nn::add(nn::softmax_cross_entropy(out.edge_logits_obs, labels_for(g_obs)),
                    nn::softmax_cross_entropy(out.edge_logits_int, labels_for(g_int)));
    l.l_i = nn::bce_with_logits(out.target_logits, indicator);
    l.total = nn::add(l.l_g, l.l_i);
    return l;
}

std::vector<double> predict_targets(const FeatureBundle& fb, const CdnConfig& cfg,
                                    ParamStore& params, uint64_t seed, int ensemble) {
    int n = static_cast<int>(fb.rho_obs.rows);
    if (n > cfg.n_max)
        throw std::invalid_argument("predict_targets: node count exceeds n_max");
    Rng rng(seed);
    std::vector<double> probs(n, 0.0);
    for (int e = 0; e < std::max(1, ensemble); ++e) {
        Rng perm_rng = rng.fork(e + 1);
        std::vector<int> perm = sample_node_permutation(n, cfg.n_max, perm_rng);
        Rng drop_rng = rng.fork(1000 + e);  // unused: dropout off at inference
        ModelOutput out = model_forward(fb, perm, cfg, params, false, drop_rng);
        for (int i = 0; i < n; ++i)
            probs[i] += 1.0 / (1.0 + std::exp(-out.target_logits.values()[i]));
    }
    for (auto& p : probs) p /= static_cast<double>(std::max(1, ensemble));
    return probs;
}

std::vector<double> predict_targets(const Matrix& obs, const Matrix& intv,
                                    const CdnConfig& cfg, ParamStore& params,
                                    uint64_t seed, int ensemble) {
    FeatureBundle fb = featurize_pair(obs, intv, cfg, Rng(seed).fork(77).next_u64());
    return predict_targets(fb, cfg, params, seed, ensemble);
}

}  // namespace cdn
