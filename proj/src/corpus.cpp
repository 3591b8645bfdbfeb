#include "cdn/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cdn {

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (auto& [k, v] : obj.items())
        if (!allowed.count(k))
            throw std::invalid_argument("unknown config key \"" + k + "\" in " + where);
}

json scm_cfg_to_json(const ScmSamplingConfig& s) {
    return {{"weight_low", s.weight_low},     {"weight_high", s.weight_high},
            {"noise_std_low", s.noise_std_low}, {"noise_std_high", s.noise_std_high},
            {"hidden_width", s.hidden_width}, {"root_low", s.root_low},
            {"root_high", s.root_high}};
}

void targets_to_json(json& out, const InterventionRegime& regime) {
    out["targets"] = json::array();
    for (const auto& t : regime.targets) {
        json tj;
        tj["node"] = t.node;
        tj["kind"] = to_string(t.kind);
        switch (t.kind) {
            case InterventionKind::Hard:
                tj["low"] = t.low;
                tj["high"] = t.high;
                break;
            case InterventionKind::Shift:
                tj["delta"] = t.delta;
                break;
            case InterventionKind::Scale:
                tj["factor"] = t.factor;
                break;
        }
        out["targets"].push_back(tj);
    }
}

InterventionRegime targets_from_json(const json& in) {
    InterventionRegime regime;
    for (const auto& tj : in.at("targets")) {
        TargetIntervention t;
        t.node = tj.at("node");
        t.kind = intervention_kind_from_string(tj.at("kind").get<std::string>());
        switch (t.kind) {
            case InterventionKind::Hard:
                t.low = tj.at("low");
                t.high = tj.at("high");
                break;
            case InterventionKind::Shift:
                t.delta = tj.at("delta");
                break;
            case InterventionKind::Scale:
                t.factor = tj.at("factor");
                break;
        }
        regime.targets.push_back(t);
    }
    return regime;
}

// 3 sizes x regimes_per_size distinct target sets, drawn without replacement
std::vector<std::vector<int>> sample_regime_schedule(int n, int per_size, Rng& rng) {
    std::vector<std::vector<int>> schedule;
    std::set<std::vector<int>> seen;
    for (int size = 1; size <= 3; ++size) {
        int want = std::min<long long>(per_size, [&] {
            long long c = 1;
            for (int i = 0; i < size; ++i) c = c * (n - i) / (i + 1);
            return c;
        }());
        int got = 0;
        size_t guard = 0;
        while (got < want) {
            if (++guard > 100000u)
                throw std::runtime_error("regime schedule: cannot draw distinct sets");
            std::vector<int> t;
            while (static_cast<int>(t.size()) < size) {
                int v = static_cast<int>(rng.below(n));
                if (std::find(t.begin(), t.end(), v) == t.end()) t.push_back(v);
            }
            std::sort(t.begin(), t.end());
            if (seen.insert(t).second) {
                schedule.push_back(t);
                ++got;
            }
        }
    }
    return schedule;
}

void write_one_dataset(const CorpusConfig& cfg, const DatasetRecord& rec,
                       const fs::path& ds_dir) {
    Rng rng(rec.seed);
    uint64_t dag_seed = rng.next_u64();
    uint64_t scm_seed = rng.next_u64();
    uint64_t obs_seed = rng.next_u64();

    int expected_edges = static_cast<int>(std::lround(rec.edge_multiplier * rec.n));
    Dag g = sample_er_dag(rec.n, expected_edges, dag_seed);
    ScmSamplingConfig scfg = cfg.scm;
    Scm scm = instantiate_scm(g, rec.family, scm_seed, scfg);

    Rng sched_rng = rng.fork(1);
    int per_size = cfg.regimes_per_size < 0 ? rec.n : cfg.regimes_per_size;
    auto schedule = sample_regime_schedule(rec.n, per_size, sched_rng);

    fs::create_directories(ds_dir);
    write_graph_csv((ds_dir / "graph_obs.csv").string(), g);
    write_f32((ds_dir / "obs.f32").string(), sample_data(scm, cfg.m_obs, obs_seed));

    json meta;
    meta["id"] = rec.id;
    meta["n"] = rec.n;
    meta["family"] = to_string(rec.family);
    meta["edge_multiplier"] = rec.edge_multiplier;
    meta["seed"] = rec.seed;
    meta["m_obs"] = cfg.m_obs;
    meta["m_int"] = cfg.m_int;
    meta["num_regimes"] = schedule.size();
    meta["regimes"] = json::array();

    Rng kind_rng = rng.fork(2);
    for (size_t r = 0; r < schedule.size(); ++r) {
        InterventionKind kind =
            cfg.kinds[kind_rng.below(cfg.kinds.size())];
        Rng regime_rng = rng.fork(1000 + r);
        InterventionRegime regime = sample_regime(schedule[r], kind, regime_rng);
        auto [scm_int, g_int] = mutilate(scm, regime);
        uint64_t int_seed = regime_rng.next_u64();

        fs::path rdir = ds_dir / ("regime_" + std::to_string(r));
        fs::create_directories(rdir);
        write_f32((rdir / "int.f32").string(),
                  sample_data(scm_int, cfg.m_int, int_seed));
        write_graph_csv((rdir / "graph_int.csv").string(), g_int);
        json tj;
        tj["kind"] = to_string(kind);
        targets_to_json(tj, regime);
        std::ofstream tout(rdir / "targets.json");
        tout << tj.dump(2) << "\n";
        if (!tout)
            throw std::runtime_error("write failure: " +
                                     (rdir / "targets.json").string());

        json rj;
        rj["index"] = r;
        rj["kind"] = to_string(kind);
        rj["targets"] = schedule[r];
        meta["regimes"].push_back(rj);
    }
    std::ofstream mout(ds_dir / "meta.json");
    mout << meta.dump(2) << "\n";
    if (!mout)
        throw std::runtime_error("write failure: " + (ds_dir / "meta.json").string());
}

}  // namespace

CorpusConfig corpus_config_from_json(const std::string& text) {
    json j = json::parse(text);
    reject_unknown_keys(j,
                        {"node_counts", "edge_multipliers", "families", "kinds",
                         "datasets_per_config", "m_obs", "m_int", "regimes_per_size",
                         "seed", "scm"},
                        "corpus config");
    CorpusConfig cfg;
    if (j.contains("node_counts")) cfg.node_counts = j["node_counts"].get<std::vector<int>>();
    if (j.contains("edge_multipliers"))
        cfg.edge_multipliers = j["edge_multipliers"].get<std::vector<double>>();
    if (j.contains("families")) {
        cfg.families.clear();
        for (const auto& f : j["families"])
            cfg.families.push_back(mechanism_family_from_string(f.get<std::string>()));
    }
    if (j.contains("kinds")) {
        cfg.kinds.clear();
        for (const auto& k : j["kinds"])
            cfg.kinds.push_back(intervention_kind_from_string(k.get<std::string>()));
    }
    if (j.contains("datasets_per_config")) cfg.datasets_per_config = j["datasets_per_config"];
    if (j.contains("m_obs")) cfg.m_obs = j["m_obs"];
    if (j.contains("m_int")) cfg.m_int = j["m_int"];
    if (j.contains("regimes_per_size")) cfg.regimes_per_size = j["regimes_per_size"];
    if (j.contains("seed")) cfg.seed = j["seed"];
    if (j.contains("scm")) {
        const json& s = j["scm"];
        reject_unknown_keys(s,
                            {"weight_low", "weight_high", "noise_std_low",
                             "noise_std_high", "hidden_width", "root_low", "root_high"},
                            "corpus config scm");
        if (s.contains("weight_low")) cfg.scm.weight_low = s["weight_low"];
        if (s.contains("weight_high")) cfg.scm.weight_high = s["weight_high"];
        if (s.contains("noise_std_low")) cfg.scm.noise_std_low = s["noise_std_low"];
        if (s.contains("noise_std_high")) cfg.scm.noise_std_high = s["noise_std_high"];
        if (s.contains("hidden_width")) cfg.scm.hidden_width = s["hidden_width"];
        if (s.contains("root_low")) cfg.scm.root_low = s["root_low"];
        if (s.contains("root_high")) cfg.scm.root_high = s["root_high"];
    }
    if (cfg.node_counts.empty() || cfg.families.empty() || cfg.kinds.empty() ||
        cfg.edge_multipliers.empty() || cfg.datasets_per_config <= 0)
        throw std::invalid_argument("corpus config: empty cell axis or dataset count");
    for (int n : cfg.node_counts)
        if (n < 1) throw std::invalid_argument("corpus config: node count must be >= 1");
    return cfg;
}

std::string corpus_config_to_json(const CorpusConfig& cfg) {
    json j;
    j["node_counts"] = cfg.node_counts;
    j["edge_multipliers"] = cfg.edge_multipliers;
    j["families"] = json::array();
    for (auto f : cfg.families) j["families"].push_back(to_string(f));
    j["kinds"] = json::array();
    for (auto k : cfg.kinds) j["kinds"].push_back(to_string(k));
    j["datasets_per_config"] = cfg.datasets_per_config;
    j["m_obs"] = cfg.m_obs;
    j["m_int"] = cfg.m_int;
    j["regimes_per_size"] = cfg.regimes_per_size;
    j["seed"] = cfg.seed;
    j["scm"] = scm_cfg_to_json(cfg.scm);
    return j.dump(2);
}

std::vector<DatasetRecord> generate_corpus(const CorpusConfig& cfg,
                                           const std::string& out_dir, int workers) {
    fs::create_directories(out_dir);
    std::vector<DatasetRecord> records;
    Rng master(cfg.seed);
    size_t index = 0;
    for (int n : cfg.node_counts)
        for (double mult : cfg.edge_multipliers)
            for (MechanismFamily family : cfg.families)
                for (int d = 0; d < cfg.datasets_per_config; ++d) {
                    DatasetRecord rec;
                    rec.id = "ds_" + std::to_string(index);
                    rec.dir = rec.id;
                    rec.n = n;
                    rec.edge_multiplier = mult;
                    rec.family = family;
                    rec.seed = Rng(cfg.seed).fork(index + 1).next_u64();
                    rec.m_obs = cfg.m_obs;
                    rec.m_int = cfg.m_int;
                    records.push_back(rec);
                    ++index;
                }
#ifdef _OPENMP
    if (workers > 0) omp_set_num_threads(workers);
#endif
    std::string failure;
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(records.size()); ++i) {
        try {
            write_one_dataset(cfg, records[i], fs::path(out_dir) / records[i].dir);
        } catch (const std::exception& e) {
#pragma omp critical
            failure = e.what();
        }
    }
    if (!failure.empty()) throw std::runtime_error(failure);
    // the schedule can be smaller than requested for tiny graphs, so read the
    // realized regime count back from each meta file
    for (auto& rec : records) {
        json meta = json::parse(std::ifstream(fs::path(out_dir) / rec.dir / "meta.json"),
                                nullptr, true);
        rec.num_regimes = meta.at("num_regimes");
    }

    json manifest;
    manifest["format_version"] = 1;
    manifest["config"] = json::parse(corpus_config_to_json(cfg));
    manifest["datasets"] = json::array();
    for (const auto& rec : records) {
        json dj;
        dj["id"] = rec.id;
        dj["dir"] = rec.dir;
        dj["n"] = rec.n;
        dj["edge_multiplier"] = rec.edge_multiplier;
        dj["family"] = to_string(rec.family);
        dj["seed"] = rec.seed;
        dj["num_regimes"] = rec.num_regimes;
        dj["m_obs"] = rec.m_obs;
        dj["m_int"] = rec.m_int;
        manifest["datasets"].push_back(dj);
    }
    std::ofstream mout(fs::path(out_dir) / "manifest.json");
    mout << manifest.dump(2) << "\n";
    if (!mout)
        throw std::runtime_error("write failure: " +
                                 (fs::path(out_dir) / "manifest.json").string());
    return records;
}

std::vector<DatasetRecord> read_manifest(const std::string& out_dir) {
    fs::path p = fs::path(out_dir) / "manifest.json";
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot read manifest: " + p.string());
    json manifest = json::parse(in);
    std::vector<DatasetRecord> records;
    for (const auto& dj : manifest.at("datasets")) {
        DatasetRecord rec;
        rec.id = dj.at("id");
        rec.dir = dj.at("dir");
        rec.n = dj.at("n");
        rec.edge_multiplier = dj.at("edge_multiplier");
        rec.family = mechanism_family_from_string(dj.at("family").get<std::string>());
        rec.seed = dj.at("seed");
        rec.num_regimes = dj.at("num_regimes");
        rec.m_obs = dj.at("m_obs");
        rec.m_int = dj.at("m_int");
        records.push_back(rec);
    }
    return records;
}

LoadedDataset load_dataset(const std::string& dir) {
    fs::path p(dir);
    std::ifstream min(p / "meta.json");
    if (!min) throw std::runtime_error("cannot read meta: " + (p / "meta.json").string());
    json meta = json::parse(min);
    LoadedDataset ds;
    ds.dir = dir;
    ds.n = meta.at("n");
    ds.family = mechanism_family_from_string(meta.at("family").get<std::string>());
    ds.num_regimes = meta.at("num_regimes");
    ds.m_obs = meta.at("m_obs");
    ds.m_int = meta.at("m_int");
    ds.obs = read_f32((p / "obs.f32").string(), ds.m_obs, ds.n);
    ds.g_obs = read_graph_csv((p / "graph_obs.csv").string(), ds.n);
    return ds;
}

LoadedRegime load_regime(const LoadedDataset& ds, int r) {
    fs::path rdir = fs::path(ds.dir) / ("regime_" + std::to_string(r));
    LoadedRegime lr;
    lr.data = read_f32((rdir / "int.f32").string(), ds.m_int, ds.n);
    std::ifstream tin(rdir / "targets.json");
    if (!tin)
        throw std::runtime_error("cannot read targets: " +
                                 (rdir / "targets.json").string());
    lr.regime = targets_from_json(json::parse(tin));
    lr.g_int = read_graph_csv((rdir / "graph_int.csv").string(), ds.n);
    return lr;
}

void write_f32(const std::string& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path);
    std::vector<float> buf(m.data.begin(), m.data.end());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw std::runtime_error("write failure: " + path);
}

Matrix read_f32(const std::string& path, size_t rows, size_t cols) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read: " + path);
    std::vector<float> buf(rows * cols);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated f32 file: " + path);
    Matrix m(rows, cols);
    std::copy(buf.begin(), buf.end(), m.data.begin());
    return m;
}

void write_graph_csv(const std::string& path, const Dag& g) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << "src,dst\n";
    for (const auto& [s, d] : g.edges) out << s << "," << d << "\n";
    if (!out) throw std::runtime_error("write failure: " + path);
}

Dag read_graph_csv(const std::string& path, int n) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("src,dst", 0) != 0)
        throw std::runtime_error("bad graph csv header: " + path);
    Dag g;
    g.n = n;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("bad graph csv row in " + path + ": " + line);
        int s = std::stoi(line.substr(0, comma));
        int d = std::stoi(line.substr(comma + 1));
        if (s < 0 || d < 0 || s >= n || d >= n)
            throw std::runtime_error("edge out of range in " + path + ": " + line);
        g.edges.insert({s, d});
    }
    return g;
}

}  // namespace cdn
