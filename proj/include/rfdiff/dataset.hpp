// rfdiff - RF heatmap generation toolkit
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "rfdiff/heatmap_io.hpp"
#include "rfdiff/model.hpp"
#include "rfdiff/scene_gen.hpp"
#include "rfdiff/scene_io.hpp"

namespace rfdiff {

struct DataConfig {
    int n_scenes = 600;
    double train_frac = 0.8;
    uint64_t seed = 1;
    int heatmap_res = 64;
    std::string band = "mmwave"; // "mmwave" or "wifi"
    int max_order = 3;
    int premeasure_k = kDefaultPreMeasureCount;
    double apartment_frac = 0.35;
    int min_obstacles = 1;
    int max_obstacles = 5;

    void validate() const {
        if (n_scenes < 1 || train_frac <= 0.0 || train_frac >= 1.0)
            throw ContractError("DataConfig: bad n_scenes/train_frac");
        if (band != "mmwave" && band != "wifi")
            throw ContractError("DataConfig: band must be mmwave or wifi");
    }

    FrequencyPlan plan() const {
        return band == "mmwave" ? default_mmwave_plan(10) : wifi_frequencies();
    }
};

// One record per (scene, frequency); arms select subsets by index rules.
struct SampleRecord {
    std::string id;
    int scene_index = 0;
    int freq_index = 0;
    std::string scene_path;
    double freq_hz = 0.0;
    std::string heatmap_csv;
    std::string heatmap_pgm;
    std::vector<PreMeasuredPoint> premeasured;
    std::string split; // "train" | "test"
};

struct DatasetManifest {
    std::vector<SampleRecord> records;
    std::string root;

    // Invariant: no scene index appears in both splits.
    void validate() const {
        std::map<int, std::string> seen;
        for (const auto &r : records) {
            auto it = seen.find(r.scene_index);
            if (it == seen.end())
                seen[r.scene_index] = r.split;
            else if (it->second != r.split)
                throw DataError("manifest: scene " + std::to_string(r.scene_index) +
                                " appears in both splits");
        }
    }
};

namespace detail {

inline Scene generate_scene(const DataConfig &cfg, int index) {
    Rng rng(split_seed(cfg.seed, "scene-spec", uint64_t(index)));
    const uint64_t scene_seed = split_seed(cfg.seed, "scene", uint64_t(index));
    RoomSpec spec;
    spec.n_obstacles = rng.uniform_int(cfg.min_obstacles, cfg.max_obstacles);
    if (rng.uniform() < cfg.apartment_frac) {
        spec.width = rng.uniform(3.5, 6.5);
        spec.height = rng.uniform(3.0, 5.0);
        RoomSpec other = spec;
        other.height = rng.uniform(3.0, 5.0);
        other.n_obstacles = rng.uniform_int(cfg.min_obstacles, cfg.max_obstacles);
        return compose_apartment({build_room(spec, scene_seed), build_room(other, scene_seed + 1)},
                                 scene_seed);
    }
    spec.width = rng.uniform(3.5, 9.0);
    spec.height = rng.uniform(3.5, 9.0);
    return build_room(spec, scene_seed);
}

} // namespace detail

// Generates scenes and ground-truth heatmaps for every plan frequency.
// Path tracing is shared across frequencies, so the full grid costs little
// more than a single-frequency corpus. Deterministic from (cfg, seed).
inline DatasetManifest generate_dataset(const DataConfig &cfg, const std::string &out_dir,
                                        const std::function<void(int, int)> &progress = nullptr) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "scenes");
    fs::create_directories(fs::path(out_dir) / "maps");

    const FrequencyPlan plan = cfg.plan();

    // Seeded scene-level split, no scene in both.
    std::vector<int> order(size_t(cfg.n_scenes));
    for (int i = 0; i < cfg.n_scenes; ++i)
        order[size_t(i)] = i;
    Rng split_rng(split_seed(cfg.seed, "split"));
    for (int i = cfg.n_scenes - 1; i > 0; --i)
        std::swap(order[size_t(i)], order[size_t(split_rng.uniform_index(uint64_t(i + 1)))]);
    const int n_train = int(std::lround(cfg.train_frac * cfg.n_scenes));
    std::vector<bool> is_train(size_t(cfg.n_scenes), false);
    for (int i = 0; i < n_train; ++i)
        is_train[size_t(order[size_t(i)])] = true;

    DatasetManifest manifest;
    manifest.root = out_dir;

    char buf[64];
    for (int si = 0; si < cfg.n_scenes; ++si) {
        const Scene scene = detail::generate_scene(cfg, si);
        std::snprintf(buf, sizeof buf, "scenes/scene_%05d.json", si);
        const std::string scene_rel = buf;
        {
            std::ofstream f(fs::path(out_dir) / scene_rel, std::ios::binary);
            f << serialize_scene(scene);
        }
        const GridSpec grid = GridSpec::cover(scene.bounds, cfg.heatmap_res, cfg.heatmap_res);
        const auto maps = simulate_heatmaps(scene, grid, plan.frequencies, cfg.max_order);
        for (size_t fi = 0; fi < maps.size(); ++fi) {
            SampleRecord rec;
            rec.scene_index = si;
            rec.freq_index = int(fi);
            std::snprintf(buf, sizeof buf, "s%05d_f%02zu", si, fi);
            rec.id = buf;
            rec.scene_path = scene_rel;
            rec.freq_hz = maps[fi].freq_hz;
            std::snprintf(buf, sizeof buf, "maps/%s.csv", rec.id.c_str());
            rec.heatmap_csv = buf;
            std::snprintf(buf, sizeof buf, "maps/%s.pgm", rec.id.c_str());
            rec.heatmap_pgm = buf;
            write_heatmap_csv(maps[fi], (fs::path(out_dir) / rec.heatmap_csv).string());
            write_heatmap_pgm(maps[fi], (fs::path(out_dir) / rec.heatmap_pgm).string());
            const PreMeasuredMap pre = sample_premeasurements(
                maps[fi], cfg.premeasure_k,
                split_seed(cfg.seed, "premeasure", uint64_t(si) * 100 + fi));
            rec.premeasured = pre.points;
            rec.split = is_train[size_t(si)] ? "train" : "test";
            manifest.records.push_back(std::move(rec));
        }
        if (progress)
            progress(si + 1, cfg.n_scenes);
    }

    // JSONL manifest, one record per line.
    std::ofstream mf(fs::path(out_dir) / "manifest.jsonl", std::ios::binary);
    if (!mf)
        throw DataError("cannot write manifest in " + out_dir);
    for (const auto &r : manifest.records) {
        nlohmann::ordered_json j;
        j["id"] = r.id;
        j["scene_index"] = r.scene_index;
        j["freq_index"] = r.freq_index;
        j["scene"] = r.scene_path;
        j["freq_hz"] = r.freq_hz;
        j["heatmap_csv"] = r.heatmap_csv;
        j["heatmap_pgm"] = r.heatmap_pgm;
        auto pts = nlohmann::ordered_json::array();
        for (const auto &p : r.premeasured)
            pts.push_back({p.ix, p.iy, p.rssi_db});
        j["premeasured"] = pts;
        j["split"] = r.split;
        mf << j.dump() << "\n";
    }
    manifest.validate();
    return manifest;
}

inline DatasetManifest load_manifest(const std::string &dir) {
    std::ifstream f(std::filesystem::path(dir) / "manifest.jsonl");
    if (!f)
        throw DataError("cannot read manifest in " + dir);
    DatasetManifest manifest;
    manifest.root = dir;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty())
            continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error &e) {
            throw DataError("manifest line invalid: " + std::string(e.what()));
        }
        SampleRecord r;
        r.id = j.at("id").get<std::string>();
        r.scene_index = j.at("scene_index").get<int>();
        r.freq_index = j.at("freq_index").get<int>();
        r.scene_path = j.at("scene").get<std::string>();
        r.freq_hz = j.at("freq_hz").get<double>();
        r.heatmap_csv = j.at("heatmap_csv").get<std::string>();
        r.heatmap_pgm = j.at("heatmap_pgm").get<std::string>();
        for (const auto &p : j.at("premeasured"))
            r.premeasured.push_back({p.at(0).get<int>(), p.at(1).get<int>(), p.at(2).get<double>()});
        r.split = j.at("split").get<std::string>();
        manifest.records.push_back(std::move(r));
    }
    manifest.validate();
    return manifest;
}

// ============================================================================
// Arm selection: which (scene, frequency) records a training run sees
// ============================================================================

// Multi-frequency arm: scene i contributes its (i mod levels) channel, so
// total data stays constant while frequency diversity varies.
inline std::vector<SampleRecord> select_frequency_levels(const DatasetManifest &m, int levels) {
    std::vector<SampleRecord> out;
    for (const auto &r : m.records)
        if (r.freq_index == r.scene_index % levels)
            out.push_back(r);
    return out;
}

// Single-frequency arm at the same total data volume.
inline std::vector<SampleRecord> select_single_frequency(const DatasetManifest &m,
                                                         int freq_index) {
    std::vector<SampleRecord> out;
    for (const auto &r : m.records)
        if (r.freq_index == freq_index)
            out.push_back(r);
    return out;
}

// Hold-out arm: train on every level except `held_out`, test on the held-out
// channel only.
inline std::vector<SampleRecord> select_holdout(const DatasetManifest &m, int levels,
                                                int held_out) {
    std::vector<int> kept;
    for (int fi = 0; fi < levels; ++fi)
        if (fi != held_out)
            kept.push_back(fi);
    std::vector<SampleRecord> out;
    for (const auto &r : m.records) {
        if (r.split == "train") {
            if (r.freq_index == kept[size_t(r.scene_index % kept.size())])
                out.push_back(r);
        } else if (r.freq_index == held_out) {
            out.push_back(r);
        }
    }
    return out;
}

// ============================================================================
// In-memory samples ready for the model
// ============================================================================

struct LoadedSample {
    SampleRecord record;
    Scene scene;
    Heatmap gt;             // with floor normalized to peak - range
    Tensor gt_pixels;       // (1,1,H,W)
    ConditionInputs cond;
    PreMeasureTarget pre_target;
};

inline LoadedSample load_sample(const DatasetManifest &m, const SampleRecord &rec,
                                const ModelConfig &cfg) {
    namespace fs = std::filesystem;
    LoadedSample s;
    s.record = rec;
    {
        std::ifstream f(fs::path(m.root) / rec.scene_path, std::ios::binary);
        if (!f)
            throw DataError("missing scene file " + rec.scene_path);
        std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        s.scene = parse_scene(text);
    }
    int nx = 0, ny = 0;
    s.gt.rssi_db = read_heatmap_csv((fs::path(m.root) / rec.heatmap_csv).string(), nx, ny);
    if (nx != cfg.heatmap_res || ny != cfg.heatmap_res)
        throw DataError("heatmap " + rec.heatmap_csv + " has resolution " + std::to_string(nx) +
                        "x" + std::to_string(ny) + ", model expects " +
                        std::to_string(cfg.heatmap_res));
    s.gt.grid = GridSpec::cover(s.scene.bounds, nx, ny);
    s.gt.freq_hz = rec.freq_hz;
    s.gt.range_db = cfg.range_db;
    s.gt.normalize_floor();

    const auto px = s.gt.to_pixels();
    s.gt_pixels = Tensor::from_data({1, 1, ny, nx}, std::vector<float>(px.begin(), px.end()));

    PreMeasuredMap pre;
    pre.points = rec.premeasured;
    s.cond = build_condition_inputs(s.scene, pre, s.gt.floor_db, rec.freq_hz, cfg);
    s.pre_target = premeasure_target(pre, ny, nx, s.gt.floor_db, cfg.range_db);
    return s;
}

inline std::vector<LoadedSample> load_samples(const DatasetManifest &m,
                                              const std::vector<SampleRecord> &records,
                                              const ModelConfig &cfg, const std::string &split) {
    std::vector<LoadedSample> out;
    for (const auto &r : records)
        if (split.empty() || r.split == split)
            out.push_back(load_sample(m, r, cfg));
    return out;
}

} // namespace rfdiff
