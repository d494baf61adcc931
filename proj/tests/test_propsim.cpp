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

#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "rfdiff/heatmap_io.hpp"
#include "rfdiff/premeasure.hpp"
#include "rfdiff/propagation.hpp"
#include "rfdiff/scene_gen.hpp"

using namespace rfdiff;

namespace {

// Free-space scene: valid bounds and TX, no geometry.
Scene open_scene(const Vec2 &tx, double side = 20.0) {
    Scene s;
    s.bounds = Rect{{0.0, 0.0}, {side, side}};
    s.tx = tx;
    s.validate();
    return s;
}

double friis_db(double d, double freq) {
    const double lambda = kSpeedOfLight / freq;
    return 20.0 * std::log10(lambda / (4.0 * M_PI * d));
}

} // namespace

// ============================================================================
// Frequency plans
// ============================================================================

TEST_CASE("fmcw_frequencies: chirp plan matches the sweep equation") {
    const FrequencyPlan plan = fmcw_frequencies(77e9, 4e9, 20e-6, 25e6, 10);
    REQUIRE(plan.frequencies.size() == 10);
    for (int i = 0; i < 10; ++i)
        CHECK(plan.frequencies[size_t(i)] == Catch::Approx(77e9 + 8e6 * i).epsilon(1e-12));
    // index-1 offset: B * (1/R_s) / T_c = 8 MHz
    CHECK(plan.frequencies[1] - plan.frequencies[0] == Catch::Approx(8e6).epsilon(1e-12));
}

TEST_CASE("fmcw_frequencies: degenerate and invalid plans") {
    const FrequencyPlan one = fmcw_frequencies(77e9, 4e9, 20e-6, 25e6, 1);
    REQUIRE(one.frequencies.size() == 1);
    CHECK(one.frequencies[0] == 77e9);
    CHECK_THROWS_AS(fmcw_frequencies(77e9, 4e9, 20e-6, 25e6, 501), ContractError);
    CHECK_THROWS_AS(fmcw_frequencies(-1.0, 4e9, 20e-6, 25e6, 10), ContractError);
}

TEST_CASE("wifi_frequencies: 2.4 GHz plus ten 5 GHz channels") {
    const FrequencyPlan plan = wifi_frequencies();
    REQUIRE(plan.frequencies.size() == 11);
    CHECK(plan.frequencies[0] == 2.4e9);
    CHECK(plan.frequencies[2] == Catch::Approx(5.18e9).epsilon(1e-12));
    CHECK(plan.frequencies[10] == Catch::Approx(5.34e9).epsilon(1e-12));
    for (size_t i = 1; i < plan.frequencies.size(); ++i)
        CHECK(plan.frequencies[i] > plan.frequencies[i - 1]);
}

// ============================================================================
// Path tracing
// ============================================================================

TEST_CASE("trace_paths: free space yields exactly the direct path") {
    const Scene s = open_scene({5.0, 5.0});
    const auto paths = trace_paths(s, {9.0, 8.0}, 3);
    REQUIRE(paths.size() == 1);
    CHECK(paths[0].order == 0);
    CHECK(paths[0].coeff == 1.0);
    CHECK(paths[0].length == Catch::Approx(5.0).epsilon(1e-12)); // 3-4-5 triangle
}

TEST_CASE("trace_paths: rejects coincident endpoints") {
    const Scene s = open_scene({5.0, 5.0});
    CHECK_THROWS_AS(trace_paths(s, {5.0, 5.0}, 1), NumericError);
}

TEST_CASE("trace_paths: single-wall mirror image geometry") {
    Scene s;
    s.bounds = Rect{{-10.0, -5.0}, {10.0, 5.0}};
    s.tx = {0.0, 1.0};
    s.walls.push_back(WallSegment{{-10.0, 0.0}, {10.0, 0.0}, material_by_name("concrete"), false});
    s.validate();

    const auto paths = trace_paths(s, {4.0, 1.0}, 1);
    REQUIRE(paths.size() == 2);
    CHECK(paths[0].order == 0);
    CHECK(paths[0].length == Catch::Approx(4.0).epsilon(1e-12));
    CHECK(paths[1].order == 1);
    CHECK(paths[1].length == Catch::Approx(std::sqrt(20.0)).epsilon(1e-12));
    CHECK(paths[1].coeff == Catch::Approx(0.8).epsilon(1e-12)); // concrete reflection
}

TEST_CASE("trace_paths: blocked direct path carries the crossing attenuation") {
    Scene s = open_scene({1.0, 2.0}, 8.0);
    s.obstacles.push_back({Vec2{3.0, 2.0}, Vec2{0.5, 0.5}, material_by_name("metal"), false});
    s.validate();
    const auto paths = trace_paths(s, {5.0, 2.0}, 0);
    REQUIRE(paths.size() == 1);
    CHECK(paths[0].coeff == Catch::Approx(std::pow(10.0, -1.5)).epsilon(1e-12));
}

TEST_CASE("trace_paths: wall crossing applies per-crossing loss once") {
    Scene s;
    s.bounds = Rect{{0.0, 0.0}, {8.0, 4.0}};
    s.tx = {2.0, 2.0};
    s.walls.push_back(WallSegment{{4.0, 0.0}, {4.0, 4.0}, material_by_name("plasterboard"), false});
    s.validate();
    const auto paths = trace_paths(s, {6.0, 2.0}, 0);
    REQUIRE(paths.size() == 1);
    CHECK(paths[0].coeff == Catch::Approx(std::pow(10.0, -3.0 / 20.0)).epsilon(1e-12));
}

// ============================================================================
// Field combination
// ============================================================================

TEST_CASE("rssi_at: single free-space path matches closed-form value") {
    const std::vector<PathContribution> paths = {{1.0, 1.0, 0}};
    const double got = rssi_at(paths, 2.4e9);
    CHECK(got == Catch::Approx(friis_db(1.0, 2.4e9)).margin(1e-9));
    CHECK(got == Catch::Approx(-40.05).margin(0.01));
}

TEST_CASE("rssi_at: doubling distance loses exactly 20 log10(2)") {
    const std::vector<PathContribution> near = {{1.0, 1.0, 0}};
    const std::vector<PathContribution> far = {{2.0, 1.0, 0}};
    const double drop = rssi_at(near, 2.4e9) - rssi_at(far, 2.4e9);
    CHECK(drop == Catch::Approx(20.0 * std::log10(2.0)).margin(1e-9));
    CHECK(drop == Catch::Approx(6.02).margin(0.01));
}

TEST_CASE("rssi_at: half-wavelength offset paths cancel destructively") {
    const double freq = 3e9;
    const double lambda = kSpeedOfLight / freq;
    const double d = 10.0;
    const std::vector<PathContribution> pair = {{d, 1.0, 0}, {d + lambda / 2.0, 1.0, 0}};
    const std::vector<PathContribution> single = {{d, 1.0, 0}};
    CHECK(rssi_at(single, freq) - rssi_at(pair, freq) >= 40.0);
}

TEST_CASE("rssi_at: rejects empty path lists") {
    CHECK_THROWS_AS(rssi_at({}, 2.4e9), ContractError);
}

// ============================================================================
// Heatmap simulation
// ============================================================================

TEST_CASE("simulate_heatmap: free-space decay is monotone along a ray") {
    const Scene s = open_scene({10.0, 10.0});
    const GridSpec grid = GridSpec::cover(s.bounds, 40, 40);
    const Heatmap hm = simulate_heatmap(s, grid, 5.16e9, 3);
    // walk outward along +x from the TX cell
    const int iy = 19;
    double prev = 1e9;
    for (int ix = 20; ix < 40; ++ix) {
        CHECK(hm.at(ix, iy) < prev);
        prev = hm.at(ix, iy);
    }
}

TEST_CASE("simulate_heatmap: matches closed-form Friis everywhere in free space") {
    const Scene s = open_scene({7.3, 11.4});
    const GridSpec grid = GridSpec::cover(s.bounds, 64, 64);
    const Heatmap hm = simulate_heatmap(s, grid, 77e9, 3);
    double worst = 0.0;
    for (int iy = 0; iy < 64; ++iy)
        for (int ix = 0; ix < 64; ++ix) {
            const double d = distance(grid.center(ix, iy), s.tx);
            worst = std::max(worst, std::abs(hm.at(ix, iy) - friis_db(d, 77e9)));
        }
    CHECK(worst <= 1e-6);
}

TEST_CASE("simulate_heatmap: reciprocity at matched points") {
    RoomSpec spec;
    spec.width = 6.0;
    spec.height = 5.0;
    spec.n_obstacles = 3;
    const Scene base = build_room(spec, 77);
    Rng rng(split_seed(2, "recip"));

    auto sample_point = [&]() {
        while (true) {
            Vec2 p{rng.uniform(0.4, 5.6), rng.uniform(0.4, 4.6)};
            bool ok = true;
            for (const auto &b : base.obstacles)
                if (b.rect().contains(p, Scene::kTxBoxHalf))
                    ok = false;
            if (ok)
                return p;
        }
    };

    for (int trial = 0; trial < 100; ++trial) {
        const Vec2 p1 = sample_point();
        const Vec2 p2 = sample_point();
        if (distance(p1, p2) < 0.2)
            continue;
        Scene fwd = base;
        fwd.tx = p1;
        Scene rev = base;
        rev.tx = p2;
        const double ab = rssi_at(trace_paths(fwd, p2, 3), 5.18e9);
        const double ba = rssi_at(trace_paths(rev, p1, 3), 5.18e9);
        CHECK(std::abs(ab - ba) <= 1e-9);
    }
}

TEST_CASE("simulate_heatmap: an obstacle never raises fully-crossed cells") {
    Rng rng(split_seed(5, "mono"));
    for (int trial = 0; trial < 5; ++trial) {
        Scene fs = open_scene({rng.uniform(2.0, 4.0), rng.uniform(2.0, 4.0)}, 12.0);
        Scene blocked = fs;
        blocked.obstacles.push_back({Vec2{rng.uniform(6.5, 8.0), rng.uniform(6.5, 8.0)},
                                     Vec2{0.6, 0.6},
                                     material_by_name("brick"),
                                     false});
        blocked.validate();
        const GridSpec grid = GridSpec::cover(fs.bounds, 32, 32);
        const Heatmap open_map = simulate_heatmap(fs, grid, 5.18e9, 3);
        const Heatmap blocked_map = simulate_heatmap(blocked, grid, 5.18e9, 3);
        const SceneTracer tracer(blocked, 3);
        for (int iy = 0; iy < 32; ++iy)
            for (int ix = 0; ix < 32; ++ix) {
                const auto paths = tracer.trace(grid.center(ix, iy));
                // in the wall-less scene every path is the direct one
                const bool all_cross =
                    paths.size() == 1 && paths[0].coeff < 1.0 - 1e-12;
                if (all_cross)
                    CHECK(blocked_map.at(ix, iy) <= open_map.at(ix, iy) + 1e-9);
            }
    }
}

TEST_CASE("simulate_heatmap: chirp-spaced frequencies yield distinct maps") {
    RoomSpec spec;
    spec.width = 6.0;
    spec.height = 6.0;
    spec.n_obstacles = 2;
    const Scene s = build_room(spec, 13);
    const GridSpec grid = GridSpec::cover(s.bounds, 48, 48);
    const auto maps = simulate_heatmaps(s, grid, {77e9, 77.008e9}, 3);
    double max_diff = 0.0;
    for (size_t i = 0; i < maps[0].rssi_db.size(); ++i)
        max_diff = std::max(max_diff, std::abs(maps[0].rssi_db[i] - maps[1].rssi_db[i]));
    CHECK(max_diff > 0.1);
}

TEST_CASE("heatmap normalization: pixels bounded and 8-bit round-trip bounded") {
    RoomSpec spec;
    spec.n_obstacles = 2;
    const Scene s = build_room(spec, 21);
    const GridSpec grid = GridSpec::cover(s.bounds, 32, 32);
    const Heatmap hm = simulate_heatmap(s, grid, 5.26e9, 3);
    CHECK(hm.range_db == 70.0);
    for (size_t i = 0; i < hm.rssi_db.size(); ++i) {
        const double px = hm.pixel(i);
        CHECK(px >= 0.0);
        CHECK(px <= 1.0);
        const double quant = std::round(px * 255.0) / 255.0;
        const double back = hm.pixel_to_db(quant);
        if (hm.rssi_db[i] >= hm.floor_db && hm.rssi_db[i] <= hm.floor_db + hm.range_db)
            CHECK(std::abs(back - hm.rssi_db[i]) <= hm.range_db / 255.0);
    }
}

TEST_CASE("simulate_heatmap: runtime scales with the pixel count") {
    RoomSpec spec;
    spec.width = 6.0;
    spec.height = 6.0;
    spec.n_obstacles = 3;
    const Scene s = build_room(spec, 31);
    const Heatmap small = simulate_heatmap(s, GridSpec::cover(s.bounds, 64, 64), 77e9, 3);
    const Heatmap large = simulate_heatmap(s, GridSpec::cover(s.bounds, 128, 128), 77e9, 3);
    const double ratio = large.sim_seconds / small.sim_seconds;
    CHECK(ratio > 4.0 * 0.7);
    CHECK(ratio < 4.0 * 1.3);
}

// ============================================================================
// Pre-measurements and the interpolation baseline
// ============================================================================

TEST_CASE("sample_premeasurements: unique, in range, deterministic") {
    const Scene s = open_scene({3.0, 3.0}, 6.0);
    const GridSpec grid = GridSpec::cover(s.bounds, 16, 16);
    const Heatmap hm = simulate_heatmap(s, grid, 2.4e9, 1);

    const PreMeasuredMap a = sample_premeasurements(hm, 15, 5);
    REQUIRE(a.count() == 15);
    std::set<std::pair<int, int>> seen;
    for (const auto &p : a.points) {
        CHECK(p.ix >= 0);
        CHECK(p.ix < 16);
        CHECK(p.iy >= 0);
        CHECK(p.iy < 16);
        seen.insert({p.ix, p.iy});
    }
    CHECK(seen.size() == 15);

    const PreMeasuredMap b = sample_premeasurements(hm, 15, 5);
    for (int i = 0; i < 15; ++i) {
        CHECK(a.points[size_t(i)].ix == b.points[size_t(i)].ix);
        CHECK(a.points[size_t(i)].iy == b.points[size_t(i)].iy);
    }

    const PreMeasuredMap all = sample_premeasurements(hm, 16 * 16, 5);
    std::set<std::pair<int, int>> every;
    for (const auto &p : all.points)
        every.insert({p.ix, p.iy});
    CHECK(every.size() == 256);
}

TEST_CASE("mri_baseline: reproduces an exact log-distance field") {
    const Scene s = open_scene({5.0, 5.0}, 10.0);
    const GridSpec grid = GridSpec::cover(s.bounds, 32, 32);
    Heatmap field;
    field.grid = grid;
    field.rssi_db.assign(32 * 32, 0.0);
    for (int iy = 0; iy < 32; ++iy)
        for (int ix = 0; ix < 32; ++ix)
            field.at(ix, iy) = -30.0 - 10.0 * 2.2 * std::log10(distance(grid.center(ix, iy), s.tx));
    field.normalize_floor();

    const PreMeasuredMap pre = sample_premeasurements(field, 15, 3);
    const Heatmap est = mri_baseline(pre, s, grid, 2.4e9);
    double worst = 0.0;
    for (size_t i = 0; i < est.rssi_db.size(); ++i)
        worst = std::max(worst, std::abs(est.rssi_db[i] - field.rssi_db[i]));
    CHECK(worst <= 1e-6);
}

TEST_CASE("mri_baseline: exact at measured points") {
    RoomSpec spec;
    spec.n_obstacles = 3;
    const Scene s = build_room(spec, 8);
    const GridSpec grid = GridSpec::cover(s.bounds, 32, 32);
    const Heatmap gt = simulate_heatmap(s, grid, 5.2e9, 3);
    const PreMeasuredMap pre = sample_premeasurements(gt, 15, 9);
    const Heatmap est = mri_baseline(pre, s, grid, 5.2e9);
    for (const auto &p : pre.points)
        CHECK(est.at(p.ix, p.iy) == Catch::Approx(p.rssi_db).margin(1e-9));
}

TEST_CASE("mri_baseline: near-exact on free-space ground truth") {
    const Scene s = open_scene({4.0, 7.0}, 12.0);
    const GridSpec grid = GridSpec::cover(s.bounds, 64, 64);
    const Heatmap gt = simulate_heatmap(s, grid, 5.18e9, 3);
    const PreMeasuredMap pre = sample_premeasurements(gt, 15, 4);
    const Heatmap est = mri_baseline(pre, s, grid, 5.18e9);
    std::vector<double> errs;
    for (size_t i = 0; i < gt.rssi_db.size(); ++i)
        errs.push_back(std::abs(est.rssi_db[i] - gt.rssi_db[i]));
    std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
    CHECK(errs[errs.size() / 2] <= 1.0);
}

TEST_CASE("mri_baseline: requires at least three points") {
    const Scene s = open_scene({3.0, 3.0}, 6.0);
    const GridSpec grid = GridSpec::cover(s.bounds, 8, 8);
    PreMeasuredMap pre;
    pre.points = {{1, 1, -40.0}, {2, 2, -44.0}};
    CHECK_THROWS_AS(mri_baseline(pre, s, grid, 2.4e9), ContractError);
}

TEST_CASE("heatmap io: CSV round-trip preserves values") {
    const Scene s = open_scene({3.0, 3.0}, 6.0);
    const GridSpec grid = GridSpec::cover(s.bounds, 12, 10);
    const Heatmap hm = simulate_heatmap(s, grid, 2.4e9, 1);
    const std::string path = "/tmp/rfdiff_test_hm.csv";
    write_heatmap_csv(hm, path);
    int nx = 0, ny = 0;
    const auto values = read_heatmap_csv(path, nx, ny);
    REQUIRE(nx == 12);
    REQUIRE(ny == 10);
    for (size_t i = 0; i < values.size(); ++i)
        CHECK(values[i] == Catch::Approx(hm.rssi_db[i]).margin(5e-7));
}
