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

#include "rfdiff/augment.hpp"
#include "rfdiff/model.hpp"
#include "rfdiff/scene_gen.hpp"

using namespace rfdiff;

namespace {

ModelConfig toy_config() {
    ModelConfig cfg;
    cfg.heatmap_res = 32;
    cfg.latent_channels = 16;
    cfg.cond_channels = 16;
    cfg.unet_channels = {8, 16, 32};
    cfg.fourier_levels = 4;
    cfg.token_grid = 16;
    cfg.voxel_cell = 0.5;
    cfg.voxel_nz = 4;
    return cfg;
}

} // namespace

// ============================================================================
// Fourier signal branch
// ============================================================================

TEST_CASE("fourier_embed: frozen values") {
    const auto z0 = fourier_embed(0.0, 2);
    REQUIRE(z0.size() == 4);
    CHECK(z0[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(z0[1] == Catch::Approx(1.0).margin(1e-12));
    CHECK(z0[2] == Catch::Approx(0.0).margin(1e-12));
    CHECK(z0[3] == Catch::Approx(1.0).margin(1e-12));

    const auto half = fourier_embed(0.5, 1);
    CHECK(half[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(half[1] == Catch::Approx(0.0).margin(1e-12));

    const auto quarter = fourier_embed(0.25, 2);
    CHECK(quarter[0] == Catch::Approx(std::sqrt(2.0) / 2.0).margin(1e-12));
    CHECK(quarter[1] == Catch::Approx(std::sqrt(2.0) / 2.0).margin(1e-12));
    CHECK(quarter[2] == Catch::Approx(1.0).margin(1e-12));
    CHECK(quarter[3] == Catch::Approx(0.0).margin(1e-12));

    CHECK_THROWS_AS(fourier_embed(0.1, 0), ContractError);
}

TEST_CASE("fourier_embed: per-level Lipschitz bounds") {
    const int K = 6;
    Rng rng(split_seed(4, "lip"));
    for (int trial = 0; trial < 200; ++trial) {
        const double x = rng.uniform(0.0, 0.999);
        const double d = 1e-5;
        const auto a = fourier_embed(x, K);
        const auto b = fourier_embed(x + d, K);
        for (int k = 0; k < K; ++k) {
            const double bound = std::ldexp(1.0, k) * M_PI;
            const double slope_sin = std::abs(b[size_t(2 * k)] - a[size_t(2 * k)]) / d;
            const double slope_cos = std::abs(b[size_t(2 * k + 1)] - a[size_t(2 * k + 1)]) / d;
            CHECK(slope_sin <= bound * 1.001);
            CHECK(slope_cos <= bound * 1.001);
        }
    }
}

TEST_CASE("encode_signal: layout and locality") {
    RFSignalDescriptor zero;
    zero.tx_bbox = {0, 0, 0, 0};
    zero.wall_slots = 2;
    zero.wall_params.assign(8, 0.0);
    zero.freq_norm = 0.0;
    const Tensor e = encode_signal(zero, 2);
    REQUIRE(e.numel() == 2 * 2 * (4 + 8 + 1));
    for (int i = 0; i < e.numel(); i += 2) {
        CHECK(e.value()[size_t(i)] == Catch::Approx(0.0).margin(1e-12));
        CHECK(e.value()[size_t(i) + 1] == Catch::Approx(1.0).margin(1e-12));
    }

    // 4 wall slots, K=4: 2*4*(4 + 16 + 1) = 168
    RFSignalDescriptor four = zero;
    four.wall_slots = 4;
    four.wall_params.assign(16, 0.25);
    CHECK(encode_signal(four, 4).numel() == 168);

    // only the trailing 2K entries respond to the frequency
    RFSignalDescriptor a = four, b = four;
    a.freq_norm = 0.2;
    b.freq_norm = 0.9;
    const Tensor ea = encode_signal(a, 4);
    const Tensor eb = encode_signal(b, 4);
    const int n = int(ea.numel());
    for (int i = 0; i < n - 8; ++i)
        CHECK(ea.value()[size_t(i)] == eb.value()[size_t(i)]);
    double tail_diff = 0.0;
    for (int i = n - 8; i < n; ++i)
        tail_diff += std::abs(ea.value()[size_t(i)] - eb.value()[size_t(i)]);
    CHECK(tail_diff > 0.0);
}

// ============================================================================
// Rasters
// ============================================================================

TEST_CASE("render_overview: empty room paints only boundary and marker") {
    RoomSpec spec;
    spec.width = 4.0;
    spec.height = 4.0;
    const Scene s = build_room(spec, 7);
    const Tensor img = render_overview(s, 32, 32);
    const float *occ = img.value().data();
    const float *marker = occ + 32 * 32;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const bool ring = x == 0 || y == 0 || x == 31 || y == 31;
            CHECK(occ[y * 32 + x] == (ring ? 1.0f : 0.0f));
        }
    // marker disk centered on the TX cell
    const int tx_x = int((s.tx.x - s.bounds.lo.x) / (s.bounds.width() / 32));
    const int tx_y = int((s.tx.y - s.bounds.lo.y) / (s.bounds.height() / 32));
    CHECK(marker[tx_y * 32 + tx_x] == 1.0f);
    double marker_sum = 0.0;
    for (int i = 0; i < 32 * 32; ++i)
        marker_sum += marker[i];
    CHECK(marker_sum >= 5.0); // disk of radius 2 cells, possibly clipped
}

TEST_CASE("render_overview: invariant to obstacle list order") {
    RoomSpec spec;
    spec.n_obstacles = 4;
    spec.width = 6.0;
    spec.height = 6.0;
    Scene s = build_room(spec, 11);
    const Tensor a = render_overview(s, 64, 64);
    std::reverse(s.obstacles.begin(), s.obstacles.end());
    const Tensor b = render_overview(s, 64, 64);
    // obstacles are disjoint, so paint order cannot matter
    for (size_t i = 0; i < a.value().size(); ++i)
        CHECK(a.value()[i] == b.value()[i]);
}

TEST_CASE("build_premeasured_image: mask has exactly K ones; order-free") {
    RoomSpec spec;
    spec.n_obstacles = 2;
    const Scene s = build_room(spec, 3);
    const GridSpec grid = GridSpec::cover(s.bounds, 32, 32);
    const Heatmap hm = simulate_heatmap(s, grid, 5.2e9, 2);
    for (uint64_t trial = 0; trial < 10; ++trial) {
        PreMeasuredMap pre = sample_premeasurements(hm, 15, trial);
        const Tensor img = build_premeasured_image(pre, 32, 32, hm.floor_db, hm.range_db);
        double mask_sum = 0.0;
        for (int i = 0; i < 32 * 32; ++i)
            mask_sum += img.value()[size_t(32 * 32 + i)];
        CHECK(mask_sum == 15.0);

        PreMeasuredMap shuffled = pre;
        std::reverse(shuffled.points.begin(), shuffled.points.end());
        const Tensor img2 = build_premeasured_image(shuffled, 32, 32, hm.floor_db, hm.range_db);
        for (size_t i = 0; i < img.value().size(); ++i)
            CHECK(img.value()[i] == img2.value()[i]);
    }
}

// ============================================================================
// Branch encoders
// ============================================================================

TEST_CASE("encode_2d: pyramid level dims and zero-input bias response") {
    ParamStore ps;
    Rng rng(split_seed(21, "enc2d"));
    Encoder2D enc(ps, "e", rng, 16);

    const Tensor overview = Tensor::zeros({1, 3, 36, 36});
    const Tensor premap = Tensor::zeros({1, 2, 36, 36});
    const auto out = enc.forward(overview, premap);
    // stride-2 chain: ceil(36/2^l) per level
    CHECK(out.img_levels.f0.shape() == Shape{1, 16, 36, 36});
    CHECK(out.img_levels.f1.shape() == Shape{1, 32, 18, 18});
    CHECK(out.img_levels.f2.shape() == Shape{1, 64, 9, 9});
    CHECK(out.img_levels.f3.shape() == Shape{1, 128, 5, 5});
    CHECK(out.aggregate.shape()[1] == 16);

    // zero inputs: the bias response, reproducible
    const auto out2 = enc.forward(overview, premap);
    for (size_t i = 0; i < out.aggregate.value().size(); ++i)
        CHECK(out.aggregate.value()[i] == out2.aggregate.value()[i]);

    const Tensor mismatched = Tensor::zeros({1, 2, 32, 32});
    CHECK_THROWS_AS(enc.forward(overview, mismatched), ContractError);
}

TEST_CASE("encode_3d: fixed token grid regardless of volume dims") {
    ParamStore ps;
    Rng rng(split_seed(22, "enc3d"));
    Encoder3D enc(ps, "e3", rng, 16, 16);

    const Tensor small = Tensor::zeros({1, 3, 4, 12, 12});
    const Tensor large = Tensor::zeros({1, 3, 8, 28, 20});
    CHECK(enc.forward(small).shape() == Shape{1, 16, 16, 16});
    CHECK(enc.forward(large).shape() == Shape{1, 16, 16, 16});
}

TEST_CASE("encode_3d: empty volume gives a spatially constant field") {
    ParamStore ps;
    Rng rng(split_seed(23, "enc3d-const"));
    Encoder3D enc(ps, "e3", rng, 16, 8);
    const Tensor out = enc.forward(Tensor::zeros({1, 3, 4, 16, 16}));
    for (int c = 0; c < 16; ++c) {
        const float v0 = out.value()[size_t(c) * 64];
        for (int i = 0; i < 64; ++i)
            CHECK(out.value()[size_t(c) * 64 + i] == Catch::Approx(v0).margin(1e-5));
    }
}

TEST_CASE("encode_3d: sensitive to a one-cell box translation") {
    ParamStore ps;
    Rng rng(split_seed(24, "enc3d-sens"));
    Encoder3D enc(ps, "e3", rng, 16, 8);

    auto vol_with_box = [](int x0) {
        Tensor vol = Tensor::zeros({1, 3, 4, 16, 16});
        for (int z = 1; z < 3; ++z)
            for (int y = 6; y < 9; ++y)
                for (int x = x0; x < x0 + 3; ++x) {
                    vol.value()[size_t(((0 * 4 + z) * 16 + y) * 16 + x)] = 1.0f;
                    vol.value()[size_t(((1 * 4 + z) * 16 + y) * 16 + x)] = 0.45f;
                }
        return vol;
    };
    const Tensor a = enc.forward(vol_with_box(5));
    const Tensor b = enc.forward(vol_with_box(6));
    double l2 = 0.0;
    for (size_t i = 0; i < a.value().size(); ++i) {
        const double d = double(a.value()[i]) - b.value()[i];
        l2 += d * d;
    }
    CHECK(l2 > 0.0);
}

// ============================================================================
// Fusion and the full encoder
// ============================================================================

TEST_CASE("fuse: output matches the latent shape and responds to the signal") {
    ParamStore ps;
    Rng rng(split_seed(25, "fuse"));
    FuseBlock fuse(ps, "f", rng, 8, 8, 6, 16);
    Rng data_rng(split_seed(26, "fuse-data"));
    const Tensor f3d = randn({1, 8, 16, 16}, data_rng);
    const Tensor f2d = randn({1, 8, 32, 32}, data_rng);

    Tensor sig_zero = Tensor::zeros({6});
    Tensor sig_hot = Tensor::zeros({6});
    sig_hot.value()[3] = 1.0f;

    const Tensor a = fuse.forward(f3d, f2d, sig_zero);
    CHECK(a.shape() == Shape{1, 16, 32, 32});
    const Tensor b = fuse.forward(f3d, f2d, sig_hot);
    double l2 = 0.0;
    for (size_t i = 0; i < a.value().size(); ++i) {
        const double d = double(a.value()[i]) - b.value()[i];
        l2 += d * d;
    }
    CHECK(l2 > 0.0);
}

TEST_CASE("rf3d encoder: gradient reaches all three branches") {
    const ModelConfig cfg = toy_config();
    DiffusionModel model(cfg, 5);

    RoomSpec spec;
    spec.n_obstacles = 2;
    const Scene scene = build_room(spec, 9);
    const GridSpec grid = GridSpec::cover(scene.bounds, cfg.heatmap_res, cfg.heatmap_res);
    const Heatmap hm = simulate_heatmap(scene, grid, 77e9, 2);
    const PreMeasuredMap pre = sample_premeasurements(hm, 15, 2);
    const ConditionInputs cond =
        build_condition_inputs(scene, pre, hm.floor_db, 77e9, model.cfg);

    model.params.zero_grads();
    backward(sum_all(square(model.condition_features(cond))));

    auto branch_grad = [&](const std::string &prefix) {
        double acc = 0.0;
        for (auto &[name, t] : model.params.items())
            if (name.rfind(prefix, 0) == 0)
                for (float g : t.grad())
                    acc += std::abs(g);
        return acc;
    };
    CHECK(branch_grad("encoder.e2d") > 0.0);
    CHECK(branch_grad("encoder.e3d") > 0.0);
    CHECK(branch_grad("encoder.fuse") > 0.0);
}

TEST_CASE("rf3d encoder: two chirp frequencies give distinct features") {
    const ModelConfig cfg = toy_config();
    DiffusionModel model(cfg, 6);

    RoomSpec spec;
    spec.n_obstacles = 1;
    const Scene scene = build_room(spec, 4);
    const GridSpec grid = GridSpec::cover(scene.bounds, cfg.heatmap_res, cfg.heatmap_res);
    const Heatmap hm = simulate_heatmap(scene, grid, 77e9, 2);
    const PreMeasuredMap pre = sample_premeasurements(hm, 15, 8);

    NoGradGuard ng;
    const Tensor fa = model.condition_features(
        build_condition_inputs(scene, pre, hm.floor_db, 77e9, model.cfg));
    const Tensor fb = model.condition_features(
        build_condition_inputs(scene, pre, hm.floor_db, 77.008e9, model.cfg));
    double l2 = 0.0;
    for (size_t i = 0; i < fa.value().size(); ++i) {
        const double d = double(fa.value()[i]) - fb.value()[i];
        l2 += d * d;
    }
    CHECK(l2 > 0.0);
}

// ============================================================================
// D4 augmentation consistency
// ============================================================================

TEST_CASE("d4 transforms: round-trip and point-plane agreement") {
    Rng rng(split_seed(31, "d4"));
    const Tensor x = randn({1, 2, 8, 8}, rng);
    // 180 degrees twice is the identity
    const Tensor twice = d4_transform_nchw(d4_transform_nchw(x, 2), 2);
    for (size_t i = 0; i < x.value().size(); ++i)
        CHECK(twice.value()[i] == x.value()[i]);

    // a marked pixel lands where d4_point says it should
    for (int k = 0; k < 8; ++k) {
        Tensor probe = Tensor::zeros({1, 1, 16, 16});
        const int px = 3, py = 11;
        probe.value()[size_t(py * 16 + px)] = 1.0f;
        const Tensor moved = d4_transform_nchw(probe, k);
        auto [nx, ny] = d4_point((px + 0.5) / 16.0, (py + 0.5) / 16.0, k);
        const int ex = int(nx * 16.0);
        const int ey = int(ny * 16.0);
        CAPTURE(k, ex, ey);
        CHECK(moved.value()[size_t(ey * 16 + ex)] == 1.0f);
    }
}
