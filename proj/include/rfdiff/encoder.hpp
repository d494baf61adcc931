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

#include "rfdiff/frequency.hpp"
#include "rfdiff/nn.hpp"
#include "rfdiff/premeasure.hpp"
#include "rfdiff/voxelize.hpp"

namespace rfdiff {

// ============================================================================
// Raster condition inputs
// ============================================================================

// Top-down overview raster: channel 0 occupancy, channel 1 TX marker disk,
// channel 2 material code (reflection coefficient of the covering primitive).
// The material channel can be zeroed for the reflection-coefficient ablation.
inline Tensor render_overview(const Scene &scene, int height, int width,
                              bool material_channel = true) {
    Tensor img = Tensor::zeros({1, 3, height, width});
    float *occ = img.value().data();
    float *marker = occ + int64_t(height) * width;
    float *mat = marker + int64_t(height) * width;

    const double cw = scene.bounds.width() / width;
    const double ch = scene.bounds.height() / height;
    auto cell_rect = [&](int x, int y) {
        const Vec2 lo{scene.bounds.lo.x + x * cw, scene.bounds.lo.y + y * ch};
        return Rect{lo, {lo.x + cw, lo.y + ch}};
    };
    auto paint = [&](int x, int y, double gamma) {
        const int64_t i = int64_t(y) * width + x;
        occ[i] = 1.0f;
        if (material_channel)
            mat[i] = float(gamma);
    };

    for (const auto &w : scene.walls) {
        if (w.is_opening)
            continue;
        const double lo_x = std::min(w.p0.x, w.p1.x), hi_x = std::max(w.p0.x, w.p1.x);
        const double lo_y = std::min(w.p0.y, w.p1.y), hi_y = std::max(w.p0.y, w.p1.y);
        const int x0 = std::max(0, int(std::floor((lo_x - scene.bounds.lo.x) / cw)) - 1);
        const int x1 = std::min(width - 1, int(std::floor((hi_x - scene.bounds.lo.x) / cw)) + 1);
        const int y0 = std::max(0, int(std::floor((lo_y - scene.bounds.lo.y) / ch)) - 1);
        const int y1 = std::min(height - 1, int(std::floor((hi_y - scene.bounds.lo.y) / ch)) + 1);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
                if (detail::segment_touches_rect(w.p0, w.p1, cell_rect(x, y)))
                    paint(x, y, w.material.reflection_coeff);
    }
    for (const auto &b : scene.obstacles) {
        const Rect r = b.rect();
        const int x0 = std::max(0, int(std::floor((r.lo.x - scene.bounds.lo.x) / cw)));
        const int x1 = std::min(width - 1, int(std::ceil((r.hi.x - scene.bounds.lo.x) / cw)) - 1);
        const int y0 = std::max(0, int(std::floor((r.lo.y - scene.bounds.lo.y) / ch)));
        const int y1 = std::min(height - 1, int(std::ceil((r.hi.y - scene.bounds.lo.y) / ch)) - 1);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
                if (cell_rect(x, y).overlaps(r))
                    paint(x, y, b.material.reflection_coeff);
    }

    // TX marker: disk of radius 2 cells centered on the TX cell.
    const int tx_x = std::clamp(int((scene.tx.x - scene.bounds.lo.x) / cw), 0, width - 1);
    const int tx_y = std::clamp(int((scene.tx.y - scene.bounds.lo.y) / ch), 0, height - 1);
    for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
            if (dx * dx + dy * dy > 4)
                continue;
            const int x = tx_x + dx, y = tx_y + dy;
            if (x >= 0 && x < width && y >= 0 && y < height)
                marker[int64_t(y) * width + x] = 1.0f;
        }
    return img;
}

// Sparse measured-RSSI raster: channel 0 normalized RSSI at measured cells,
// channel 1 the binary mask.
inline Tensor build_premeasured_image(const PreMeasuredMap &pre, int height, int width,
                                      double floor_db, double range_db) {
    Tensor img = Tensor::zeros({1, 2, height, width});
    float *val = img.value().data();
    float *mask = val + int64_t(height) * width;
    for (const auto &p : pre.points) {
        if (p.ix < 0 || p.ix >= width || p.iy < 0 || p.iy >= height)
            throw ContractError("build_premeasured_image: point outside the raster");
        const int64_t i = int64_t(p.iy) * width + p.ix;
        val[i] = float(std::clamp((p.rssi_db - floor_db) / range_db, 0.0, 1.0));
        mask[i] = 1.0f;
    }
    return img;
}

// ============================================================================
// RF signal descriptor and Fourier features
// ============================================================================

struct RFSignalDescriptor {
    std::vector<double> tx_bbox;      // 4 normalized scalars
    std::vector<double> wall_params;  // 4 per wall slot, zero padded
    double freq_norm = 0.0;
    int wall_slots = 0;

    static RFSignalDescriptor build(const Scene &scene, double freq_hz, int wall_slots = 8) {
        RFSignalDescriptor d;
        d.wall_slots = wall_slots;
        const Rect box = scene.tx_bbox();
        const double W = scene.bounds.width(), H = scene.bounds.height();
        auto nx = [&](double x) { return std::clamp((x - scene.bounds.lo.x) / W, 0.0, 1.0); };
        auto ny = [&](double y) { return std::clamp((y - scene.bounds.lo.y) / H, 0.0, 1.0); };
        d.tx_bbox = {nx(box.lo.x), ny(box.lo.y), nx(box.hi.x), ny(box.hi.y)};
        d.wall_params.assign(size_t(wall_slots) * 4, 0.0);
        int slot = 0;
        for (const auto &w : scene.walls) {
            if (w.is_opening || slot >= wall_slots)
                continue;
            d.wall_params[size_t(slot) * 4 + 0] = nx(w.p0.x);
            d.wall_params[size_t(slot) * 4 + 1] = ny(w.p0.y);
            d.wall_params[size_t(slot) * 4 + 2] = nx(w.p1.x);
            d.wall_params[size_t(slot) * 4 + 3] = ny(w.p1.y);
            ++slot;
        }
        d.freq_norm = std::clamp(normalized_frequency(freq_hz), 0.0, 1.0);
        return d;
    }

    std::vector<double> scalars() const {
        std::vector<double> out = tx_bbox;
        out.insert(out.end(), wall_params.begin(), wall_params.end());
        out.push_back(freq_norm);
        return out;
    }
};

// [sin(2^k pi x), cos(2^k pi x)] for k = 0..K-1, sin first per level.
inline std::vector<double> fourier_embed(double x, int levels) {
    if (levels < 1)
        throw ContractError("fourier_embed: need at least one level");
    std::vector<double> out;
    out.reserve(size_t(levels) * 2);
    for (int k = 0; k < levels; ++k) {
        const double arg = std::ldexp(1.0, k) * M_PI * x;
        out.push_back(std::sin(arg));
        out.push_back(std::cos(arg));
    }
    return out;
}

// Concatenated per-scalar Fourier embeddings in declared field order.
inline Tensor encode_signal(const RFSignalDescriptor &desc, int levels) {
    const auto scalars = desc.scalars();
    std::vector<float> out;
    out.reserve(scalars.size() * size_t(levels) * 2);
    for (double s : scalars)
        for (double v : fourier_embed(s, levels))
            out.push_back(float(v));
    const int n = int(out.size());
    return Tensor::from_data({n}, std::move(out));
}

// ============================================================================
// 2D branch: two stride-2 pyramids with upsample-and-add aggregation
// ============================================================================

struct Pyramid2D {
    Conv2dLayer stem, l1, l2, l3;
    GroupNormLayer n0, n1, n2, n3;
    Conv2dLayer lat1, lat2, lat3;

    Pyramid2D() = default;
    Pyramid2D(ParamStore &ps, const std::string &prefix, Rng &rng, int in_channels, int agg) {
        const int w0 = 16, w1 = 32, w2 = 64, w3 = 128;
        stem = Conv2dLayer(ps, prefix + ".stem", rng, in_channels, w0, 3, 1, 1);
        n0 = GroupNormLayer(ps, prefix + ".n0", w0);
        l1 = Conv2dLayer(ps, prefix + ".l1", rng, w0, w1, 3, 2, 1);
        n1 = GroupNormLayer(ps, prefix + ".n1", w1);
        l2 = Conv2dLayer(ps, prefix + ".l2", rng, w1, w2, 3, 2, 1);
        n2 = GroupNormLayer(ps, prefix + ".n2", w2);
        l3 = Conv2dLayer(ps, prefix + ".l3", rng, w2, w3, 3, 2, 1);
        n3 = GroupNormLayer(ps, prefix + ".n3", w3);
        lat1 = Conv2dLayer(ps, prefix + ".lat1", rng, w1, agg, 1, 1, 0);
        lat2 = Conv2dLayer(ps, prefix + ".lat2", rng, w2, agg, 1, 1, 0);
        lat3 = Conv2dLayer(ps, prefix + ".lat3", rng, w3, agg, 1, 1, 0);
    }

    struct Levels {
        Tensor f0, f1, f2, f3; // strides 1, 2, 4, 8
        Tensor aggregate;      // stride 2, agg channels
    };

    Levels forward(const Tensor &x) const {
        Levels out;
        out.f0 = silu(n0.forward(stem.forward(x)));
        out.f1 = silu(n1.forward(l1.forward(out.f0)));
        out.f2 = silu(n2.forward(l2.forward(out.f1)));
        out.f3 = silu(n3.forward(l3.forward(out.f2)));
        // top-down: lateral projections merged by upsample-and-add; resize
        // handles odd level sizes from the ceil division
        Tensor merged = lat3.forward(out.f3);
        const Tensor l2m = lat2.forward(out.f2);
        merged = add(resize_nearest2d(merged, l2m.shape()[2], l2m.shape()[3]), l2m);
        const Tensor l1m = lat1.forward(out.f1);
        merged = add(resize_nearest2d(merged, l1m.shape()[2], l1m.shape()[3]), l1m);
        out.aggregate = merged;
        return out;
    }
};

struct Encoder2D {
    Pyramid2D pyr_overview, pyr_premeasured;
    Conv2dLayer fuse;
    int out_channels = 0;

    Encoder2D() = default;
    Encoder2D(ParamStore &ps, const std::string &prefix, Rng &rng, int out_channels_)
        : out_channels(out_channels_) {
        pyr_overview = Pyramid2D(ps, prefix + ".img", rng, 3, out_channels_);
        pyr_premeasured = Pyramid2D(ps, prefix + ".pre", rng, 2, out_channels_);
        fuse = Conv2dLayer(ps, prefix + ".fuse", rng, 2 * out_channels_, out_channels_, 1, 1, 0);
    }

    struct Output {
        Pyramid2D::Levels img_levels;
        Pyramid2D::Levels pre_levels;
        Tensor aggregate; // (1, out_channels, H/2, W/2)
    };

    Output forward(const Tensor &overview, const Tensor &premeasured) const {
        if (overview.shape()[2] != premeasured.shape()[2] ||
            overview.shape()[3] != premeasured.shape()[3])
            throw ContractError("encode_2d: raster dims differ, " + shape_str(overview.shape()) +
                                " vs " + shape_str(premeasured.shape()));
        Output out;
        out.img_levels = pyr_overview.forward(overview);
        out.pre_levels = pyr_premeasured.forward(premeasured);
        out.aggregate =
            fuse.forward(concat({out.img_levels.aggregate, out.pre_levels.aggregate}, 1));
        return out;
    }
};

// ============================================================================
// 3D branch: dense conv pyramid, FPN merge, MHSA, fixed-token interpolation
// ============================================================================

struct Encoder3D {
    Conv3dLayer stem, l1, l2, l3;
    GroupNormLayer n0, n1, n2, n3;
    Conv3dLayer lat2, lat3;
    SelfAttention attention;
    LinearLayer proj;
    int token_grid = 16;
    int out_channels = 0;

    Encoder3D() = default;
    Encoder3D(ParamStore &ps, const std::string &prefix, Rng &rng, int out_channels_,
              int token_grid_ = 16)
        : token_grid(token_grid_), out_channels(out_channels_) {
        const int w0 = 8, w1 = 16, w2 = 32, w3 = 64;
        stem = Conv3dLayer(ps, prefix + ".stem", rng, 3, w0, 3, 3, 1, 1);
        n0 = GroupNormLayer(ps, prefix + ".n0", w0);
        l1 = Conv3dLayer(ps, prefix + ".l1", rng, w0, w1, 3, 3, 2, 1);
        n1 = GroupNormLayer(ps, prefix + ".n1", w1);
        l2 = Conv3dLayer(ps, prefix + ".l2", rng, w1, w2, 3, 3, 2, 1);
        n2 = GroupNormLayer(ps, prefix + ".n2", w2);
        l3 = Conv3dLayer(ps, prefix + ".l3", rng, w2, w3, 3, 3, 2, 1);
        n3 = GroupNormLayer(ps, prefix + ".n3", w3);
        lat2 = Conv3dLayer(ps, prefix + ".lat2", rng, w2, out_channels_, 1, 1, 1, 0);
        lat3 = Conv3dLayer(ps, prefix + ".lat3", rng, w3, out_channels_, 1, 1, 1, 0);
        attention = SelfAttention(ps, prefix + ".mhsa", rng, out_channels_, 4);
        proj = LinearLayer(ps, prefix + ".proj", rng, out_channels_, out_channels_);
    }

    // vol tensor (1, 3, nz, ny, nx) -> tokens (1, out_channels, grid, grid)
    Tensor forward(const Tensor &vol) const {
        Tensor f0 = silu(n0.forward(stem.forward(vol)));
        Tensor f1 = silu(n1.forward(l1.forward(f0)));
        Tensor f2 = silu(n2.forward(l2.forward(f1)));
        Tensor f3 = silu(n3.forward(l3.forward(f2)));
        // FPN merge at the stride-4 level
        const Shape &s2 = f2.shape();
        Tensor merged = add(interp3d(lat3.forward(f3), s2[2], s2[3], s2[4]), lat2.forward(f2));
        // flatten to tokens, one MHSA layer, then residual
        const int tokens = s2[2] * s2[3] * s2[4];
        Tensor tok = reshape(permute(reshape(merged, {out_channels, tokens}), {1, 0}),
                             {tokens, out_channels});
        tok = add(tok, attention.forward(tok));
        // back to the 3-D grid, interpolate to the fixed token grid
        Tensor grid = reshape(permute(tok, {1, 0}), {1, out_channels, s2[2], s2[3], s2[4]});
        Tensor fixed = interp3d(grid, 1, token_grid, token_grid);
        Tensor flat = reshape(permute(reshape(fixed, {out_channels, token_grid * token_grid}),
                                      {1, 0}),
                              {token_grid * token_grid, out_channels});
        flat = proj.forward(flat);
        return reshape(permute(flat, {1, 0}), {1, out_channels, token_grid, token_grid});
    }
};

// ============================================================================
// Unified fusion to the condition tensor
// ============================================================================

struct FuseBlock {
    Conv2dLayer proj;
    int out_channels = 0;

    FuseBlock() = default;
    FuseBlock(ParamStore &ps, const std::string &prefix, Rng &rng, int c3d, int c2d, int sig_len,
              int out_channels_)
        : out_channels(out_channels_) {
        proj = Conv2dLayer(ps, prefix + ".proj", rng, c3d + c2d + sig_len, out_channels_, 1, 1, 0);
    }

    // f3d (1,C3,g,g), f2d (1,C2,H,W), fsig (S) -> (1, out_channels, H, W)
    Tensor forward(const Tensor &f3d, const Tensor &f2d, const Tensor &fsig) const {
        const int h = f2d.shape()[2], w = f2d.shape()[3];
        const int g = f3d.shape()[2];
        if (h % g != 0 || h / g < 1 || w != h)
            throw ContractError("fuse: token grid " + std::to_string(g) +
                                " does not tile latent " + std::to_string(h));
        Tensor f3d_up = h / g == 1 ? f3d : upsample_nearest2d(f3d, h / g);
        Tensor sig_map = broadcast_to_map(fsig, h, w);
        return proj.forward(concat({f3d_up, f2d, sig_map}, 1));
    }
};

// The full conditioning encoder producing the RF-3D features.
struct RF3DEncoder {
    Encoder2D enc2d;
    Encoder3D enc3d;
    FuseBlock fuser;
    int fourier_levels = 6;
    int wall_slots = 8;

    RF3DEncoder() = default;
    RF3DEncoder(ParamStore &ps, const std::string &prefix, Rng &rng, int cond_channels,
                int fourier_levels_ = 6, int wall_slots_ = 8, int token_grid = 16)
        : fourier_levels(fourier_levels_), wall_slots(wall_slots_) {
        enc2d = Encoder2D(ps, prefix + ".e2d", rng, cond_channels);
        enc3d = Encoder3D(ps, prefix + ".e3d", rng, cond_channels, token_grid);
        const int sig_len = 2 * fourier_levels_ * (4 + 4 * wall_slots_ + 1);
        fuser = FuseBlock(ps, prefix + ".fuse", rng, cond_channels, cond_channels, sig_len,
                          cond_channels);
    }

    Tensor forward(const Tensor &overview, const Tensor &premeasured, const Tensor &vol,
                   const RFSignalDescriptor &desc) const {
        const Tensor f2d = enc2d.forward(overview, premeasured).aggregate;
        const Tensor f3d = enc3d.forward(vol);
        const Tensor fsig = encode_signal(desc, fourier_levels);
        return fuser.forward(f3d, f2d, fsig);
    }
};

// OccupancyVolume -> network input tensor (1, 3, nz, ny, nx). Loss is
// normalized by the strongest palette attenuation.
inline Tensor volume_to_tensor(const OccupancyVolume &vol) {
    const int64_t n = int64_t(vol.size());
    std::vector<float> data;
    data.reserve(size_t(3 * n));
    data.insert(data.end(), vol.occupancy.begin(), vol.occupancy.end());
    data.insert(data.end(), vol.gamma.begin(), vol.gamma.end());
    for (float l : vol.loss_db)
        data.push_back(l / 30.0f);
    return Tensor::from_data({1, 3, vol.nz, vol.ny, vol.nx}, std::move(data));
}

} // namespace rfdiff
