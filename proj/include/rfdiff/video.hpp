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

#include "rfdiff/model.hpp"

namespace rfdiff {

// ============================================================================
// Temporal layers (frame axis = batch axis of the frame-stacked tensors)
// ============================================================================

// Conv3D temporal layer over the frame axis, kernel 3, replicate padding so
// temporally constant inputs stay constant. The convolution is zero
// initialized, leaving the layer identity-additive until trained.
struct TemporalConv {
    Conv3dLayer conv;

    TemporalConv() = default;
    TemporalConv(ParamStore &ps, const std::string &prefix, Rng &rng, int channels) {
        conv = Conv3dLayer(ps, prefix + ".conv", rng, channels, channels, 3, 1, 1, 0,
                           /*zero_init=*/true);
    }

    // x (f, c, h, w) -> same shape; f = 1 passes through.
    Tensor forward(const Tensor &x) const {
        const Shape &s = x.shape();
        if (s.size() != 4)
            throw ContractError("temporal_conv: need (f,c,h,w), got " + shape_str(s));
        const int f = s[0], c = s[1], h = s[2], w = s[3];
        if (f == 1)
            return x;
        // (f,c,h,w) -> (c,f,h,w) -> (1,c,f,h,w), mix along f, invert
        Tensor y = reshape(permute(x, {1, 0, 2, 3}), {1, c, f, h, w});
        y = pad_replicate(y, 2, 1, 1);
        y = conv.forward(y);
        y = permute(reshape(y, {c, f, h, w}), {1, 0, 2, 3});
        return add(x, y);
    }
};

// Self-attention over the frame axis, independently per spatial location,
// residual with a zero-initialized output projection.
struct TemporalAttention {
    LinearLayer proj_q, proj_k, proj_v, proj_out;

    TemporalAttention() = default;
    TemporalAttention(ParamStore &ps, const std::string &prefix, Rng &rng, int channels) {
        proj_q = LinearLayer(ps, prefix + ".q", rng, channels, channels);
        proj_k = LinearLayer(ps, prefix + ".k", rng, channels, channels);
        proj_v = LinearLayer(ps, prefix + ".v", rng, channels, channels);
        proj_out = LinearLayer(ps, prefix + ".out", rng, channels, channels, /*zero_init=*/true);
    }

    // x (f, c, h, w) -> same shape.
    Tensor forward(const Tensor &x) const {
        const Shape &s = x.shape();
        if (s.size() != 4)
            throw ContractError("temporal_attention: need (f,c,h,w), got " + shape_str(s));
        const int f = s[0], c = s[1], h = s[2], w = s[3];
        // (f,c,h,w) -> (h,w,f,c): every location attends over its f tokens
        Tensor tokens = reshape(permute(x, {2, 3, 0, 1}), {h * w, f, c});
        const Tensor att = scaled_dot_attention(proj_q.forward(tokens), proj_k.forward(tokens),
                                                proj_v.forward(tokens));
        Tensor y = proj_out.forward(att);
        y = permute(reshape(y, {h, w, f, c}), {2, 3, 0, 1});
        return add(x, y);
    }
};

// Multi-head cross-attention aggregating per-frame 3D features with a
// sinusoidal frame-index embedding. No residual here; the caller owns it.
struct CrossFrameAttention {
    LinearLayer proj_q, proj_k, proj_v, proj_out;
    int heads = 4;
    int channels = 0;

    CrossFrameAttention() = default;
    CrossFrameAttention(ParamStore &ps, const std::string &prefix, Rng &rng, int channels_,
                        int heads_ = 4, bool zero_out = true)
        : heads(heads_), channels(channels_) {
        proj_q = LinearLayer(ps, prefix + ".q", rng, channels_, channels_);
        proj_k = LinearLayer(ps, prefix + ".k", rng, channels_, channels_);
        proj_v = LinearLayer(ps, prefix + ".v", rng, channels_, channels_);
        proj_out = LinearLayer(ps, prefix + ".out", rng, channels_, channels_, zero_out);
    }

    // tokens (f, n, c): queries carry the frame embedding, keys and values
    // span all frames.
    Tensor forward(const Tensor &tokens) const {
        const Shape &s = tokens.shape();
        if (s.size() != 3 || s[2] != channels)
            throw ContractError("cross_attend_frames: tokens " + shape_str(s));
        const int f = s[0], n = s[1], c = s[2];
        Tensor emb = Tensor::zeros({f, n, c});
        for (int fi = 0; fi < f; ++fi) {
            const Tensor e = timestep_embedding(fi + 1, c);
            for (int ti = 0; ti < n; ++ti)
                std::copy(e.value().begin(), e.value().end(),
                          emb.value().begin() + (int64_t(fi) * n + ti) * c);
        }
        const Tensor q_in = reshape(add(tokens, emb), {f * n, c});
        const Tensor kv_in = reshape(tokens, {f * n, c});
        const int dh = c / heads;
        auto split = [&](const Tensor &t) {
            return permute(reshape(t, {f * n, heads, dh}), {1, 0, 2});
        };
        const Tensor att = scaled_dot_attention(split(proj_q.forward(q_in)),
                                                split(proj_k.forward(kv_in)),
                                                split(proj_v.forward(kv_in)));
        const Tensor merged = reshape(permute(att, {1, 0, 2}), {f * n, c});
        return reshape(proj_out.forward(merged), {f, n, c});
    }
};

// ============================================================================
// Trajectories for dynamic scenes
// ============================================================================

struct Trajectory {
    int obstacle_index = -1;
    std::vector<Vec2> positions; // one center per frame

    void validate(const Scene &scene, double max_step_m) const {
        if (obstacle_index < 0 || size_t(obstacle_index) >= scene.obstacles.size())
            throw ContractError("Trajectory: bad obstacle index");
        const BoxObstacle &box = scene.obstacles[size_t(obstacle_index)];
        for (size_t i = 0; i < positions.size(); ++i) {
            BoxObstacle moved = box;
            moved.center = positions[i];
            const Rect r = moved.rect();
            if (r.lo.x < scene.bounds.lo.x || r.lo.y < scene.bounds.lo.y ||
                r.hi.x > scene.bounds.hi.x || r.hi.y > scene.bounds.hi.y)
                throw ContractError("Trajectory: frame " + std::to_string(i) + " leaves bounds");
            for (size_t oi = 0; oi < scene.obstacles.size(); ++oi)
                if (int(oi) != obstacle_index &&
                    moved.rect().overlaps(scene.obstacles[oi].rect()))
                    throw ContractError("Trajectory: frame " + std::to_string(i) + " overlaps");
            if (moved.rect().contains(scene.tx))
                throw ContractError("Trajectory: frame " + std::to_string(i) + " covers the TX");
            if (i > 0 && distance(positions[i], positions[i - 1]) > max_step_m + 1e-9)
                throw ContractError("Trajectory: frame " + std::to_string(i) + " exceeds speed");
        }
    }
};

// Straight-line trajectory for the first movable obstacle. Speed cap is
// 1.5 m/s at a 0.5 s frame interval. A zero-length line (static clip) is
// produced with probability static_frac.
inline Trajectory make_trajectory(const Scene &scene, int frames, uint64_t seed,
                                  double static_frac = 0.2) {
    int idx = -1;
    for (size_t i = 0; i < scene.obstacles.size(); ++i)
        if (scene.obstacles[i].movable) {
            idx = int(i);
            break;
        }
    if (idx < 0)
        throw ContractError("make_trajectory: scene has no movable obstacle");
    const double max_step = 1.5 * 0.5; // meters per frame
    Rng rng(split_seed(seed, "trajectory"));

    Trajectory traj;
    traj.obstacle_index = idx;
    const Vec2 start = scene.obstacles[size_t(idx)].center;
    if (rng.uniform() < static_frac) {
        traj.positions.assign(size_t(frames), start);
        return traj;
    }
    for (int attempt = 0; attempt < 200; ++attempt) {
        const double angle = rng.uniform(0.0, 2.0 * M_PI);
        const double step = rng.uniform(0.05, max_step);
        const Vec2 delta{std::cos(angle) * step, std::sin(angle) * step};
        Trajectory cand;
        cand.obstacle_index = idx;
        for (int fi = 0; fi < frames; ++fi)
            cand.positions.push_back(start + delta * double(fi));
        try {
            cand.validate(scene, max_step);
            return cand;
        } catch (const ContractError &) {
            continue;
        }
    }
    // fall back to a static clip when the room is too tight to move in
    traj.positions.assign(size_t(frames), start);
    return traj;
}

inline Scene scene_at_frame(const Scene &scene, const Trajectory &traj, int frame) {
    Scene out = scene;
    out.obstacles[size_t(traj.obstacle_index)].center = traj.positions[size_t(frame)];
    out.validate();
    return out;
}

// ============================================================================
// Video model: image backbone plus temporal layers
// ============================================================================

struct FrameConditions {
    std::vector<ConditionInputs> frames;
    int count() const { return int(frames.size()); }
};

struct VideoModel {
    DiffusionModel core;
    TemporalConv latent_tconv;
    TemporalAttention latent_tattn;
    TemporalConv cond_tconv;
    TemporalAttention cond_tattn;
    CrossFrameAttention cross_frames;
    int frames = 8;

    VideoModel(const ModelConfig &cfg, uint64_t init_seed, int frames_ = 8)
        : core(cfg, init_seed), frames(frames_) {
        Rng rng(split_seed(init_seed, "video-init"));
        const int bottleneck = cfg.unet_channels[2];
        latent_tconv = TemporalConv(core.params, "temporal.latent_conv", rng, bottleneck);
        latent_tattn = TemporalAttention(core.params, "temporal.latent_attn", rng, bottleneck);
        cond_tconv = TemporalConv(core.params, "temporal.cond_conv", rng, cfg.latent_channels);
        cond_tattn = TemporalAttention(core.params, "temporal.cond_attn", rng,
                                       cfg.latent_channels);
        cross_frames = CrossFrameAttention(core.params, "temporal.cross", rng, cfg.cond_channels);
    }

    // Per-frame RF-3D features with cross-frame 3D aggregation and the
    // condition-path temporal layers. Output (f, C, hl, wl).
    Tensor condition_features(const FrameConditions &conds) const {
        const int f = conds.count();
        const int g = core.cfg.token_grid;
        const int c = core.cfg.cond_channels;
        // per-frame 3D tokens
        std::vector<Tensor> f3d_tokens;
        for (const auto &cond : conds.frames) {
            const Tensor grid_feat = core.encoder.enc3d.forward(cond.volume); // (1,c,g,g)
            f3d_tokens.push_back(reshape(permute(reshape(grid_feat, {c, g * g}), {1, 0}),
                                         {1, g * g, c}));
        }
        Tensor stacked = concat(f3d_tokens, 0); // (f, g*g, c)
        stacked = add(stacked, cross_frames.forward(stacked));
        // fuse per frame, then mix across frames
        std::vector<Tensor> features;
        for (int fi = 0; fi < f; ++fi)
            features.push_back(frame_features(conds.frames[size_t(fi)], stacked, fi));
        Tensor cond_stack = concat(features, 0); // (f, C, hl, wl)
        cond_stack = cond_tconv.forward(cond_stack);
        cond_stack = cond_tattn.forward(cond_stack);
        return cond_stack;
    }

    // Clean-latent prediction for the whole clip (f frames as the batch
    // axis) with the latent-path temporal layers at the U-Net bottleneck.
    Tensor predict_z0_clip(const Tensor &z_t, int t, const Tensor &cond_stack) const {
        const Tensor f_mixed = core.pairing.forward(z_t, cond_stack);
        auto hook = [this](const Tensor &h) {
            return latent_tattn.forward(latent_tconv.forward(h));
        };
        return core.unet.forward(z_t, t, f_mixed, hook);
    }

    // Joint sampling from an explicit starting latent stack (f, C, hl, hl).
    Tensor video_sample_from(const Tensor &z_T, const FrameConditions &conds) const {
        NoGradGuard ng;
        const Tensor cond_stack = condition_features(conds);
        const Tensor z0 = ddim_sample(
            [&](const Tensor &z, int t) { return predict_z0_clip(z, t, cond_stack); }, z_T,
            core.schedule, core.cfg.sampler);
        return core.codec.decode(z0); // (f, 1, H, W)
    }

    // Joint deterministic sampling of all frames; per-frame noise is
    // independent unless share_noise is set.
    Tensor video_sample_pixels(const FrameConditions &conds, uint64_t noise_seed,
                               bool share_noise = false) const {
        const int f = conds.count();
        const int hl = core.cfg.latent_res();
        Rng rng(split_seed(noise_seed, "video-noise"));
        Tensor z_T = Tensor::zeros({f, core.cfg.latent_channels, hl, hl});
        if (share_noise) {
            const Tensor one = randn({1, core.cfg.latent_channels, hl, hl}, rng);
            for (int fi = 0; fi < f; ++fi)
                std::copy(one.value().begin(), one.value().end(),
                          z_T.value().begin() + int64_t(fi) * one.numel());
        } else {
            for (auto &v : z_T.value())
                v = rng.normal_f();
        }
        return video_sample_from(z_T, conds);
    }

private:
    // One frame's fused features, with the cross-attended 3D tokens sliced
    // out of the stacked tensor (gradient flows through the slice).
    Tensor frame_features(const ConditionInputs &cond, const Tensor &stacked, int fi) const {
        const int g = core.cfg.token_grid;
        const int c = core.cfg.cond_channels;
        const int f = stacked.shape()[0];
        // one-hot row selector keeps autodiff simple: (1,f) x (f, g*g*c)
        Tensor selector = Tensor::zeros({1, f});
        selector.value()[size_t(fi)] = 1.0f;
        const Tensor row = matmul(selector, reshape(stacked, {f, g * g * c})); // (1, g*g*c)
        const Tensor grid_feat = reshape(permute(reshape(row, {g * g, c}), {1, 0}), {1, c, g, g});
        const Tensor f2d =
            core.encoder.enc2d.forward(cond.overview, cond.premeasured).aggregate;
        const Tensor fsig = encode_signal(cond.descriptor, core.encoder.fourier_levels);
        return core.encoder.fuser.forward(grid_feat, f2d, fsig);
    }
};

} // namespace rfdiff
