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

#include "rfdiff/codec.hpp"
#include "rfdiff/denoiser.hpp"
#include "rfdiff/encoder.hpp"
#include "rfdiff/sampler.hpp"

namespace rfdiff {

struct ModelConfig {
    int heatmap_res = 64;     // H' = W' of the pixel rasters
    int latent_channels = 64; // C of the latent and condition
    int cond_channels = 64;
    std::vector<int> unet_channels = {32, 64, 128};
    int fourier_levels = 6;
    int wall_slots = 8;
    int token_grid = 16;
    double voxel_cell = 0.25; // meters
    int voxel_nz = 8;
    int premeasure_k = kDefaultPreMeasureCount;
    bool material_channel = true;
    double range_db = 70.0;
    int max_order = 3; // simulator reflection order for ground truth
    double beta_start = 1e-4, beta_end = 0.02;
    SamplerConfig sampler;

    int latent_res() const { return heatmap_res / 2; }

    void validate() const {
        if (heatmap_res < 8 || heatmap_res % 4 != 0)
            throw ContractError("ModelConfig: heatmap_res must be a multiple of 4, >= 8");
        if (latent_res() % token_grid != 0 && token_grid % latent_res() != 0)
            throw ContractError("ModelConfig: token grid must tile the latent resolution");
        if (unet_channels.size() != 3)
            throw ContractError("ModelConfig: unet_channels needs 3 levels");
        sampler.validate();
    }
};

// Everything the encoder needs for one sample.
struct ConditionInputs {
    Tensor overview;    // (1,3,H',W')
    Tensor premeasured; // (1,2,H',W')
    Tensor volume;      // (1,3,nz,ny,nx)
    RFSignalDescriptor descriptor;
};

inline ConditionInputs build_condition_inputs(const Scene &scene, const PreMeasuredMap &pre,
                                              double floor_db, double freq_hz,
                                              const ModelConfig &cfg) {
    ConditionInputs c;
    c.overview = render_overview(scene, cfg.heatmap_res, cfg.heatmap_res, cfg.material_channel);
    c.premeasured =
        build_premeasured_image(pre, cfg.heatmap_res, cfg.heatmap_res, floor_db, cfg.range_db);
    c.volume = volume_to_tensor(voxelize(scene, cfg.voxel_cell, cfg.voxel_nz));
    c.descriptor = RFSignalDescriptor::build(scene, freq_hz, cfg.wall_slots);
    return c;
}

// Conditional latent diffusion model over RF heatmaps.
struct DiffusionModel {
    ModelConfig cfg;
    ParamStore params;
    NoiseSchedule schedule;
    RF3DEncoder encoder;
    LatentCodec codec;
    PairingBlock pairing;
    UNetDenoiser unet;

    explicit DiffusionModel(const ModelConfig &cfg_, uint64_t init_seed) : cfg(cfg_) {
        cfg.validate();
        schedule = make_schedule(cfg.sampler.train_steps, cfg.beta_start, cfg.beta_end);
        Rng rng(split_seed(init_seed, "model-init"));
        encoder = RF3DEncoder(params, "encoder", rng, cfg.cond_channels, cfg.fourier_levels,
                              cfg.wall_slots, cfg.token_grid);
        codec = LatentCodec(params, "codec", rng, cfg.latent_channels);
        pairing = PairingBlock(params, "pairing", rng, cfg.latent_channels);
        unet = UNetDenoiser(params, "unet", rng, cfg.latent_channels, cfg.unet_channels,
                            cfg.latent_channels);
    }

    Tensor condition_features(const ConditionInputs &c) const {
        const Tensor f = encoder.forward(c.overview, c.premeasured, c.volume, c.descriptor);
        const int hl = cfg.latent_res();
        if (f.shape() != Shape{1, cfg.latent_channels, hl, hl})
            throw ContractError("condition/latent shape contract violated: " +
                                shape_str(f.shape()));
        return f;
    }

    // Clean-latent estimate from the conditional denoiser.
    Tensor predict_z0(const Tensor &z_t, int t, const Tensor &f_rf3d,
                      const std::function<Tensor(const Tensor &)> &bottleneck_hook = nullptr) const {
        const Tensor f_mixed = pairing.forward(z_t, f_rf3d);
        return unet.forward(z_t, t, f_mixed, bottleneck_hook);
    }

    // One deterministic reverse step, z_{t-1} = mu_theta(z_t, t, c).
    Tensor denoise_step(const Tensor &z_t, int t, const Tensor &f_rf3d) const {
        if (t < 1 || t > schedule.steps)
            throw ContractError("denoise_step: t out of range");
        return denoise_step_mean(z_t, predict_z0(z_t, t, f_rf3d), t, schedule);
    }

    // DDIM sampling from an explicit starting latent.
    Tensor sample_pixels_from(const Tensor &z_T, const Tensor &features) const {
        NoGradGuard ng;
        const Tensor z0 = ddim_sample(
            [&](const Tensor &z, int t) { return predict_z0(z, t, features); }, z_T, schedule,
            cfg.sampler);
        return codec.decode(z0);
    }

    // Full DDIM sampling to pixels. Deterministic per (seed, condition).
    Tensor sample_pixels(const ConditionInputs &cond, uint64_t noise_seed) const {
        NoGradGuard ng;
        const Tensor f = condition_features(cond);
        Rng rng(split_seed(noise_seed, "ddim-noise"));
        const int hl = cfg.latent_res();
        const Tensor z_T = randn({1, cfg.latent_channels, hl, hl}, rng);
        return sample_pixels_from(z_T, f);
    }
};

} // namespace rfdiff
