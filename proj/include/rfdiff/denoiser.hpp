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

#include "rfdiff/nn.hpp"

namespace rfdiff {

// Sinusoidal timestep embedding (constant w.r.t. parameters).
inline Tensor timestep_embedding(int t, int dim) {
    Tensor emb = Tensor::zeros({dim});
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
        emb.value()[size_t(i)] = float(std::sin(double(t) * freq));
        emb.value()[size_t(half + i)] = float(std::cos(double(t) * freq));
    }
    return emb;
}

// Noise embedding and upsampling block: the noisy latent is embedded at
// reduced resolution with doubled channels, brought back to the condition
// resolution, and fused with the RF-3D features by element-wise addition.
struct PairingBlock {
    Conv2dLayer embed;
    Conv2dLayer proj;

    PairingBlock() = default;
    PairingBlock(ParamStore &ps, const std::string &prefix, Rng &rng, int channels) {
        embed = Conv2dLayer(ps, prefix + ".embed", rng, channels, 2 * channels, 3, 2, 1);
        proj = Conv2dLayer(ps, prefix + ".proj", rng, 2 * channels, channels, 1, 1, 0);
    }

    // z_t (N,C,H,W), features (N,C,H,W) -> F_mixed (N,C,H,W)
    Tensor forward(const Tensor &z_t, const Tensor &features) const {
        const Tensor embedded = proj.forward(upsample_nearest2d(embed.forward(z_t), 2));
        detail::check_same_shape("pairing_block", embedded, features);
        return add(embedded, features);
    }
};

// Residual block with timestep and condition injection.
struct ResBlock {
    GroupNormLayer norm1, norm2;
    Conv2dLayer conv1, conv2, skip;
    LinearLayer temb_proj;
    Conv2dLayer cond_proj;
    bool has_skip = false;

    ResBlock() = default;
    ResBlock(ParamStore &ps, const std::string &prefix, Rng &rng, int cin, int cout,
             int temb_dim, int cond_channels) {
        norm1 = GroupNormLayer(ps, prefix + ".norm1", cin);
        conv1 = Conv2dLayer(ps, prefix + ".conv1", rng, cin, cout, 3, 1, 1);
        temb_proj = LinearLayer(ps, prefix + ".temb", rng, temb_dim, cout);
        cond_proj = Conv2dLayer(ps, prefix + ".cond", rng, cond_channels, cout, 1, 1, 0);
        norm2 = GroupNormLayer(ps, prefix + ".norm2", cout);
        conv2 = Conv2dLayer(ps, prefix + ".conv2", rng, cout, cout, 3, 1, 1);
        has_skip = cin != cout;
        if (has_skip)
            skip = Conv2dLayer(ps, prefix + ".skip", rng, cin, cout, 1, 1, 0);
    }

    // cond_lvl must already match the block's spatial resolution.
    Tensor forward(const Tensor &x, const Tensor &temb, const Tensor &cond_lvl) const {
        Tensor h = conv1.forward(silu(norm1.forward(x)));
        h = add_channel_bias(h, temb_proj.forward(temb));
        h = add(h, cond_proj.forward(cond_lvl));
        h = conv2.forward(silu(norm2.forward(h)));
        return add(h, has_skip ? skip.forward(x) : x);
    }
};

// Three-level U-Net over the latent. The head predicts the clean latent
// estimate; the analytic posterior converts it to the step mean.
struct UNetDenoiser {
    static constexpr int kTimeDim = 128;

    int latent_channels = 0;
    std::vector<int> widths;
    LinearLayer temb1, temb2;
    Conv2dLayer in_conv;
    ResBlock down0, down1, mid;
    Conv2dLayer downsample0, downsample1;
    Conv2dLayer up_conv1, up_conv0;
    ResBlock up1, up0;
    GroupNormLayer out_norm;
    Conv2dLayer out_conv;

    UNetDenoiser() = default;
    UNetDenoiser(ParamStore &ps, const std::string &prefix, Rng &rng, int latent_channels_,
                 const std::vector<int> &widths_, int cond_channels)
        : latent_channels(latent_channels_), widths(widths_) {
        if (widths.size() != 3)
            throw ContractError("UNetDenoiser: expected 3 resolution levels");
        const int c0 = widths[0], c1 = widths[1], c2 = widths[2];
        temb1 = LinearLayer(ps, prefix + ".temb1", rng, 64, kTimeDim);
        temb2 = LinearLayer(ps, prefix + ".temb2", rng, kTimeDim, kTimeDim);
        in_conv = Conv2dLayer(ps, prefix + ".in", rng, latent_channels, c0, 3, 1, 1);
        down0 = ResBlock(ps, prefix + ".down0", rng, c0, c0, kTimeDim, cond_channels);
        downsample0 = Conv2dLayer(ps, prefix + ".ds0", rng, c0, c1, 3, 2, 1);
        down1 = ResBlock(ps, prefix + ".down1", rng, c1, c1, kTimeDim, cond_channels);
        downsample1 = Conv2dLayer(ps, prefix + ".ds1", rng, c1, c2, 3, 2, 1);
        mid = ResBlock(ps, prefix + ".mid", rng, c2, c2, kTimeDim, cond_channels);
        up_conv1 = Conv2dLayer(ps, prefix + ".upc1", rng, c2, c1, 3, 1, 1);
        up1 = ResBlock(ps, prefix + ".up1", rng, 2 * c1, c1, kTimeDim, cond_channels);
        up_conv0 = Conv2dLayer(ps, prefix + ".upc0", rng, c1, c0, 3, 1, 1);
        up0 = ResBlock(ps, prefix + ".up0", rng, 2 * c0, c0, kTimeDim, cond_channels);
        out_norm = GroupNormLayer(ps, prefix + ".outnorm", c0);
        out_conv = Conv2dLayer(ps, prefix + ".out", rng, c0, latent_channels, 3, 1, 1);
    }

    // z_t (N,C,H,W), f_mixed (N,C,H,W) -> clean-latent estimate (N,C,H,W).
    // bottleneck_hook, when set, post-processes the bottleneck activation
    // (the video model hangs its temporal layers there).
    Tensor forward(const Tensor &z_t, int t, const Tensor &f_mixed,
                   const std::function<Tensor(const Tensor &)> &bottleneck_hook = nullptr) const {
        if (z_t.shape() != f_mixed.shape())
            throw ContractError("denoiser: z_t " + shape_str(z_t.shape()) + " vs condition " +
                                shape_str(f_mixed.shape()));
        const Tensor temb = silu(temb2.forward(silu(temb1.forward(timestep_embedding(t, 64)))));
        const Tensor cond1 = avg_pool2d(f_mixed, 2);
        const Tensor cond2 = avg_pool2d(f_mixed, 4);

        Tensor h0 = down0.forward(in_conv.forward(z_t), temb, f_mixed);
        Tensor h1 = down1.forward(downsample0.forward(h0), temb, cond1);
        Tensor h2 = mid.forward(downsample1.forward(h1), temb, cond2);
        if (bottleneck_hook)
            h2 = bottleneck_hook(h2);
        Tensor u1 = up1.forward(concat({up_conv1.forward(upsample_nearest2d(h2, 2)), h1}, 1),
                                temb, cond1);
        Tensor u0 = up0.forward(concat({up_conv0.forward(upsample_nearest2d(u1, 2)), h0}, 1),
                                temb, f_mixed);
        return out_conv.forward(silu(out_norm.forward(u0)));
    }
};

} // namespace rfdiff
