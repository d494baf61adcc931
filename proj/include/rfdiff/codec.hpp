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

// Pixel <-> latent transform. The encoder halves the spatial resolution and
// bounds the latent with tanh; the decoder maps back to [0,1] pixels via a
// transposed convolution and a sigmoid. Both train only through the
// pixel-space losses.
struct LatentCodec {
    Conv2dLayer enc1, enc2;
    ConvT2dLayer dec1;
    Conv2dLayer dec2;

    LatentCodec() = default;
    LatentCodec(ParamStore &ps, const std::string &prefix, Rng &rng, int latent_channels) {
        enc1 = Conv2dLayer(ps, prefix + ".enc1", rng, 1, 32, 3, 2, 1);
        enc2 = Conv2dLayer(ps, prefix + ".enc2", rng, 32, latent_channels, 3, 1, 1);
        dec1 = ConvT2dLayer(ps, prefix + ".dec1", rng, latent_channels, 32, 2, 2);
        dec2 = Conv2dLayer(ps, prefix + ".dec2", rng, 32, 1, 3, 1, 1);
    }

    // pixels (N,1,H,W) in [0,1] -> latent (N,C,H/2,W/2) in (-1,1)
    Tensor encode(const Tensor &pixels) const {
        return tanh_op(enc2.forward(silu(enc1.forward(pixels))));
    }

    // latent -> pixels in [0,1]
    Tensor decode(const Tensor &latent) const {
        return sigmoid(dec2.forward(silu(dec1.forward(latent))));
    }
};

} // namespace rfdiff
