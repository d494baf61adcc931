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

#include "rfdiff/encoder.hpp"

namespace rfdiff {

// D4 symmetry index k in [0, 8): rotate by 90 deg k%4 times, then mirror in
// x when k >= 4. Propagation is equivariant under these maps, so scene
// rasters, volumes, targets, and the signal descriptor transform jointly.

namespace detail {

// (H, W) plane transform; odd rotations swap the output dims. The output
// pixel (oy, ox) pulls from the source via the inverse map.
inline void d4_plane(const float *src, int h, int w, int k, float *dst) {
    const int rot = k % 4;
    const bool flip = k >= 4;
    const int oh = (rot % 2 == 0) ? h : w;
    const int ow = (rot % 2 == 0) ? w : h;
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
            const int x = flip ? (ow - 1 - ox) : ox;
            const int y = oy;
            int sy = 0, sx = 0;
            switch (rot) {
            case 0:
                sy = y;
                sx = x;
                break;
            case 1:
                sy = x;
                sx = w - 1 - y;
                break;
            case 2:
                sy = h - 1 - y;
                sx = w - 1 - x;
                break;
            case 3:
                sy = h - 1 - x;
                sx = y;
                break;
            }
            dst[int64_t(oy) * ow + ox] = src[int64_t(sy) * w + sx];
        }
}

} // namespace detail

// x (N, C, H, W) -> transformed tensor (constant, no graph).
inline Tensor d4_transform_nchw(const Tensor &x, int k) {
    const Shape &s = x.shape();
    if (s.size() != 4)
        throw ContractError("d4_transform_nchw: need rank 4, got " + shape_str(s));
    const int n = s[0], c = s[1], h = s[2], w = s[3];
    const int oh = (k % 2 == 0) ? h : w;
    const int ow = (k % 2 == 0) ? w : h;
    Tensor out = Tensor::zeros({n, c, oh, ow});
    for (int nc = 0; nc < n * c; ++nc)
        detail::d4_plane(x.value().data() + int64_t(nc) * h * w, h, w, k,
                         out.value().data() + int64_t(nc) * oh * ow);
    return out;
}

// vol (N, C, D, H, W): the transform acts on each (H, W) layer.
inline Tensor d4_transform_ncdhw(const Tensor &x, int k) {
    const Shape &s = x.shape();
    if (s.size() != 5)
        throw ContractError("d4_transform_ncdhw: need rank 5, got " + shape_str(s));
    const int n = s[0], c = s[1], d = s[2], h = s[3], w = s[4];
    const int oh = (k % 2 == 0) ? h : w;
    const int ow = (k % 2 == 0) ? w : h;
    Tensor out = Tensor::zeros({n, c, d, oh, ow});
    for (int plane = 0; plane < n * c * d; ++plane)
        detail::d4_plane(x.value().data() + int64_t(plane) * h * w, h, w, k,
                         out.value().data() + int64_t(plane) * oh * ow);
    return out;
}

// Normalized (x, y) point transform matching d4_plane (forward map).
inline std::pair<double, double> d4_point(double x, double y, int k) {
    const int rot = k % 4;
    const bool flip = k >= 4;
    double rx = x, ry = y;
    switch (rot) {
    case 0:
        break;
    case 1:
        rx = y;
        ry = 1.0 - x;
        break;
    case 2:
        rx = 1.0 - x;
        ry = 1.0 - y;
        break;
    case 3:
        rx = 1.0 - y;
        ry = x;
        break;
    }
    if (flip)
        rx = 1.0 - rx;
    return {rx, ry};
}

inline RFSignalDescriptor d4_transform_descriptor(const RFSignalDescriptor &d, int k) {
    RFSignalDescriptor out = d;
    auto [x0, y0] = d4_point(d.tx_bbox[0], d.tx_bbox[1], k);
    auto [x1, y1] = d4_point(d.tx_bbox[2], d.tx_bbox[3], k);
    out.tx_bbox = {std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1)};
    for (int slot = 0; slot < d.wall_slots; ++slot) {
        const size_t o = size_t(slot) * 4;
        if (d.wall_params[o] == 0.0 && d.wall_params[o + 1] == 0.0 &&
            d.wall_params[o + 2] == 0.0 && d.wall_params[o + 3] == 0.0)
            continue; // padding slot
        auto [ax, ay] = d4_point(d.wall_params[o], d.wall_params[o + 1], k);
        auto [bx, by] = d4_point(d.wall_params[o + 2], d.wall_params[o + 3], k);
        out.wall_params[o] = ax;
        out.wall_params[o + 1] = ay;
        out.wall_params[o + 2] = bx;
        out.wall_params[o + 3] = by;
    }
    return out;
}

} // namespace rfdiff
