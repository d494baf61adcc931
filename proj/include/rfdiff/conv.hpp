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

#include "rfdiff/ops.hpp"

namespace rfdiff {

namespace detail {

// Reused per-thread im2col buffers; slot 0 serves forwards, slots 1-2 the
// backward closures (never live at the same time on one thread).
inline std::vector<float> &conv_scratch(int slot, size_t n) {
    thread_local std::vector<float> bufs[3];
    if (bufs[slot].size() < n)
        bufs[slot].resize(n);
    return bufs[slot];
}

// x (C, H, W) -> cols (C*kh*kw, Ho*Wo), zero padding.
inline void im2col2d(const float *x, int C, int H, int W, int kh, int kw, int stride, int pad,
                     int Ho, int Wo, float *cols) {
    for (int c = 0; c < C; ++c)
        for (int ki = 0; ki < kh; ++ki)
            for (int kj = 0; kj < kw; ++kj) {
                const int64_t row = (int64_t(c) * kh + ki) * kw + kj;
                float *out = cols + row * int64_t(Ho) * Wo;
                for (int oy = 0; oy < Ho; ++oy) {
                    const int iy = oy * stride + ki - pad;
                    float *orow = out + int64_t(oy) * Wo;
                    if (iy < 0 || iy >= H) {
                        std::fill(orow, orow + Wo, 0.0f);
                        continue;
                    }
                    const float *src = x + (int64_t(c) * H + iy) * W;
                    for (int ox = 0; ox < Wo; ++ox) {
                        const int ix = ox * stride + kj - pad;
                        orow[ox] = (ix >= 0 && ix < W) ? src[ix] : 0.0f;
                    }
                }
            }
}

inline void col2im2d_add(const float *cols, int C, int H, int W, int kh, int kw, int stride,
                         int pad, int Ho, int Wo, float *x) {
    for (int c = 0; c < C; ++c)
        for (int ki = 0; ki < kh; ++ki)
            for (int kj = 0; kj < kw; ++kj) {
                const int64_t row = (int64_t(c) * kh + ki) * kw + kj;
                const float *in = cols + row * int64_t(Ho) * Wo;
                for (int oy = 0; oy < Ho; ++oy) {
                    const int iy = oy * stride + ki - pad;
                    if (iy < 0 || iy >= H)
                        continue;
                    float *dst = x + (int64_t(c) * H + iy) * W;
                    const float *irow = in + int64_t(oy) * Wo;
                    for (int ox = 0; ox < Wo; ++ox) {
                        const int ix = ox * stride + kj - pad;
                        if (ix >= 0 && ix < W)
                            dst[ix] += irow[ox];
                    }
                }
            }
}

// x (C, D, H, W) -> cols (C*kd*kh*kw, Do*Ho*Wo).
inline void im2col3d(const float *x, int C, int D, int H, int W, int kd, int kh, int kw,
                     int stride, int pad, int Do, int Ho, int Wo, float *cols) {
    const int64_t plane = int64_t(Ho) * Wo;
    for (int c = 0; c < C; ++c)
        for (int kz = 0; kz < kd; ++kz)
            for (int ki = 0; ki < kh; ++ki)
                for (int kj = 0; kj < kw; ++kj) {
                    const int64_t row = ((int64_t(c) * kd + kz) * kh + ki) * kw + kj;
                    float *out = cols + row * int64_t(Do) * plane;
                    for (int oz = 0; oz < Do; ++oz) {
                        const int iz = oz * stride + kz - pad;
                        for (int oy = 0; oy < Ho; ++oy) {
                            const int iy = oy * stride + ki - pad;
                            float *orow = out + int64_t(oz) * plane + int64_t(oy) * Wo;
                            if (iz < 0 || iz >= D || iy < 0 || iy >= H) {
                                std::fill(orow, orow + Wo, 0.0f);
                                continue;
                            }
                            const float *src = x + ((int64_t(c) * D + iz) * H + iy) * W;
                            for (int ox = 0; ox < Wo; ++ox) {
                                const int ix = ox * stride + kj - pad;
                                orow[ox] = (ix >= 0 && ix < W) ? src[ix] : 0.0f;
                            }
                        }
                    }
                }
}

inline void col2im3d_add(const float *cols, int C, int D, int H, int W, int kd, int kh, int kw,
                         int stride, int pad, int Do, int Ho, int Wo, float *x) {
    const int64_t plane = int64_t(Ho) * Wo;
    for (int c = 0; c < C; ++c)
        for (int kz = 0; kz < kd; ++kz)
            for (int ki = 0; ki < kh; ++ki)
                for (int kj = 0; kj < kw; ++kj) {
                    const int64_t row = ((int64_t(c) * kd + kz) * kh + ki) * kw + kj;
                    const float *in = cols + row * int64_t(Do) * plane;
                    for (int oz = 0; oz < Do; ++oz) {
                        const int iz = oz * stride + kz - pad;
                        if (iz < 0 || iz >= D)
                            continue;
                        for (int oy = 0; oy < Ho; ++oy) {
                            const int iy = oy * stride + ki - pad;
                            if (iy < 0 || iy >= H)
                                continue;
                            float *dst = x + ((int64_t(c) * D + iz) * H + iy) * W;
                            const float *irow = in + int64_t(oz) * plane + int64_t(oy) * Wo;
                            for (int ox = 0; ox < Wo; ++ox) {
                                const int ix = ox * stride + kj - pad;
                                if (ix >= 0 && ix < W)
                                    dst[ix] += irow[ox];
                            }
                        }
                    }
                }
}

} // namespace detail

// ============================================================================
// conv2d: x (N, Cin, H, W), w (Cout, Cin, kh, kw), optional bias (Cout)
// ============================================================================

inline Tensor conv2d(const Tensor &x, const Tensor &w, const Tensor &bias, int stride = 1,
                     int pad = 0) {
    const Shape &xs = x.shape(), &ws = w.shape();
    if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[1])
        throw ContractError("conv2d: x " + shape_str(xs) + " vs w " + shape_str(ws));
    const int N = xs[0], Cin = xs[1], H = xs[2], W = xs[3];
    const int Cout = ws[0], kh = ws[2], kw = ws[3];
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    if (Ho <= 0 || Wo <= 0)
        throw ContractError("conv2d: empty output for x " + shape_str(xs) + " w " +
                            shape_str(ws));
    if (bias.defined() && bias.shape() != Shape{Cout})
        throw ContractError("conv2d: bias shape " + shape_str(bias.shape()));

    const int64_t krows = int64_t(Cin) * kh * kw;
    const int64_t opix = int64_t(Ho) * Wo;
    auto &cols = detail::conv_scratch(0, size_t(krows * opix));
    std::vector<float> out(size_t(N) * Cout * opix);
    for (int n = 0; n < N; ++n) {
        detail::im2col2d(x.value().data() + int64_t(n) * Cin * H * W, Cin, H, W, kh, kw, stride,
                         pad, Ho, Wo, cols.data());
        gemm_nn(w.value().data(), cols.data(), out.data() + int64_t(n) * Cout * opix, Cout,
                int(krows), int(opix));
    }
    if (bias.defined())
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < Cout; ++c) {
                float *dst = out.data() + (int64_t(n) * Cout + c) * opix;
                const float bv = bias.value()[size_t(c)];
                for (int64_t i = 0; i < opix; ++i)
                    dst[i] += bv;
            }

    auto xn = x.node(), wn = w.node();
    auto bn = bias.defined() ? bias.node() : nullptr;
    std::vector<Tensor> parents = {x, w};
    if (bias.defined())
        parents.push_back(bias);
    return detail::make_node(
        {N, Cout, Ho, Wo}, std::move(out), "conv2d", parents,
        [xn, wn, bn, N, Cin, H, W, Cout, kh, kw, stride, pad, Ho, Wo, krows, opix](Node &self) {
            auto &cols = detail::conv_scratch(1, size_t(krows * opix));
            auto &dcols = detail::conv_scratch(2, size_t(krows * opix));
            for (int n = 0; n < N; ++n) {
                const float *dy = self.grad.data() + int64_t(n) * Cout * opix;
                if (wn->requires_grad) {
                    wn->ensure_grad();
                    detail::im2col2d(xn->value.data() + int64_t(n) * Cin * H * W, Cin, H, W, kh,
                                     kw, stride, pad, Ho, Wo, cols.data());
                    gemm_nt(dy, cols.data(), wn->grad.data(), Cout, int(opix), int(krows), true);
                }
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    gemm_tn(wn->value.data(), dy, dcols.data(), int(krows), Cout, int(opix));
                    detail::col2im2d_add(dcols.data(), Cin, H, W, kh, kw, stride, pad, Ho, Wo,
                                         xn->grad.data() + int64_t(n) * Cin * H * W);
                }
                if (bn && bn->requires_grad) {
                    bn->ensure_grad();
                    for (int c = 0; c < Cout; ++c) {
                        double acc = 0.0;
                        const float *g = dy + int64_t(c) * opix;
                        for (int64_t i = 0; i < opix; ++i)
                            acc += g[i];
                        bn->grad[size_t(c)] += float(acc);
                    }
                }
            }
        });
}

// ============================================================================
// conv_transpose2d: x (N, Cin, H, W), w (Cin, Cout, kh, kw); adjoint of
// conv2d with the same stride, zero padding.
// ============================================================================

inline Tensor conv_transpose2d(const Tensor &x, const Tensor &w, const Tensor &bias,
                               int stride = 2) {
    const Shape &xs = x.shape(), &ws = w.shape();
    if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[0])
        throw ContractError("conv_transpose2d: x " + shape_str(xs) + " vs w " + shape_str(ws));
    const int N = xs[0], Cin = xs[1], H = xs[2], W = xs[3];
    const int Cout = ws[1], kh = ws[2], kw = ws[3];
    const int Ho = (H - 1) * stride + kh;
    const int Wo = (W - 1) * stride + kw;
    if (bias.defined() && bias.shape() != Shape{Cout})
        throw ContractError("conv_transpose2d: bias shape " + shape_str(bias.shape()));

    const int64_t krows = int64_t(Cout) * kh * kw;
    const int64_t ipix = int64_t(H) * W;
    auto &cols = detail::conv_scratch(0, size_t(krows * ipix));
    std::vector<float> out(size_t(N) * Cout * Ho * Wo, 0.0f);
    for (int n = 0; n < N; ++n) {
        // cols = w^T (Cout*kh*kw, Cin) x x_n (Cin, H*W)
        gemm_tn(w.value().data(), x.value().data() + int64_t(n) * Cin * ipix, cols.data(),
                int(krows), Cin, int(ipix));
        detail::col2im2d_add(cols.data(), Cout, Ho, Wo, kh, kw, stride, 0, H, W,
                             out.data() + int64_t(n) * Cout * Ho * Wo);
    }
    if (bias.defined())
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < Cout; ++c) {
                float *dst = out.data() + (int64_t(n) * Cout + c) * Ho * Wo;
                const float bv = bias.value()[size_t(c)];
                for (int64_t i = 0; i < int64_t(Ho) * Wo; ++i)
                    dst[i] += bv;
            }

    auto xn = x.node(), wn = w.node();
    auto bn = bias.defined() ? bias.node() : nullptr;
    std::vector<Tensor> parents = {x, w};
    if (bias.defined())
        parents.push_back(bias);
    return detail::make_node(
        {N, Cout, Ho, Wo}, std::move(out), "conv_transpose2d", parents,
        [xn, wn, bn, N, Cin, H, W, Cout, kh, kw, stride, Ho, Wo, krows, ipix](Node &self) {
            auto &dcols = detail::conv_scratch(1, size_t(krows * ipix));
            for (int n = 0; n < N; ++n) {
                const float *dy = self.grad.data() + int64_t(n) * Cout * Ho * Wo;
                // dcols = im2col(dy) with the conv_transpose geometry
                detail::im2col2d(dy, Cout, Ho, Wo, kh, kw, stride, 0, H, W, dcols.data());
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    // dX (Cin, H*W) = w (Cin, Cout*kh*kw) x dcols
                    gemm_nn(wn->value.data(), dcols.data(),
                            xn->grad.data() + int64_t(n) * Cin * ipix, Cin, int(krows), int(ipix),
                            true);
                }
                if (wn->requires_grad) {
                    wn->ensure_grad();
                    // dW (Cin, Cout*kh*kw) = x_n (Cin, H*W) x dcols^T
                    gemm_nt(xn->value.data() + int64_t(n) * Cin * ipix, dcols.data(),
                            wn->grad.data(), Cin, int(ipix), int(krows), true);
                }
                if (bn && bn->requires_grad) {
                    bn->ensure_grad();
                    for (int c = 0; c < Cout; ++c) {
                        double acc = 0.0;
                        const float *g = dy + int64_t(c) * Ho * Wo;
                        for (int64_t i = 0; i < int64_t(Ho) * Wo; ++i)
                            acc += g[i];
                        bn->grad[size_t(c)] += float(acc);
                    }
                }
            }
        });
}

// ============================================================================
// conv3d: x (N, Cin, D, H, W), w (Cout, Cin, kd, kh, kw)
// ============================================================================

inline Tensor conv3d(const Tensor &x, const Tensor &w, const Tensor &bias, int stride = 1,
                     int pad = 0) {
    const Shape &xs = x.shape(), &ws = w.shape();
    if (xs.size() != 5 || ws.size() != 5 || xs[1] != ws[1])
        throw ContractError("conv3d: x " + shape_str(xs) + " vs w " + shape_str(ws));
    const int N = xs[0], Cin = xs[1], D = xs[2], H = xs[3], W = xs[4];
    const int Cout = ws[0], kd = ws[2], kh = ws[3], kw = ws[4];
    const int Do = (D + 2 * pad - kd) / stride + 1;
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    if (Do <= 0 || Ho <= 0 || Wo <= 0)
        throw ContractError("conv3d: empty output for x " + shape_str(xs));
    if (bias.defined() && bias.shape() != Shape{Cout})
        throw ContractError("conv3d: bias shape " + shape_str(bias.shape()));

    const int64_t krows = int64_t(Cin) * kd * kh * kw;
    const int64_t opix = int64_t(Do) * Ho * Wo;
    const int64_t ivox = int64_t(D) * H * W;
    auto &cols = detail::conv_scratch(0, size_t(krows * opix));
    std::vector<float> out(size_t(N) * Cout * opix);
    for (int n = 0; n < N; ++n) {
        detail::im2col3d(x.value().data() + int64_t(n) * Cin * ivox, Cin, D, H, W, kd, kh, kw,
                         stride, pad, Do, Ho, Wo, cols.data());
        gemm_nn(w.value().data(), cols.data(), out.data() + int64_t(n) * Cout * opix, Cout,
                int(krows), int(opix));
    }
    if (bias.defined())
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < Cout; ++c) {
                float *dst = out.data() + (int64_t(n) * Cout + c) * opix;
                const float bv = bias.value()[size_t(c)];
                for (int64_t i = 0; i < opix; ++i)
                    dst[i] += bv;
            }

    auto xn = x.node(), wn = w.node();
    auto bn = bias.defined() ? bias.node() : nullptr;
    std::vector<Tensor> parents = {x, w};
    if (bias.defined())
        parents.push_back(bias);
    return detail::make_node(
        {N, Cout, Do, Ho, Wo}, std::move(out), "conv3d", parents,
        [xn, wn, bn, N, Cin, D, H, W, Cout, kd, kh, kw, stride, pad, Do, Ho, Wo, krows, opix,
         ivox](Node &self) {
            auto &cols = detail::conv_scratch(1, size_t(krows * opix));
            auto &dcols = detail::conv_scratch(2, size_t(krows * opix));
            for (int n = 0; n < N; ++n) {
                const float *dy = self.grad.data() + int64_t(n) * Cout * opix;
                if (wn->requires_grad) {
                    wn->ensure_grad();
                    detail::im2col3d(xn->value.data() + int64_t(n) * Cin * ivox, Cin, D, H, W, kd,
                                     kh, kw, stride, pad, Do, Ho, Wo, cols.data());
                    gemm_nt(dy, cols.data(), wn->grad.data(), Cout, int(opix), int(krows), true);
                }
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    gemm_tn(wn->value.data(), dy, dcols.data(), int(krows), Cout, int(opix));
                    detail::col2im3d_add(dcols.data(), Cin, D, H, W, kd, kh, kw, stride, pad, Do,
                                         Ho, Wo, xn->grad.data() + int64_t(n) * Cin * ivox);
                }
                if (bn && bn->requires_grad) {
                    bn->ensure_grad();
                    for (int c = 0; c < Cout; ++c) {
                        double acc = 0.0;
                        const float *g = dy + int64_t(c) * opix;
                        for (int64_t i = 0; i < opix; ++i)
                            acc += g[i];
                        bn->grad[size_t(c)] += float(acc);
                    }
                }
            }
        });
}

// ============================================================================
// Resampling
// ============================================================================

inline Tensor upsample_nearest2d(const Tensor &x, int factor) {
    const Shape &s = x.shape();
    if (s.size() != 4 || factor < 1)
        throw ContractError("upsample_nearest2d: x " + shape_str(s));
    const int N = s[0], C = s[1], H = s[2], W = s[3];
    const int Ho = H * factor, Wo = W * factor;
    std::vector<float> out(size_t(N) * C * Ho * Wo);
    for (int nc = 0; nc < N * C; ++nc) {
        const float *src = x.value().data() + int64_t(nc) * H * W;
        float *dst = out.data() + int64_t(nc) * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
            const float *srow = src + int64_t(oy / factor) * W;
            float *drow = dst + int64_t(oy) * Wo;
            for (int ox = 0; ox < Wo; ++ox)
                drow[ox] = srow[ox / factor];
        }
    }
    auto xn = x.node();
    return detail::make_node({N, C, Ho, Wo}, std::move(out), "upsample_nearest2d", {x},
                             [xn, N, C, H, W, factor, Ho, Wo](Node &self) {
                                 xn->ensure_grad();
                                 for (int nc = 0; nc < N * C; ++nc) {
                                     float *dst = xn->grad.data() + int64_t(nc) * H * W;
                                     const float *g = self.grad.data() + int64_t(nc) * Ho * Wo;
                                     for (int oy = 0; oy < Ho; ++oy)
                                         for (int ox = 0; ox < Wo; ++ox)
                                             dst[int64_t(oy / factor) * W + ox / factor] +=
                                                 g[int64_t(oy) * Wo + ox];
                                 }
                             });
}

// Nearest-neighbor resize to explicit output dims (the factor-2 upsample is
// the special case of a doubled grid).
inline Tensor resize_nearest2d(const Tensor &x, int oh, int ow) {
    const Shape &s = x.shape();
    if (s.size() != 4 || oh < 1 || ow < 1)
        throw ContractError("resize_nearest2d: x " + shape_str(s));
    const int N = s[0], C = s[1], H = s[2], W = s[3];
    std::vector<int> sy(size_t(oh), 0), sx(size_t(ow), 0);
    for (int o = 0; o < oh; ++o)
        sy[size_t(o)] = std::min(H - 1, int((o + 0.5) * double(H) / oh));
    for (int o = 0; o < ow; ++o)
        sx[size_t(o)] = std::min(W - 1, int((o + 0.5) * double(W) / ow));
    std::vector<float> out(size_t(N) * C * oh * ow);
    for (int nc = 0; nc < N * C; ++nc) {
        const float *src = x.value().data() + int64_t(nc) * H * W;
        float *dst = out.data() + int64_t(nc) * oh * ow;
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                dst[int64_t(oy) * ow + ox] = src[int64_t(sy[size_t(oy)]) * W + sx[size_t(ox)]];
    }
    auto xn = x.node();
    return detail::make_node({N, C, oh, ow}, std::move(out), "resize_nearest2d", {x},
                             [xn, N, C, H, W, oh, ow, sy, sx](Node &self) {
                                 xn->ensure_grad();
                                 for (int nc = 0; nc < N * C; ++nc) {
                                     float *dst = xn->grad.data() + int64_t(nc) * H * W;
                                     const float *g = self.grad.data() + int64_t(nc) * oh * ow;
                                     for (int oy = 0; oy < oh; ++oy)
                                         for (int ox = 0; ox < ow; ++ox)
                                             dst[int64_t(sy[size_t(oy)]) * W + sx[size_t(ox)]] +=
                                                 g[int64_t(oy) * ow + ox];
                                 }
                             });
}

inline Tensor avg_pool2d(const Tensor &x, int factor) {
    const Shape &s = x.shape();
    if (s.size() != 4 || factor < 1 || s[2] % factor != 0 || s[3] % factor != 0)
        throw ContractError("avg_pool2d: x " + shape_str(s) + " factor " +
                            std::to_string(factor));
    const int N = s[0], C = s[1], H = s[2], W = s[3];
    const int Ho = H / factor, Wo = W / factor;
    const float inv = 1.0f / float(factor * factor);
    std::vector<float> out(size_t(N) * C * Ho * Wo, 0.0f);
    for (int nc = 0; nc < N * C; ++nc) {
        const float *src = x.value().data() + int64_t(nc) * H * W;
        float *dst = out.data() + int64_t(nc) * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy)
            for (int ox = 0; ox < Wo; ++ox) {
                double acc = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        acc += src[int64_t(oy * factor + dy) * W + ox * factor + dx];
                dst[int64_t(oy) * Wo + ox] = float(acc) * inv;
            }
    }
    auto xn = x.node();
    return detail::make_node({N, C, Ho, Wo}, std::move(out), "avg_pool2d", {x},
                             [xn, N, C, H, W, factor, Ho, Wo, inv](Node &self) {
                                 xn->ensure_grad();
                                 for (int nc = 0; nc < N * C; ++nc) {
                                     float *dst = xn->grad.data() + int64_t(nc) * H * W;
                                     const float *g = self.grad.data() + int64_t(nc) * Ho * Wo;
                                     for (int oy = 0; oy < Ho; ++oy)
                                         for (int ox = 0; ox < Wo; ++ox) {
                                             const float gv = g[int64_t(oy) * Wo + ox] * inv;
                                             for (int dy = 0; dy < factor; ++dy)
                                                 for (int dx = 0; dx < factor; ++dx)
                                                     dst[int64_t(oy * factor + dy) * W +
                                                         ox * factor + dx] += gv;
                                         }
                                 }
                             });
}

// Trilinear resampling of x (N, C, D, H, W) to (N, C, Dp, Hp, Wp).
inline Tensor interp3d(const Tensor &x, int Dp, int Hp, int Wp) {
    const Shape &s = x.shape();
    if (s.size() != 5 || Dp < 1 || Hp < 1 || Wp < 1)
        throw ContractError("interp3d: x " + shape_str(s));
    const int N = s[0], C = s[1], D = s[2], H = s[3], W = s[4];

    struct Axis {
        int i0, i1;
        float w1;
    };
    auto build = [](int in, int out) {
        std::vector<Axis> ax(size_t(out), Axis{});
        for (int o = 0; o < out; ++o) {
            const double c = (o + 0.5) * double(in) / out - 0.5;
            const double cl = std::clamp(c, 0.0, double(in - 1));
            const int i0 = int(std::floor(cl));
            const int i1 = std::min(i0 + 1, in - 1);
            ax[size_t(o)] = {i0, i1, float(cl - i0)};
        }
        return ax;
    };
    const auto az = build(D, Dp), ay = build(H, Hp), axi = build(W, Wp);

    std::vector<float> out(size_t(N) * C * Dp * Hp * Wp);
    for (int nc = 0; nc < N * C; ++nc) {
        const float *src = x.value().data() + int64_t(nc) * D * H * W;
        float *dst = out.data() + int64_t(nc) * Dp * Hp * Wp;
        for (int oz = 0; oz < Dp; ++oz)
            for (int oy = 0; oy < Hp; ++oy)
                for (int ox = 0; ox < Wp; ++ox) {
                    const auto &Z = az[size_t(oz)];
                    const auto &Y = ay[size_t(oy)];
                    const auto &X = axi[size_t(ox)];
                    auto at = [&](int z, int y, int xx) {
                        return src[(int64_t(z) * H + y) * W + xx];
                    };
                    const float v =
                        (1 - Z.w1) * ((1 - Y.w1) * ((1 - X.w1) * at(Z.i0, Y.i0, X.i0) +
                                                    X.w1 * at(Z.i0, Y.i0, X.i1)) +
                                      Y.w1 * ((1 - X.w1) * at(Z.i0, Y.i1, X.i0) +
                                              X.w1 * at(Z.i0, Y.i1, X.i1))) +
                        Z.w1 * ((1 - Y.w1) * ((1 - X.w1) * at(Z.i1, Y.i0, X.i0) +
                                              X.w1 * at(Z.i1, Y.i0, X.i1)) +
                                Y.w1 * ((1 - X.w1) * at(Z.i1, Y.i1, X.i0) +
                                        X.w1 * at(Z.i1, Y.i1, X.i1)));
                    dst[(int64_t(oz) * Hp + oy) * Wp + ox] = v;
                }
    }
    auto xn = x.node();
    return detail::make_node(
        {N, C, Dp, Hp, Wp}, std::move(out), "interp3d", {x},
        [xn, N, C, D, H, W, Dp, Hp, Wp, az, ay, axi](Node &self) {
            xn->ensure_grad();
            for (int nc = 0; nc < N * C; ++nc) {
                float *dst = xn->grad.data() + int64_t(nc) * D * H * W;
                const float *g = self.grad.data() + int64_t(nc) * Dp * Hp * Wp;
                for (int oz = 0; oz < Dp; ++oz)
                    for (int oy = 0; oy < Hp; ++oy)
                        for (int ox = 0; ox < Wp; ++ox) {
                            const auto &Z = az[size_t(oz)];
                            const auto &Y = ay[size_t(oy)];
                            const auto &X = axi[size_t(ox)];
                            const float gv = g[(int64_t(oz) * Hp + oy) * Wp + ox];
                            auto addg = [&](int z, int y, int xx, float w) {
                                dst[(int64_t(z) * H + y) * W + xx] += gv * w;
                            };
                            addg(Z.i0, Y.i0, X.i0, (1 - Z.w1) * (1 - Y.w1) * (1 - X.w1));
                            addg(Z.i0, Y.i0, X.i1, (1 - Z.w1) * (1 - Y.w1) * X.w1);
                            addg(Z.i0, Y.i1, X.i0, (1 - Z.w1) * Y.w1 * (1 - X.w1));
                            addg(Z.i0, Y.i1, X.i1, (1 - Z.w1) * Y.w1 * X.w1);
                            addg(Z.i1, Y.i0, X.i0, Z.w1 * (1 - Y.w1) * (1 - X.w1));
                            addg(Z.i1, Y.i0, X.i1, Z.w1 * (1 - Y.w1) * X.w1);
                            addg(Z.i1, Y.i1, X.i0, Z.w1 * Y.w1 * (1 - X.w1));
                            addg(Z.i1, Y.i1, X.i1, Z.w1 * Y.w1 * X.w1);
                        }
            }
        });
}

// Replicate padding along one axis (used by the temporal convolution so
// constant sequences stay constant).
inline Tensor pad_replicate(const Tensor &x, int axis, int before, int after) {
    const Shape &s = x.shape();
    if (axis < 0 || size_t(axis) >= s.size() || before < 0 || after < 0)
        throw ContractError("pad_replicate: bad axis/amount for " + shape_str(s));
    Shape out_shape = s;
    out_shape[size_t(axis)] += before + after;
    int64_t outer = 1, inner = 1;
    const int ai = s[size_t(axis)];
    for (size_t d = 0; d < size_t(axis); ++d)
        outer *= s[d];
    for (size_t d = size_t(axis) + 1; d < s.size(); ++d)
        inner *= s[d];
    const int ao = ai + before + after;

    std::vector<float> out(size_t(outer) * ao * inner);
    for (int64_t r = 0; r < outer; ++r)
        for (int o = 0; o < ao; ++o) {
            const int src = std::clamp(o - before, 0, ai - 1);
            std::copy(x.value().begin() + (r * ai + src) * inner,
                      x.value().begin() + (r * ai + src + 1) * inner,
                      out.begin() + (r * ao + o) * inner);
        }
    auto xn = x.node();
    return detail::make_node(out_shape, std::move(out), "pad_replicate", {x},
                             [xn, outer, inner, ai, ao, before](Node &self) {
                                 xn->ensure_grad();
                                 for (int64_t r = 0; r < outer; ++r)
                                     for (int o = 0; o < ao; ++o) {
                                         const int src = std::clamp(o - before, 0, ai - 1);
                                         const float *g = self.grad.data() + (r * ao + o) * inner;
                                         float *dst = xn->grad.data() + (r * ai + src) * inner;
                                         for (int64_t i = 0; i < inner; ++i)
                                             dst[i] += g[i];
                                     }
                             });
}

} // namespace rfdiff
