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

#include <cmath>
#include <numeric>

#include "rfdiff/gemm.hpp"
#include "rfdiff/rng.hpp"
#include "rfdiff/tensor.hpp"

namespace rfdiff {

namespace detail {

inline Tensor make_node(Shape shape, std::vector<float> value, const char *op,
                        std::vector<Tensor> parents, std::function<void(Node &)> backprop) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->op = op;
    bool need = false;
    if (grad_mode_ref())
        for (const auto &p : parents)
            need = need || p.node()->requires_grad;
    if (need) {
        n->requires_grad = true;
        for (const auto &p : parents)
            n->parents.push_back(p.node());
        n->backprop = std::move(backprop);
    }
    return Tensor(n);
}

inline void check_same_shape(const char *op, const Tensor &a, const Tensor &b) {
    if (a.shape() != b.shape())
        throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                            " vs " + shape_str(b.shape()));
}

inline void accum(Node &dst, const std::vector<float> &g) {
    dst.ensure_grad();
    for (size_t i = 0; i < g.size(); ++i)
        dst.grad[i] += g[i];
}

} // namespace detail

inline Tensor randn(const Shape &shape, Rng &rng) {
    Tensor t = Tensor::zeros(shape);
    for (auto &v : t.value())
        v = rng.normal_f();
    return t;
}

// ============================================================================
// Elementwise
// ============================================================================

inline Tensor add(const Tensor &a, const Tensor &b) {
    detail::check_same_shape("add", a, b);
    std::vector<float> out(a.value());
    const auto &bv = b.value();
    for (size_t i = 0; i < out.size(); ++i)
        out[i] += bv[i];
    auto an = a.node(), bn = b.node();
    return detail::make_node(a.shape(), std::move(out), "add", {a, b}, [an, bn](Node &self) {
        if (an->requires_grad)
            detail::accum(*an, self.grad);
        if (bn->requires_grad)
            detail::accum(*bn, self.grad);
    });
}

inline Tensor sub(const Tensor &a, const Tensor &b) {
    detail::check_same_shape("sub", a, b);
    std::vector<float> out(a.value());
    const auto &bv = b.value();
    for (size_t i = 0; i < out.size(); ++i)
        out[i] -= bv[i];
    auto an = a.node(), bn = b.node();
    return detail::make_node(a.shape(), std::move(out), "sub", {a, b}, [an, bn](Node &self) {
        if (an->requires_grad)
            detail::accum(*an, self.grad);
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                bn->grad[i] -= self.grad[i];
        }
    });
}

inline Tensor mul(const Tensor &a, const Tensor &b) {
    detail::check_same_shape("mul", a, b);
    std::vector<float> out(a.value());
    const auto &bv = b.value();
    for (size_t i = 0; i < out.size(); ++i)
        out[i] *= bv[i];
    auto an = a.node(), bn = b.node();
    return detail::make_node(a.shape(), std::move(out), "mul", {a, b}, [an, bn](Node &self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                an->grad[i] += self.grad[i] * bn->value[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                bn->grad[i] += self.grad[i] * an->value[i];
        }
    });
}

inline Tensor scale(const Tensor &a, float s) {
    std::vector<float> out(a.value());
    for (auto &v : out)
        v *= s;
    auto an = a.node();
    return detail::make_node(a.shape(), std::move(out), "scale", {a}, [an, s](Node &self) {
        an->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * s;
    });
}

inline Tensor add_scalar(const Tensor &a, float s) {
    std::vector<float> out(a.value());
    for (auto &v : out)
        v += s;
    auto an = a.node();
    return detail::make_node(a.shape(), std::move(out), "add_scalar", {a}, [an](Node &self) {
        detail::accum(*an, self.grad);
    });
}

inline Tensor square(const Tensor &a) {
    std::vector<float> out(a.value());
    for (auto &v : out)
        v *= v;
    auto an = a.node();
    return detail::make_node(a.shape(), std::move(out), "square", {a}, [an](Node &self) {
        an->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * 2.0f * an->value[i];
    });
}

inline Tensor abs_op(const Tensor &a) {
    std::vector<float> out(a.value());
    for (auto &v : out)
        v = std::fabs(v);
    auto an = a.node();
    return detail::make_node(a.shape(), std::move(out), "abs", {a}, [an](Node &self) {
        an->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * (an->value[i] >= 0.0f ? 1.0f : -1.0f);
    });
}

inline Tensor silu(const Tensor &a) {
    std::vector<float> out(a.value());
    for (auto &v : out) {
        const float sig = 1.0f / (1.0f + std::exp(-v));
        v = v * sig;
    }
    auto an = a.node();
    return detail::make_node(a.shape(), std::move(out), "silu", {a}, [an](Node &self) {
        an->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
            const float x = an->value[i];
            const float sig = 1.0f / (1.0f + std::exp(-x));
            an->grad[i] += self.grad[i] * (sig * (1.0f + x * (1.0f - sig)));
        }
    });
}

inline Tensor tanh_op(const Tensor &a) {
    std::vector<float> out(a.value());
    for (auto &v : out)
        v = std::tanh(v);
    auto an = a.node();
    return detail::make_node(a.shape(), std::move(out), "tanh", {a}, [an](Node &self) {
        an->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * (1.0f - self.value[i] * self.value[i]);
    });
}

inline Tensor sigmoid(const Tensor &a) {
    std::vector<float> out(a.value());
    for (auto &v : out)
        v = 1.0f / (1.0f + std::exp(-v));
    auto an = a.node();
    return detail::make_node(a.shape(), std::move(out), "sigmoid", {a}, [an](Node &self) {
        an->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * self.value[i] * (1.0f - self.value[i]);
    });
}

// ============================================================================
// Reductions
// ============================================================================

inline Tensor sum_all(const Tensor &a) {
    double acc = 0.0;
    for (float v : a.value())
        acc += v;
    auto an = a.node();
    return detail::make_node({1}, {float(acc)}, "sum", {a}, [an](Node &self) {
        an->ensure_grad();
        const float g = self.grad[0];
        for (auto &gv : an->grad)
            gv += g;
    });
}

inline Tensor mean_all(const Tensor &a) {
    double acc = 0.0;
    for (float v : a.value())
        acc += v;
    const float inv = 1.0f / float(a.numel());
    auto an = a.node();
    return detail::make_node({1}, {float(acc * inv)}, "mean", {a}, [an, inv](Node &self) {
        an->ensure_grad();
        const float g = self.grad[0] * inv;
        for (auto &gv : an->grad)
            gv += g;
    });
}

// ============================================================================
// Shape ops
// ============================================================================

inline Tensor reshape(const Tensor &a, const Shape &shape) {
    if (shape_numel(shape) != a.numel())
        throw ContractError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                            shape_str(shape));
    auto an = a.node();
    return detail::make_node(shape, a.value(), "reshape", {a}, [an](Node &self) {
        detail::accum(*an, self.grad);
    });
}

namespace detail {

inline std::vector<int64_t> row_major_strides(const Shape &s) {
    std::vector<int64_t> st(s.size(), 1);
    for (int i = int(s.size()) - 2; i >= 0; --i)
        st[size_t(i)] = st[size_t(i) + 1] * s[size_t(i) + 1];
    return st;
}

} // namespace detail

inline Tensor permute(const Tensor &a, const std::vector<int> &axes) {
    const Shape &in = a.shape();
    if (axes.size() != in.size())
        throw ContractError("permute: axes rank " + std::to_string(axes.size()) +
                            " vs tensor rank " + std::to_string(in.size()));
    Shape out_shape(in.size());
    for (size_t i = 0; i < axes.size(); ++i)
        out_shape[i] = in[size_t(axes[i])];
    const auto in_strides = detail::row_major_strides(in);
    const auto out_strides = detail::row_major_strides(out_shape);
    const int64_t n = a.numel();
    const size_t rank = in.size();

    std::vector<float> out(size_t(n), 0.0f);
    const float *src = a.value().data();
    for (int64_t o = 0; o < n; ++o) {
        int64_t rem = o, src_idx = 0;
        for (size_t d = 0; d < rank; ++d) {
            const int64_t coord = rem / out_strides[d];
            rem %= out_strides[d];
            src_idx += coord * in_strides[size_t(axes[d])];
        }
        out[size_t(o)] = src[src_idx];
    }
    auto an = a.node();
    std::vector<int> axes_copy = axes;
    return detail::make_node(out_shape, std::move(out), "permute", {a},
                             [an, axes_copy, in_strides, out_strides, rank](Node &self) {
                                 an->ensure_grad();
                                 const int64_t n2 = self.numel();
                                 for (int64_t o = 0; o < n2; ++o) {
                                     int64_t rem = o, src_idx = 0;
                                     for (size_t d = 0; d < rank; ++d) {
                                         const int64_t coord = rem / out_strides[d];
                                         rem %= out_strides[d];
                                         src_idx += coord * in_strides[size_t(axes_copy[d])];
                                     }
                                     an->grad[size_t(src_idx)] += self.grad[size_t(o)];
                                 }
                             });
}

inline Tensor concat(const std::vector<Tensor> &parts, int axis) {
    if (parts.empty())
        throw ContractError("concat: no inputs");
    const Shape &s0 = parts[0].shape();
    const size_t rank = s0.size();
    if (axis < 0 || size_t(axis) >= rank)
        throw ContractError("concat: bad axis");
    Shape out_shape = s0;
    int axis_total = 0;
    for (const auto &p : parts) {
        const Shape &s = p.shape();
        if (s.size() != rank)
            throw ContractError("concat: rank mismatch");
        for (size_t d = 0; d < rank; ++d)
            if (d != size_t(axis) && s[d] != s0[d])
                throw ContractError("concat: shape mismatch " + shape_str(s) + " vs " +
                                    shape_str(s0));
        axis_total += s[size_t(axis)];
    }
    out_shape[size_t(axis)] = axis_total;

    int64_t outer = 1, inner = 1;
    for (size_t d = 0; d < size_t(axis); ++d)
        outer *= s0[d];
    for (size_t d = size_t(axis) + 1; d < rank; ++d)
        inner *= s0[d];

    std::vector<float> out(size_t(shape_numel(out_shape)));
    const int64_t out_row = int64_t(axis_total) * inner;
    int64_t offset = 0;
    for (const auto &p : parts) {
        const int64_t ai = p.shape()[size_t(axis)];
        const float *src = p.value().data();
        for (int64_t r = 0; r < outer; ++r)
            std::copy(src + r * ai * inner, src + (r + 1) * ai * inner,
                      out.begin() + r * out_row + offset);
        offset += ai * inner;
    }

    std::vector<Tensor> parents = parts;
    return detail::make_node(out_shape, std::move(out), "concat", parents,
                             [parents, axis, outer, inner, out_row](Node &self) {
                                 int64_t off = 0;
                                 for (const auto &p : parents) {
                                     const int64_t ai = p.shape()[size_t(axis)];
                                     if (p.node()->requires_grad) {
                                         p.node()->ensure_grad();
                                         float *dst = p.node()->grad.data();
                                         for (int64_t r = 0; r < outer; ++r) {
                                             const float *g = self.grad.data() + r * out_row + off;
                                             for (int64_t i = 0; i < ai * inner; ++i)
                                                 dst[r * ai * inner + i] += g[i];
                                         }
                                     }
                                     off += ai * inner;
                                 }
                             });
}

// v (S) broadcast to (1, S, H, W); gradient sums over the spatial plane.
inline Tensor broadcast_to_map(const Tensor &v, int h, int w) {
    if (v.shape().size() != 1)
        throw ContractError("broadcast_to_map: expected rank-1 input, got " +
                            shape_str(v.shape()));
    const int s = v.shape()[0];
    std::vector<float> out(size_t(s) * h * w);
    for (int c = 0; c < s; ++c)
        std::fill(out.begin() + int64_t(c) * h * w, out.begin() + int64_t(c + 1) * h * w,
                  v.value()[size_t(c)]);
    auto vn = v.node();
    return detail::make_node({1, s, h, w}, std::move(out), "broadcast_to_map", {v},
                             [vn, s, h, w](Node &self) {
                                 vn->ensure_grad();
                                 for (int c = 0; c < s; ++c) {
                                     double acc = 0.0;
                                     const float *g = self.grad.data() + int64_t(c) * h * w;
                                     for (int i = 0; i < h * w; ++i)
                                         acc += g[i];
                                     vn->grad[size_t(c)] += float(acc);
                                 }
                             });
}

// b (C) added per channel of x (N, C, spatial...).
inline Tensor add_channel_bias(const Tensor &x, const Tensor &b) {
    const Shape &s = x.shape();
    if (s.size() < 2 || b.shape().size() != 1 || b.shape()[0] != s[1])
        throw ContractError("add_channel_bias: x " + shape_str(s) + " vs bias " +
                            shape_str(b.shape()));
    const int n = s[0], c = s[1];
    int64_t inner = 1;
    for (size_t d = 2; d < s.size(); ++d)
        inner *= s[d];
    std::vector<float> out(x.value());
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) {
            const float bv = b.value()[size_t(ci)];
            float *dst = out.data() + (int64_t(ni) * c + ci) * inner;
            for (int64_t i = 0; i < inner; ++i)
                dst[i] += bv;
        }
    auto xn = x.node(), bn = b.node();
    return detail::make_node(s, std::move(out), "add_channel_bias", {x, b},
                             [xn, bn, n, c, inner](Node &self) {
                                 if (xn->requires_grad)
                                     detail::accum(*xn, self.grad);
                                 if (bn->requires_grad) {
                                     bn->ensure_grad();
                                     for (int ni = 0; ni < n; ++ni)
                                         for (int ci = 0; ci < c; ++ci) {
                                             double acc = 0.0;
                                             const float *g = self.grad.data() +
                                                              (int64_t(ni) * c + ci) * inner;
                                             for (int64_t i = 0; i < inner; ++i)
                                                 acc += g[i];
                                             bn->grad[size_t(ci)] += float(acc);
                                         }
                                 }
                             });
}

// ============================================================================
// Linear algebra
// ============================================================================

inline Tensor matmul(const Tensor &a, const Tensor &b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw ContractError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                            shape_str(b.shape()));
    const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<float> out(size_t(m) * n);
    gemm_nn(a.value().data(), b.value().data(), out.data(), m, k, n);
    auto an = a.node(), bn = b.node();
    return detail::make_node({m, n}, std::move(out), "matmul", {a, b},
                             [an, bn, m, k, n](Node &self) {
                                 if (an->requires_grad) {
                                     an->ensure_grad();
                                     gemm_nt(self.grad.data(), bn->value.data(), an->grad.data(),
                                             m, n, k, true);
                                 }
                                 if (bn->requires_grad) {
                                     bn->ensure_grad();
                                     gemm_tn(an->value.data(), self.grad.data(), bn->grad.data(),
                                             k, m, n, true);
                                 }
                             });
}

// x (..., K) * w (K, N) + b (N). Leading dims are flattened.
inline Tensor linear(const Tensor &x, const Tensor &w, const Tensor &b) {
    const Shape &xs = x.shape();
    if (xs.empty() || w.shape().size() != 2 || xs.back() != w.shape()[0])
        throw ContractError("linear: x " + shape_str(xs) + " vs w " + shape_str(w.shape()));
    const int k = w.shape()[0], n = w.shape()[1];
    if (b.defined() && (b.shape().size() != 1 || b.shape()[0] != n))
        throw ContractError("linear: bias " + shape_str(b.shape()) + " vs out width " +
                            std::to_string(n));
    const int m = int(x.numel() / k);
    std::vector<float> out(size_t(m) * n);
    gemm_nn(x.value().data(), w.value().data(), out.data(), m, k, n);
    if (b.defined())
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < n; ++c)
                out[size_t(r) * n + c] += b.value()[size_t(c)];
    Shape out_shape(xs.begin(), xs.end() - 1);
    out_shape.push_back(n);

    auto xn = x.node(), wn = w.node();
    auto bn = b.defined() ? b.node() : nullptr;
    std::vector<Tensor> parents = {x, w};
    if (b.defined())
        parents.push_back(b);
    return detail::make_node(out_shape, std::move(out), "linear", parents,
                             [xn, wn, bn, m, k, n](Node &self) {
                                 if (xn->requires_grad) {
                                     xn->ensure_grad();
                                     gemm_nt(self.grad.data(), wn->value.data(), xn->grad.data(),
                                             m, n, k, true);
                                 }
                                 if (wn->requires_grad) {
                                     wn->ensure_grad();
                                     gemm_tn(xn->value.data(), self.grad.data(), wn->grad.data(),
                                             k, m, n, true);
                                 }
                                 if (bn && bn->requires_grad) {
                                     bn->ensure_grad();
                                     for (int r = 0; r < m; ++r)
                                         for (int c = 0; c < n; ++c)
                                             bn->grad[size_t(c)] += self.grad[size_t(r) * n + c];
                                 }
                             });
}

// ============================================================================
// Softmax and attention
// ============================================================================

// Softmax over the last axis.
inline Tensor softmax(const Tensor &x) {
    const Shape &s = x.shape();
    if (s.empty())
        throw ContractError("softmax: scalar input");
    const int d = s.back();
    const int64_t rows = x.numel() / d;
    std::vector<float> out(x.value());
    for (int64_t r = 0; r < rows; ++r) {
        float *row = out.data() + r * d;
        float mx = row[0];
        for (int i = 1; i < d; ++i)
            mx = std::max(mx, row[i]);
        double sum = 0.0;
        for (int i = 0; i < d; ++i) {
            row[i] = std::exp(row[i] - mx);
            sum += row[i];
        }
        const float inv = float(1.0 / sum);
        for (int i = 0; i < d; ++i)
            row[i] *= inv;
    }
    auto xn = x.node();
    return detail::make_node(s, std::move(out), "softmax", {x}, [xn, d](Node &self) {
        xn->ensure_grad();
        const int64_t rows = self.numel() / d;
        for (int64_t r = 0; r < rows; ++r) {
            const float *y = self.value.data() + r * d;
            const float *dy = self.grad.data() + r * d;
            double dot = 0.0;
            for (int i = 0; i < d; ++i)
                dot += double(dy[i]) * y[i];
            float *dx = xn->grad.data() + r * d;
            for (int i = 0; i < d; ++i)
                dx[i] += (dy[i] - float(dot)) * y[i];
        }
    });
}

// Batched scaled dot-product attention.
// q (B, Tq, D), k (B, Tk, D), v (B, Tk, Dv) -> (B, Tq, Dv).
// The attention matrix is kept for the backward pass.
inline Tensor scaled_dot_attention(const Tensor &q, const Tensor &k, const Tensor &v) {
    const Shape &qs = q.shape(), &ks = k.shape(), &vs = v.shape();
    if (qs.size() != 3 || ks.size() != 3 || vs.size() != 3 || qs[0] != ks[0] || qs[0] != vs[0] ||
        qs[2] != ks[2] || ks[1] != vs[1])
        throw ContractError("scaled_dot_attention: q " + shape_str(qs) + " k " + shape_str(ks) +
                            " v " + shape_str(vs));
    const int B = qs[0], Tq = qs[1], D = qs[2], Tk = ks[1], Dv = vs[2];
    const float alpha = 1.0f / std::sqrt(float(D));

    auto attn = std::make_shared<std::vector<float>>(size_t(B) * Tq * Tk);
    std::vector<float> out(size_t(B) * Tq * Dv);
    for (int b = 0; b < B; ++b) {
        float *s = attn->data() + int64_t(b) * Tq * Tk;
        gemm_nt(q.value().data() + int64_t(b) * Tq * D, k.value().data() + int64_t(b) * Tk * D, s,
                Tq, D, Tk);
        for (int r = 0; r < Tq; ++r) {
            float *row = s + int64_t(r) * Tk;
            float mx = -1e30f;
            for (int i = 0; i < Tk; ++i) {
                row[i] *= alpha;
                mx = std::max(mx, row[i]);
            }
            double sum = 0.0;
            for (int i = 0; i < Tk; ++i) {
                row[i] = std::exp(row[i] - mx);
                sum += row[i];
            }
            const float inv = float(1.0 / sum);
            for (int i = 0; i < Tk; ++i)
                row[i] *= inv;
        }
        gemm_nn(s, v.value().data() + int64_t(b) * Tk * Dv, out.data() + int64_t(b) * Tq * Dv, Tq,
                Tk, Dv);
    }

    auto qn = q.node(), kn = k.node(), vn = v.node();
    return detail::make_node(
        {B, Tq, Dv}, std::move(out), "scaled_dot_attention", {q, k, v},
        [qn, kn, vn, attn, B, Tq, D, Tk, Dv, alpha](Node &self) {
            std::vector<float> d_attn(size_t(Tq) * Tk);
            std::vector<float> d_scores(size_t(Tq) * Tk);
            for (int b = 0; b < B; ++b) {
                const float *a = attn->data() + int64_t(b) * Tq * Tk;
                const float *dy = self.grad.data() + int64_t(b) * Tq * Dv;
                // dV = A^T dY
                if (vn->requires_grad) {
                    vn->ensure_grad();
                    gemm_tn(a, dy, vn->grad.data() + int64_t(b) * Tk * Dv, Tk, Tq, Dv, true);
                }
                // dA = dY V^T, then softmax backward to scores
                gemm_nt(dy, vn->value.data() + int64_t(b) * Tk * Dv, d_attn.data(), Tq, Dv, Tk);
                for (int r = 0; r < Tq; ++r) {
                    const float *arow = a + int64_t(r) * Tk;
                    const float *darow = d_attn.data() + int64_t(r) * Tk;
                    double dot = 0.0;
                    for (int i = 0; i < Tk; ++i)
                        dot += double(darow[i]) * arow[i];
                    float *ds = d_scores.data() + int64_t(r) * Tk;
                    for (int i = 0; i < Tk; ++i)
                        ds[i] = (darow[i] - float(dot)) * arow[i] * alpha;
                }
                if (qn->requires_grad) {
                    qn->ensure_grad();
                    gemm_nn(d_scores.data(), kn->value.data() + int64_t(b) * Tk * D,
                            qn->grad.data() + int64_t(b) * Tq * D, Tq, Tk, D, true);
                }
                if (kn->requires_grad) {
                    kn->ensure_grad();
                    gemm_tn(d_scores.data(), qn->value.data() + int64_t(b) * Tq * D,
                            kn->grad.data() + int64_t(b) * Tk * D, Tk, Tq, D, true);
                }
            }
        });
}

// ============================================================================
// Group normalization
// ============================================================================

// x (N, C, spatial...), per-(sample, group) statistics, affine per channel.
inline Tensor group_norm(const Tensor &x, int groups, const Tensor &gamma, const Tensor &beta,
                         float eps = 1e-5f) {
    const Shape &s = x.shape();
    if (s.size() < 2)
        throw ContractError("group_norm: need (N, C, ...), got " + shape_str(s));
    const int N = s[0], C = s[1];
    if (C % groups != 0)
        throw ContractError("group_norm: channels " + std::to_string(C) +
                            " not divisible by groups " + std::to_string(groups));
    if (gamma.shape() != Shape{C} || beta.shape() != Shape{C})
        throw ContractError("group_norm: affine params must have shape (C)");
    int64_t spatial = 1;
    for (size_t d = 2; d < s.size(); ++d)
        spatial *= s[d];
    const int cg = C / groups;
    const int64_t gsize = cg * spatial;

    auto inv_std = std::make_shared<std::vector<float>>(size_t(N) * groups);
    auto means = std::make_shared<std::vector<float>>(size_t(N) * groups);
    std::vector<float> out(x.value().size());
    const float *xv = x.value().data();
    for (int n = 0; n < N; ++n)
        for (int g = 0; g < groups; ++g) {
            const float *src = xv + (int64_t(n) * C + int64_t(g) * cg) * spatial;
            double mean = 0.0;
            for (int64_t i = 0; i < gsize; ++i)
                mean += src[i];
            mean /= double(gsize);
            double var = 0.0;
            for (int64_t i = 0; i < gsize; ++i) {
                const double d = src[i] - mean;
                var += d * d;
            }
            var /= double(gsize);
            const float istd = float(1.0 / std::sqrt(var + eps));
            (*means)[size_t(n) * groups + g] = float(mean);
            (*inv_std)[size_t(n) * groups + g] = istd;
            float *dst = out.data() + (int64_t(n) * C + int64_t(g) * cg) * spatial;
            for (int c = 0; c < cg; ++c) {
                const float ga = gamma.value()[size_t(g) * cg + c];
                const float be = beta.value()[size_t(g) * cg + c];
                for (int64_t i = 0; i < spatial; ++i) {
                    const int64_t idx = int64_t(c) * spatial + i;
                    dst[idx] = (src[idx] - float(mean)) * istd * ga + be;
                }
            }
        }

    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    return detail::make_node(
        s, std::move(out), "group_norm", {x, gamma, beta},
        [xn, gn, bn, N, C, groups, cg, spatial, gsize, inv_std, means](Node &self) {
            const float *xv = xn->value.data();
            for (int n = 0; n < N; ++n)
                for (int g = 0; g < groups; ++g) {
                    const int64_t base = (int64_t(n) * C + int64_t(g) * cg) * spatial;
                    const float mean = (*means)[size_t(n) * groups + g];
                    const float istd = (*inv_std)[size_t(n) * groups + g];
                    // dxhat = dy * gamma; need mean(dxhat) and mean(dxhat*xhat)
                    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                    for (int c = 0; c < cg; ++c) {
                        const float ga = gn->value[size_t(g) * cg + c];
                        for (int64_t i = 0; i < spatial; ++i) {
                            const int64_t idx = base + int64_t(c) * spatial + i;
                            const float xhat = (xv[idx] - mean) * istd;
                            const float dxhat = self.grad[size_t(idx)] * ga;
                            sum_dxhat += dxhat;
                            sum_dxhat_xhat += double(dxhat) * xhat;
                        }
                    }
                    const float m_dxhat = float(sum_dxhat / double(gsize));
                    const float m_dxhat_xhat = float(sum_dxhat_xhat / double(gsize));
                    if (xn->requires_grad) {
                        xn->ensure_grad();
                        for (int c = 0; c < cg; ++c) {
                            const float ga = gn->value[size_t(g) * cg + c];
                            for (int64_t i = 0; i < spatial; ++i) {
                                const int64_t idx = base + int64_t(c) * spatial + i;
                                const float xhat = (xv[idx] - mean) * istd;
                                const float dxhat = self.grad[size_t(idx)] * ga;
                                xn->grad[size_t(idx)] +=
                                    istd * (dxhat - m_dxhat - xhat * m_dxhat_xhat);
                            }
                        }
                    }
                    if (gn->requires_grad || bn->requires_grad) {
                        gn->ensure_grad();
                        bn->ensure_grad();
                        for (int c = 0; c < cg; ++c) {
                            double dg = 0.0, db = 0.0;
                            for (int64_t i = 0; i < spatial; ++i) {
                                const int64_t idx = base + int64_t(c) * spatial + i;
                                const float xhat = (xv[idx] - mean) * istd;
                                dg += double(self.grad[size_t(idx)]) * xhat;
                                db += self.grad[size_t(idx)];
                            }
                            gn->grad[size_t(g) * cg + c] += float(dg);
                            bn->grad[size_t(g) * cg + c] += float(db);
                        }
                    }
                }
        });
}

} // namespace rfdiff
