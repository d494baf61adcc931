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

#include <map>

#include "rfdiff/conv.hpp"
#include "rfdiff/ops.hpp"

namespace rfdiff {

// Ordered, named parameter registry. Construction order is fixed per model,
// which keeps initialization deterministic for a given seed.
class ParamStore {
public:
    Tensor create(const std::string &name, const Shape &shape) {
        if (index_.count(name))
            throw ContractError("ParamStore: duplicate parameter '" + name + "'");
        Tensor t = Tensor::zeros(shape, /*requires_grad=*/true);
        index_[name] = items_.size();
        items_.push_back({name, t});
        return t;
    }

    const std::vector<std::pair<std::string, Tensor>> &items() const { return items_; }
    std::vector<std::pair<std::string, Tensor>> &items() { return items_; }

    Tensor get(const std::string &name) const {
        auto it = index_.find(name);
        if (it == index_.end())
            throw ContractError("ParamStore: unknown parameter '" + name + "'");
        return items_[it->second].second;
    }
    bool has(const std::string &name) const { return index_.count(name) > 0; }

    void zero_grads() {
        for (auto &[name, t] : items_)
            t.zero_grad();
    }
    int64_t total_params() const {
        int64_t n = 0;
        for (const auto &[name, t] : items_)
            n += t.numel();
        return n;
    }

private:
    std::vector<std::pair<std::string, Tensor>> items_;
    std::map<std::string, size_t> index_;
};

// ============================================================================
// Initialization
// ============================================================================

inline void init_uniform(Tensor &t, Rng &rng, double bound) {
    for (auto &v : t.value())
        v = float(rng.uniform(-bound, bound));
}

inline void init_kaiming(Tensor &t, Rng &rng, int64_t fan_in) {
    const double bound = std::sqrt(6.0 / double(std::max<int64_t>(fan_in, 1)));
    init_uniform(t, rng, bound);
}

inline void init_ones(Tensor &t) {
    for (auto &v : t.value())
        v = 1.0f;
}

// ============================================================================
// Layers
// ============================================================================

struct LinearLayer {
    Tensor w, b;

    LinearLayer() = default;
    LinearLayer(ParamStore &ps, const std::string &prefix, Rng &rng, int in, int out,
                bool zero_init = false) {
        w = ps.create(prefix + ".w", {in, out});
        b = ps.create(prefix + ".b", {out});
        if (!zero_init)
            init_kaiming(w, rng, in);
    }
    Tensor forward(const Tensor &x) const { return linear(x, w, b); }
};

struct Conv2dLayer {
    Tensor w, b;
    int stride = 1, pad = 0;

    Conv2dLayer() = default;
    Conv2dLayer(ParamStore &ps, const std::string &prefix, Rng &rng, int cin, int cout, int k,
                int stride_ = 1, int pad_ = 0, bool zero_init = false)
        : stride(stride_), pad(pad_) {
        w = ps.create(prefix + ".w", {cout, cin, k, k});
        b = ps.create(prefix + ".b", {cout});
        if (!zero_init)
            init_kaiming(w, rng, int64_t(cin) * k * k);
    }
    Tensor forward(const Tensor &x) const { return conv2d(x, w, b, stride, pad); }
};

struct ConvT2dLayer {
    Tensor w, b;
    int stride = 2;

    ConvT2dLayer() = default;
    ConvT2dLayer(ParamStore &ps, const std::string &prefix, Rng &rng, int cin, int cout, int k,
                 int stride_ = 2)
        : stride(stride_) {
        w = ps.create(prefix + ".w", {cin, cout, k, k});
        b = ps.create(prefix + ".b", {cout});
        init_kaiming(w, rng, int64_t(cin) * k * k);
    }
    Tensor forward(const Tensor &x) const { return conv_transpose2d(x, w, b, stride); }
};

struct Conv3dLayer {
    Tensor w, b;
    int stride = 1, pad = 0;

    Conv3dLayer() = default;
    Conv3dLayer(ParamStore &ps, const std::string &prefix, Rng &rng, int cin, int cout, int kd,
                int khw, int stride_ = 1, int pad_ = 0, bool zero_init = false)
        : stride(stride_), pad(pad_) {
        w = ps.create(prefix + ".w", {cout, cin, kd, khw, khw});
        b = ps.create(prefix + ".b", {cout});
        if (!zero_init)
            init_kaiming(w, rng, int64_t(cin) * kd * khw * khw);
    }
    Tensor forward(const Tensor &x) const { return conv3d(x, w, b, stride, pad); }
};

struct GroupNormLayer {
    Tensor gamma, beta;
    int groups = 8;

    GroupNormLayer() = default;
    GroupNormLayer(ParamStore &ps, const std::string &prefix, int channels, int groups_ = 8) {
        groups = std::min(groups_, channels);
        while (channels % groups != 0)
            --groups;
        gamma = ps.create(prefix + ".gamma", {channels});
        beta = ps.create(prefix + ".beta", {channels});
        init_ones(gamma);
    }
    Tensor forward(const Tensor &x) const { return group_norm(x, groups, gamma, beta); }
};

// Multi-head self-attention over a token list (T, C).
struct SelfAttention {
    LinearLayer proj_q, proj_k, proj_v, proj_out;
    int heads = 4;
    int channels = 0;

    SelfAttention() = default;
    SelfAttention(ParamStore &ps, const std::string &prefix, Rng &rng, int channels_,
                  int heads_ = 4, bool zero_out = false)
        : heads(heads_), channels(channels_) {
        if (channels_ % heads_ != 0)
            throw ContractError("SelfAttention: channels not divisible by heads");
        proj_q = LinearLayer(ps, prefix + ".q", rng, channels_, channels_);
        proj_k = LinearLayer(ps, prefix + ".k", rng, channels_, channels_);
        proj_v = LinearLayer(ps, prefix + ".v", rng, channels_, channels_);
        proj_out = LinearLayer(ps, prefix + ".out", rng, channels_, channels_, zero_out);
    }

    Tensor forward(const Tensor &tokens) const {
        const Shape &s = tokens.shape();
        if (s.size() != 2 || s[1] != channels)
            throw ContractError("SelfAttention: tokens " + shape_str(s));
        const int t = s[0], dh = channels / heads;
        auto split = [&](const Tensor &x) {
            // (T, C) -> (heads, T, dh)
            return permute(reshape(x, {t, heads, dh}), {1, 0, 2});
        };
        const Tensor q = split(proj_q.forward(tokens));
        const Tensor k = split(proj_k.forward(tokens));
        const Tensor v = split(proj_v.forward(tokens));
        const Tensor att = scaled_dot_attention(q, k, v); // (heads, T, dh)
        const Tensor merged = reshape(permute(att, {1, 0, 2}), {t, channels});
        return proj_out.forward(merged);
    }
};

} // namespace rfdiff
