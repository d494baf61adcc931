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

#include "rfdiff/nn.hpp"

namespace rfdiff {

struct TrainConfig {
    int batch = 16;
    int epochs = 20;
    double base_lr = 1e-3;
    double warmup_frac = 0.15;
    // Factors relative to the initial rate, applied after the keyed epoch.
    std::map<int, double> milestones = {{10, 0.8}, {15, 0.2}, {20, 0.04}};
    uint64_t seed = 1;
    bool augment = true;

    void validate() const {
        if (batch < 1 || epochs < 1 || base_lr <= 0.0)
            throw ContractError("TrainConfig: bad batch/epochs/base_lr");
        if (warmup_frac <= 0.0 || warmup_frac >= 1.0)
            throw ContractError("TrainConfig: warmup_frac must lie in (0,1)");
    }
};

// Linear warm-up over the first warmup_frac of all steps, then the base rate
// scaled by the most recent passed milestone.
inline double lr_at(int64_t step, int64_t total_steps, int64_t steps_per_epoch,
                    const TrainConfig &cfg) {
    if (step < 0)
        throw ContractError("lr_at: negative step");
    cfg.validate();
    const int64_t warmup_steps =
        std::max<int64_t>(1, int64_t(std::llround(cfg.warmup_frac * double(total_steps))));
    double lr = cfg.base_lr;
    if (step < warmup_steps)
        lr = cfg.base_lr * double(step) / double(warmup_steps);
    const int epoch = int(step / std::max<int64_t>(1, steps_per_epoch)) + 1;
    double factor = 1.0;
    for (const auto &[milestone_epoch, value] : cfg.milestones)
        if (epoch > milestone_epoch)
            factor = value;
    return lr * factor;
}

// Adam over a ParamStore. Moment buffers are addressed by parameter name so
// training state can round-trip through checkpoints.
class Adam {
public:
    explicit Adam(ParamStore &params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : params_(params), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto &[name, t] : params_.items()) {
            m_[name].assign(t.value().size(), 0.0f);
            v_[name].assign(t.value().size(), 0.0f);
        }
    }

    // One update from the accumulated gradients; grad_scale folds the batch
    // average in. Skips parameters excluded by the filter (frozen weights).
    void step(double lr, double grad_scale = 1.0,
              const std::function<bool(const std::string &)> &trainable = nullptr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, double(t_));
        const double bc2 = 1.0 - std::pow(beta2_, double(t_));
        for (auto &[name, param] : params_.items()) {
            if (trainable && !trainable(name))
                continue;
            auto &m = m_[name];
            auto &v = v_[name];
            auto &val = param.value();
            auto &grad = param.grad();
            for (size_t i = 0; i < val.size(); ++i) {
                const double g = double(grad[i]) * grad_scale;
                if (!std::isfinite(g))
                    throw NumericError("Adam: non-finite gradient in '" + name + "'");
                m[i] = float(beta1_ * m[i] + (1.0 - beta1_) * g);
                v[i] = float(beta2_ * v[i] + (1.0 - beta2_) * g * g);
                const double mhat = double(m[i]) / bc1;
                const double vhat = double(v[i]) / bc2;
                val[i] -= float(lr * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    int64_t step_count() const { return t_; }
    void set_step_count(int64_t t) { t_ = t; }
    std::map<std::string, std::vector<float>> &moments_m() { return m_; }
    std::map<std::string, std::vector<float>> &moments_v() { return v_; }

private:
    ParamStore &params_;
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::map<std::string, std::vector<float>> m_, v_;
};

} // namespace rfdiff
