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

#include "rfdiff/schedule.hpp"

namespace rfdiff {

struct SamplerConfig {
    int train_steps = 1000;
    int infer_steps = 20;
    double eta = 0.0; // deterministic reverse process

    void validate() const {
        if (train_steps < 2 || infer_steps < 1 || infer_steps > train_steps)
            throw ContractError("SamplerConfig: bad step counts");
        if (train_steps % infer_steps != 0)
            throw ContractError("SamplerConfig: infer_steps must divide train_steps evenly");
        if (eta != 0.0)
            throw ContractError("SamplerConfig: only the deterministic eta = 0 sampler exists");
    }
};

// The network predicts the clean latent; this forms the reverse-step mean
// mu = coef_z0 * z0_hat + coef_zt * z_t. With the variance fixed to zero the
// step output is exactly mu.
inline Tensor denoise_step_mean(const Tensor &z_t, const Tensor &z0_hat, int t,
                                const NoiseSchedule &sched) {
    detail::check_same_shape("denoise_step", z_t, z0_hat);
    const auto p = sched.posterior(t);
    return add(scale(z0_hat, float(p.coef_z0)), scale(z_t, float(p.coef_zt)));
}

// Deterministic sampling over the evenly spaced step subsequence. `predict`
// maps (z_t, t) to the network's clean-latent estimate; the non-Markov jump
// between subsequence points re-noises that estimate with the extracted
// noise direction.
inline Tensor ddim_sample(const std::function<Tensor(const Tensor &, int)> &predict,
                          const Tensor &z_T, const NoiseSchedule &sched,
                          const SamplerConfig &cfg) {
    cfg.validate();
    if (sched.steps != cfg.train_steps)
        throw ContractError("ddim_sample: schedule has " + std::to_string(sched.steps) +
                            " steps, sampler expects " + std::to_string(cfg.train_steps));
    const int stride = cfg.train_steps / cfg.infer_steps;
    Tensor z = z_T;
    for (int k = cfg.infer_steps; k >= 1; --k) {
        const int t = k * stride;
        const int t_prev = (k - 1) * stride;
        const Tensor z0_hat = predict(z, t);
        detail::check_same_shape("ddim_sample", z, z0_hat);
        if (t_prev == 0) {
            z = z0_hat;
            break;
        }
        const double ab_t = sched.alpha_bar_at(t);
        const double ab_prev = sched.alpha_bar_at(t_prev);
        // eps_hat = (z - sqrt(ab_t) z0_hat) / sqrt(1 - ab_t)
        const Tensor eps_hat =
            scale(sub(z, scale(z0_hat, float(std::sqrt(ab_t)))), float(1.0 / std::sqrt(1.0 - ab_t)));
        z = add(scale(z0_hat, float(std::sqrt(ab_prev))),
                scale(eps_hat, float(std::sqrt(1.0 - ab_prev))));
    }
    return z;
}

} // namespace rfdiff
