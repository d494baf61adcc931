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
#include "rfdiff/premeasure.hpp"

namespace rfdiff {

struct LossWeights {
    double lambda1 = 1.0; // diffusion loss
    double lambda2 = 1.0; // pixel-wise signal loss
    double lambda3 = 1.0; // pre-measurement loss

    void validate() const {
        if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0)
            throw ContractError("LossWeights: weights must be nonnegative");
    }
};

// Mean squared difference between the step target and the predicted mean.
inline Tensor loss_d(const Tensor &z_prev_target, const Tensor &mu_pred) {
    detail::check_same_shape("loss_d", z_prev_target, mu_pred);
    return mean_all(square(sub(mu_pred, z_prev_target)));
}

// Pixel-wise L1 + L2, both as means so the weights stay resolution free.
inline Tensor loss_t(const Tensor &z0_gt, const Tensor &z0_pred) {
    detail::check_same_shape("loss_t", z0_gt, z0_pred);
    const Tensor diff = sub(z0_pred, z0_gt);
    return add(mean_all(abs_op(diff)), mean_all(square(diff)));
}

// Mask and target rasters for the point-wise pre-measurement loss.
struct PreMeasureTarget {
    Tensor values; // (1,1,H,W), normalized RSSI at measured cells else 0
    Tensor mask;   // (1,1,H,W), ones at measured cells
    int count = 0;
};

inline PreMeasureTarget premeasure_target(const PreMeasuredMap &pre, int height, int width,
                                          double floor_db, double range_db) {
    if (pre.count() < 1)
        throw ContractError("premeasure_target: empty pre-measured map");
    PreMeasureTarget t;
    t.values = Tensor::zeros({1, 1, height, width});
    t.mask = Tensor::zeros({1, 1, height, width});
    for (const auto &p : pre.points) {
        const int64_t i = int64_t(p.iy) * width + p.ix;
        t.values.value()[size_t(i)] = float(std::clamp((p.rssi_db - floor_db) / range_db, 0.0, 1.0));
        t.mask.value()[size_t(i)] = 1.0f;
    }
    t.count = pre.count();
    return t;
}

// MSE over measured cells only, divided by the measurement count.
inline Tensor loss_pre(const PreMeasureTarget &pre, const Tensor &z0_pred) {
    if (pre.count < 1)
        throw ContractError("loss_pre: empty pre-measured map");
    detail::check_same_shape("loss_pre", pre.values, z0_pred);
    const Tensor masked = mul(sub(z0_pred, pre.values), pre.mask);
    return scale(sum_all(square(masked)), float(1.0 / pre.count));
}

inline Tensor total_loss(const Tensor &l_d, const Tensor &l_t, const Tensor &l_pre,
                         const LossWeights &w) {
    w.validate();
    return add(add(scale(l_d, float(w.lambda1)), scale(l_t, float(w.lambda2))),
               scale(l_pre, float(w.lambda3)));
}

} // namespace rfdiff
