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

#include <algorithm>

#include "rfdiff/dataset.hpp"

namespace rfdiff {

struct MetricsReport {
    std::vector<double> errors_db; // per-cell absolute errors, pooled
    double wall_seconds = 0.0;

    double median() const {
        if (errors_db.empty())
            throw ContractError("MetricsReport: no errors recorded");
        std::vector<double> v = errors_db;
        const size_t mid = v.size() / 2;
        std::nth_element(v.begin(), v.begin() + mid, v.end());
        double m = v[mid];
        if (v.size() % 2 == 0) {
            std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
            m = 0.5 * (m + v[mid - 1]);
        }
        return m;
    }
    double mean() const {
        if (errors_db.empty())
            throw ContractError("MetricsReport: no errors recorded");
        double acc = 0.0;
        for (double e : errors_db)
            acc += e;
        return acc / double(errors_db.size());
    }
    // Nondecreasing CDF samples at the given quantiles.
    std::vector<double> cdf(const std::vector<double> &quantiles) const {
        std::vector<double> v = errors_db;
        std::sort(v.begin(), v.end());
        std::vector<double> out;
        for (double q : quantiles) {
            const size_t i = size_t(std::clamp(q, 0.0, 1.0) * double(v.size() - 1));
            out.push_back(v[i]);
        }
        return out;
    }
};

// Per-cell absolute dB error between prediction and ground truth, computed
// by denormalizing the shared pixel range. Grids and normalization constants
// must match.
inline std::vector<double> rssi_error(const Heatmap &pred, const Heatmap &gt) {
    if (!(pred.grid == gt.grid))
        throw ContractError("rssi_error: grids differ");
    if (pred.floor_db != gt.floor_db || pred.range_db != gt.range_db)
        throw ContractError("rssi_error: normalization constants differ");
    std::vector<double> errs(gt.rssi_db.size());
    for (size_t i = 0; i < errs.size(); ++i)
        errs[i] = std::abs(pred.pixel(i) - gt.pixel(i)) * gt.range_db;
    return errs;
}

// Prediction pixels -> Heatmap sharing gt's grid and normalization.
inline Heatmap pixels_to_heatmap(const std::vector<float> &pixels, const Heatmap &gt) {
    if (int64_t(pixels.size()) != int64_t(gt.rssi_db.size()))
        throw ContractError("pixels_to_heatmap: size mismatch");
    Heatmap out;
    out.grid = gt.grid;
    out.freq_hz = gt.freq_hz;
    out.floor_db = gt.floor_db;
    out.range_db = gt.range_db;
    out.rssi_db.resize(pixels.size());
    for (size_t i = 0; i < pixels.size(); ++i)
        out.rssi_db[i] = gt.pixel_to_db(std::clamp(double(pixels[i]), 0.0, 1.0));
    return out;
}

// Pooled per-cell errors of the model over a sample list. Parallel across
// samples; noise seeds derive from ids so results are order independent.
inline MetricsReport evaluate_model(const DiffusionModel &model,
                                    const std::vector<LoadedSample> &samples,
                                    uint64_t noise_seed,
                                    const std::function<ConditionInputs(const LoadedSample &)>
                                        &cond_override = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    const size_t cells = size_t(model.cfg.heatmap_res) * size_t(model.cfg.heatmap_res);
    MetricsReport report;
    report.errors_db.assign(samples.size() * cells, 0.0);
    parallel_for(0, int64_t(samples.size()), [&](int64_t i) {
        NoGradGuard ng;
        const LoadedSample &s = samples[size_t(i)];
        const ConditionInputs cond = cond_override ? cond_override(s) : s.cond;
        const Tensor pred = model.sample_pixels(
            cond, split_seed(noise_seed, "eval-noise", uint64_t(s.record.scene_index) * 1000 +
                                                           uint64_t(s.record.freq_index)));
        const Heatmap pred_hm = pixels_to_heatmap(pred.value(), s.gt);
        const auto errs = rssi_error(pred_hm, s.gt);
        std::copy(errs.begin(), errs.end(), report.errors_db.begin() + int64_t(i) * cells);
    });
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

// Same pooled metric for a non-learned predictor (the interpolation baseline).
inline MetricsReport evaluate_mri(const std::vector<LoadedSample> &samples) {
    MetricsReport report;
    for (const auto &s : samples) {
        PreMeasuredMap pre;
        pre.points = s.record.premeasured;
        Heatmap est = mri_baseline(pre, s.scene, s.gt.grid, s.gt.freq_hz);
        est.floor_db = s.gt.floor_db; // shared normalization for the metric
        est.range_db = s.gt.range_db;
        const auto errs = rssi_error(est, s.gt);
        report.errors_db.insert(report.errors_db.end(), errs.begin(), errs.end());
    }
    return report;
}

} // namespace rfdiff
