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
#include <cmath>
#include <vector>

#include "rfdiff/propagation.hpp"
#include "rfdiff/rng.hpp"

namespace rfdiff {

struct PreMeasuredPoint {
    int ix = 0, iy = 0;
    double rssi_db = 0.0;
};

struct PreMeasuredMap {
    std::vector<PreMeasuredPoint> points; // unique grid cells
    int count() const { return int(points.size()); }
};

constexpr int kDefaultPreMeasureCount = 15;

// Draws k distinct uniform cells from the heatmap. Deterministic per seed.
inline PreMeasuredMap sample_premeasurements(const Heatmap &hm, int k, uint64_t seed) {
    const int64_t n_cells = int64_t(hm.grid.nx) * hm.grid.ny;
    if (k <= 0 || int64_t(k) > n_cells)
        throw ContractError("sample_premeasurements: k outside [1, grid size]");
    Rng rng(split_seed(seed, "premeasure"));
    // Partial Fisher-Yates over cell indices.
    std::vector<int64_t> cells(static_cast<size_t>(n_cells), 0);
    for (int64_t i = 0; i < n_cells; ++i)
        cells[size_t(i)] = i;
    PreMeasuredMap out;
    out.points.reserve(size_t(k));
    for (int i = 0; i < k; ++i) {
        const int64_t j = i + int64_t(rng.uniform_index(uint64_t(n_cells - i)));
        std::swap(cells[size_t(i)], cells[size_t(j)]);
        const int64_t cell = cells[size_t(i)];
        out.points.push_back(
            {int(cell % hm.grid.nx), int(cell / hm.grid.nx), hm.rssi_db[size_t(cell)]});
    }
    return out;
}

// Interpolation baseline: least-squares log-distance fit
// rssi ~ a - 10 n log10(d_tx), plus inverse-distance-weighted residual
// interpolation (power 2) so measured points reproduce exactly.
inline Heatmap mri_baseline(const PreMeasuredMap &pre, const Scene &scene, const GridSpec &grid,
                            double freq_hz) {
    if (pre.count() < 3)
        throw ContractError("mri_baseline: need at least 3 pre-measured points");

    struct Sample {
        Vec2 pos;
        double rssi;
        double log_d;
    };
    std::vector<Sample> samples;
    samples.reserve(pre.points.size());
    for (const auto &p : pre.points) {
        const Vec2 pos = grid.center(p.ix, p.iy);
        const double d = std::max(distance(pos, scene.tx), 1e-3);
        samples.push_back({pos, p.rssi_db, std::log10(d)});
    }

    // Normal equations for rssi = a + b * log10(d), b = -10 n.
    const double n_pts = double(samples.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto &s : samples) {
        sx += s.log_d;
        sy += s.rssi;
        sxx += s.log_d * s.log_d;
        sxy += s.log_d * s.rssi;
    }
    const double det = n_pts * sxx - sx * sx;
    double a, b;
    if (std::abs(det) < 1e-9) {
        // All points equidistant from the TX: fall back to path-loss exponent 2.
        b = -20.0;
        a = (sy - b * sx) / n_pts;
    } else {
        b = (n_pts * sxy - sx * sy) / det;
        a = (sy - b * sx) / n_pts;
    }

    std::vector<double> residual(samples.size());
    for (size_t i = 0; i < samples.size(); ++i)
        residual[i] = samples[i].rssi - (a + b * samples[i].log_d);

    Heatmap out;
    out.grid = grid;
    out.freq_hz = freq_hz;
    out.rssi_db.assign(size_t(grid.nx) * grid.ny, 0.0);
    for (int iy = 0; iy < grid.ny; ++iy) {
        for (int ix = 0; ix < grid.nx; ++ix) {
            const Vec2 pos = grid.center(ix, iy);
            const double d = std::max(distance(pos, scene.tx), 1e-3);
            double base = a + b * std::log10(d);
            // IDW residual, power 2; exact at the sample cells.
            double wsum = 0.0, acc = 0.0;
            bool exact = false;
            for (size_t i = 0; i < samples.size(); ++i) {
                const double dd = distance(pos, samples[i].pos);
                if (dd < 1e-9) {
                    base = samples[i].rssi;
                    exact = true;
                    break;
                }
                const double w = 1.0 / (dd * dd);
                wsum += w;
                acc += w * residual[i];
            }
            out.at(ix, iy) = exact ? base : base + acc / wsum;
        }
    }
    out.normalize_floor();
    return out;
}

} // namespace rfdiff
