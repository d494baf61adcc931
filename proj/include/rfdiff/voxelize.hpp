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
#include <vector>

#include "rfdiff/scene.hpp"

namespace rfdiff {

// Dense 2.5-D occupancy grid with per-cell material channels
// [occupancy, reflection coefficient, transmission loss in dB].
struct OccupancyVolume {
    int nx = 0, ny = 0, nz = 0;
    double cell_size = 0.0; // horizontal cell size, meters
    std::vector<float> occupancy;
    std::vector<float> gamma;
    std::vector<float> loss_db;

    size_t size() const { return size_t(nx) * size_t(ny) * size_t(nz); }
    size_t idx(int x, int y, int z) const {
        return (size_t(z) * size_t(ny) + size_t(y)) * size_t(nx) + size_t(x);
    }

    double occupied_fraction() const {
        if (occupancy.empty())
            return 0.0;
        double n = 0.0;
        for (float v : occupancy)
            n += v;
        return n / double(occupancy.size());
    }
};

namespace detail {

// Closed segment-rectangle intersection (Liang-Barsky clip).
inline bool segment_touches_rect(const Vec2 &p0, const Vec2 &p1, const Rect &r) {
    const double dx = p1.x - p0.x;
    const double dy = p1.y - p0.y;
    double t0 = 0.0, t1 = 1.0;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {p0.x - r.lo.x, r.hi.x - p0.x, p0.y - r.lo.y, r.hi.y - p0.y};
    for (int i = 0; i < 4; ++i) {
        if (p[i] == 0.0) {
            if (q[i] < 0.0)
                return false;
        } else {
            const double t = q[i] / p[i];
            if (p[i] < 0.0)
                t0 = std::max(t0, t);
            else
                t1 = std::min(t1, t);
            if (t0 > t1)
                return false;
        }
    }
    return true;
}

} // namespace detail

// Conservative rasterization: any cell intersecting geometry is occupied and
// carries the occupying primitive's material. Walls use a closed predicate
// (they are zero-area), boxes require interior overlap; boxes are written
// after walls and win within their footprint.
inline OccupancyVolume voxelize(const Scene &scene, double cell_size, int nz) {
    if (cell_size <= 0.0)
        throw ContractError("voxelize: cell_size must be positive");
    if (nz <= 0)
        throw ContractError("voxelize: nz must be positive");
    const int nx = int(std::ceil(scene.bounds.width() / cell_size));
    const int ny = int(std::ceil(scene.bounds.height() / cell_size));
    if (int64_t(nx) * ny * nz > 128 * 128 * 128)
        throw ContractError("voxelize: grid exceeds the 128^3 cell budget");

    OccupancyVolume vol;
    vol.nx = nx;
    vol.ny = ny;
    vol.nz = nz;
    vol.cell_size = cell_size;
    vol.occupancy.assign(vol.size(), 0.0f);
    vol.gamma.assign(vol.size(), 0.0f);
    vol.loss_db.assign(vol.size(), 0.0f);

    // The 2.5-D plan extrudes uniformly in z, so one layer is rasterized
    // and replicated.
    std::vector<float> occ(size_t(nx) * ny, 0.0f), gam(size_t(nx) * ny, 0.0f),
        los(size_t(nx) * ny, 0.0f);

    auto cell_rect = [&](int x, int y) {
        const Vec2 lo{scene.bounds.lo.x + x * cell_size, scene.bounds.lo.y + y * cell_size};
        return Rect{lo, {lo.x + cell_size, lo.y + cell_size}};
    };

    for (const auto &w : scene.walls) {
        if (w.is_opening)
            continue; // doorways are transparent, not geometry
        const Rect wb{{std::min(w.p0.x, w.p1.x), std::min(w.p0.y, w.p1.y)},
                      {std::max(w.p0.x, w.p1.x), std::max(w.p0.y, w.p1.y)}};
        const int x0 = std::max(0, int(std::floor((wb.lo.x - scene.bounds.lo.x) / cell_size)) - 1);
        const int x1 = std::min(nx - 1, int(std::floor((wb.hi.x - scene.bounds.lo.x) / cell_size)) + 1);
        const int y0 = std::max(0, int(std::floor((wb.lo.y - scene.bounds.lo.y) / cell_size)) - 1);
        const int y1 = std::min(ny - 1, int(std::floor((wb.hi.y - scene.bounds.lo.y) / cell_size)) + 1);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
                if (detail::segment_touches_rect(w.p0, w.p1, cell_rect(x, y))) {
                    const size_t i = size_t(y) * nx + x;
                    occ[i] = 1.0f;
                    gam[i] = float(w.material.reflection_coeff);
                    los[i] = float(w.material.transmission_loss_db);
                }
    }

    for (const auto &box : scene.obstacles) {
        const Rect r = box.rect();
        const int x0 = std::max(0, int(std::floor((r.lo.x - scene.bounds.lo.x) / cell_size)));
        const int x1 = std::min(nx - 1, int(std::ceil((r.hi.x - scene.bounds.lo.x) / cell_size)) - 1);
        const int y0 = std::max(0, int(std::floor((r.lo.y - scene.bounds.lo.y) / cell_size)));
        const int y1 = std::min(ny - 1, int(std::ceil((r.hi.y - scene.bounds.lo.y) / cell_size)) - 1);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
                if (cell_rect(x, y).overlaps(r)) {
                    const size_t i = size_t(y) * nx + x;
                    occ[i] = 1.0f;
                    gam[i] = float(box.material.reflection_coeff);
                    los[i] = float(box.material.transmission_loss_db);
                }
    }

    for (int z = 0; z < nz; ++z) {
        const size_t off = size_t(z) * size_t(nx) * ny;
        std::copy(occ.begin(), occ.end(), vol.occupancy.begin() + off);
        std::copy(gam.begin(), gam.end(), vol.gamma.begin() + off);
        std::copy(los.begin(), los.end(), vol.loss_db.begin() + off);
    }
    return vol;
}

} // namespace rfdiff
