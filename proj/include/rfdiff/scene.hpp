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

#include <cstdint>
#include <string>
#include <vector>

#include "rfdiff/error.hpp"
#include "rfdiff/geometry.hpp"
#include "rfdiff/material.hpp"

namespace rfdiff {

struct WallSegment {
    Vec2 p0, p1;       // meters
    Material material;
    bool is_opening = false; // doorway: zero reflection, zero transmission loss

    void validate() const {
        if (p0 == p1)
            throw ContractError("WallSegment: degenerate segment (p0 == p1)");
        material.validate();
        if (is_opening && (material.reflection_coeff != 0.0 || material.transmission_loss_db != 0.0))
            throw ContractError("WallSegment: opening must carry zero reflection and loss");
    }

    bool operator==(const WallSegment &o) const {
        return p0 == o.p0 && p1 == o.p1 && material == o.material && is_opening == o.is_opening;
    }
};

// Opening segments are fully transparent; they keep a material name for
// bookkeeping but zeroed coefficients.
inline WallSegment make_opening(const Vec2 &p0, const Vec2 &p1) {
    return WallSegment{p0, p1, Material{"opening", 0.0, 0.0, std::nullopt}, true};
}

struct BoxObstacle {
    Vec2 center;       // meters
    Vec2 half_extents; // meters, strictly positive
    Material material;
    bool movable = false;

    Rect rect() const { return Rect{center - half_extents, center + half_extents}; }

    void validate() const {
        if (half_extents.x <= 0.0 || half_extents.y <= 0.0)
            throw ContractError("BoxObstacle: half_extents must be strictly positive");
        material.validate();
    }

    bool operator==(const BoxObstacle &o) const {
        return center == o.center && half_extents == o.half_extents && material == o.material &&
               movable == o.movable;
    }
};

// 2.5-D indoor scene: a 2-D floor plan with an implicit uniform height.
struct Scene {
    Rect bounds;
    std::vector<WallSegment> walls;
    std::vector<BoxObstacle> obstacles;
    Vec2 tx;
    int64_t seed = 0;

    // TX bounding box: 0.2 m square centered on the transmitter.
    static constexpr double kTxBoxHalf = 0.1;
    Rect tx_bbox() const {
        return Rect{{tx.x - kTxBoxHalf, tx.y - kTxBoxHalf}, {tx.x + kTxBoxHalf, tx.y + kTxBoxHalf}};
    }

    void validate() const {
        if (bounds.width() <= 0.0 || bounds.height() <= 0.0)
            throw ContractError("Scene: empty bounds");
        for (const auto &w : walls)
            w.validate();
        for (const auto &b : obstacles) {
            b.validate();
            const Rect r = b.rect();
            if (r.lo.x < bounds.lo.x || r.lo.y < bounds.lo.y || r.hi.x > bounds.hi.x ||
                r.hi.y > bounds.hi.y)
                throw ContractError("Scene: obstacle outside bounds");
        }
        if (!bounds.contains_strict(tx))
            throw ContractError("Scene: tx not strictly inside bounds");
        for (const auto &b : obstacles)
            if (b.rect().contains(tx))
                throw ContractError("Scene: tx inside an obstacle");
    }

    bool operator==(const Scene &o) const {
        return bounds == o.bounds && walls == o.walls && obstacles == o.obstacles && tx == o.tx &&
               seed == o.seed;
    }
};

} // namespace rfdiff
