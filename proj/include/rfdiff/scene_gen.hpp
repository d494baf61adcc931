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

#include "rfdiff/rng.hpp"
#include "rfdiff/scene.hpp"

namespace rfdiff {

struct RoomSpec {
    double width = 4.0;  // meters, each side within [3, 12]
    double height = 4.0;
    int n_obstacles = 0;
    int n_movable = 0;             // subset of n_obstacles flagged movable
    std::string wall_material;     // empty: drawn at random from the wall set
};

namespace detail {

inline const std::vector<std::string> &wall_material_names() {
    static const std::vector<std::string> names = {"concrete", "brick", "plasterboard"};
    return names;
}

inline const std::vector<std::string> &obstacle_material_names() {
    static const std::vector<std::string> names = {"wood", "metal", "glass", "plasterboard"};
    return names;
}

} // namespace detail

// Builds a closed rectangular room with non-overlapping box obstacles and a
// uniformly sampled TX. Deterministic per (spec, seed).
inline Scene build_room(const RoomSpec &spec, uint64_t seed) {
    if (spec.width < 3.0 || spec.width > 12.0 || spec.height < 3.0 || spec.height > 12.0)
        throw ContractError("build_room: room sides must lie within [3 m, 12 m]");
    if (spec.n_obstacles < 0 || spec.n_movable > spec.n_obstacles)
        throw ContractError("build_room: invalid obstacle counts");

    Rng rng(split_seed(seed, "build_room"));
    Scene scene;
    scene.seed = int64_t(seed);
    scene.bounds = Rect{{0.0, 0.0}, {spec.width, spec.height}};

    const Material wall_mat = spec.wall_material.empty()
        ? material_by_name(detail::wall_material_names()[rng.uniform_index(
              detail::wall_material_names().size())])
        : material_by_name(spec.wall_material);

    const Vec2 a = scene.bounds.lo;
    const Vec2 b{scene.bounds.hi.x, scene.bounds.lo.y};
    const Vec2 c = scene.bounds.hi;
    const Vec2 d{scene.bounds.lo.x, scene.bounds.hi.y};
    scene.walls = {WallSegment{a, b, wall_mat, false}, WallSegment{b, c, wall_mat, false},
                   WallSegment{c, d, wall_mat, false}, WallSegment{d, a, wall_mat, false}};

    // Obstacles: bounded rejection sampling, pairwise disjoint, clear of walls.
    const double margin = 0.15;
    const int max_tries = 200;
    for (int i = 0; i < spec.n_obstacles; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < max_tries && !placed; ++attempt) {
            BoxObstacle box;
            box.half_extents = {rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9)};
            const double x_lo = scene.bounds.lo.x + margin + box.half_extents.x;
            const double x_hi = scene.bounds.hi.x - margin - box.half_extents.x;
            const double y_lo = scene.bounds.lo.y + margin + box.half_extents.y;
            const double y_hi = scene.bounds.hi.y - margin - box.half_extents.y;
            if (x_lo >= x_hi || y_lo >= y_hi)
                continue;
            box.center = {rng.uniform(x_lo, x_hi), rng.uniform(y_lo, y_hi)};
            box.material = material_by_name(detail::obstacle_material_names()[rng.uniform_index(
                detail::obstacle_material_names().size())]);
            box.movable = i < spec.n_movable;
            bool overlap = false;
            for (const auto &other : scene.obstacles)
                if (box.rect().overlaps(other.rect())) {
                    overlap = true;
                    break;
                }
            if (!overlap) {
                scene.obstacles.push_back(box);
                placed = true;
            }
        }
        if (!placed)
            throw DataError("build_room: could not place obstacle " + std::to_string(i) +
                            " without overlap after " + std::to_string(max_tries) + " tries");
    }

    // TX: uniform over the room, outside every obstacle (with a small
    // clearance so the TX box stays free as well).
    const int max_tx_tries = 500;
    bool tx_ok = false;
    for (int attempt = 0; attempt < max_tx_tries && !tx_ok; ++attempt) {
        Vec2 tx{rng.uniform(scene.bounds.lo.x + 0.3, scene.bounds.hi.x - 0.3),
                rng.uniform(scene.bounds.lo.y + 0.3, scene.bounds.hi.y - 0.3)};
        bool inside_obstacle = false;
        for (const auto &box : scene.obstacles) {
            Rect r = box.rect();
            r.lo = r.lo - Vec2{Scene::kTxBoxHalf, Scene::kTxBoxHalf};
            r.hi = r.hi + Vec2{Scene::kTxBoxHalf, Scene::kTxBoxHalf};
            if (r.contains(tx)) {
                inside_obstacle = true;
                break;
            }
        }
        if (!inside_obstacle) {
            scene.tx = tx;
            tx_ok = true;
        }
    }
    if (!tx_ok)
        throw DataError("build_room: could not place TX outside obstacles");

    scene.validate();
    return scene;
}

// Tiles rooms vertically along shared walls; every shared wall receives one
// opening at least 0.8 m wide. Requires equal room widths.
inline Scene compose_apartment(const std::vector<Scene> &rooms, uint64_t seed) {
    if (rooms.size() < 2)
        throw ContractError("compose_apartment: need at least 2 rooms");
    const double width = rooms[0].bounds.width();
    for (const auto &r : rooms)
        if (std::abs(r.bounds.width() - width) > 1e-9)
            throw DataError("compose_apartment: incompatible room widths");

    Rng rng(split_seed(seed, "compose_apartment"));
    Scene out;
    out.seed = int64_t(seed);

    double y_off = 0.0;
    double total_h = 0.0;
    for (const auto &r : rooms)
        total_h += r.bounds.height();
    out.bounds = Rect{{0.0, 0.0}, {width, total_h}};

    for (size_t k = 0; k < rooms.size(); ++k) {
        const Scene &room = rooms[k];
        const Vec2 shift = Vec2{-room.bounds.lo.x, y_off - room.bounds.lo.y};
        const double top_y = y_off + room.bounds.height();
        const bool has_room_above = k + 1 < rooms.size();

        for (const auto &w : room.walls) {
            WallSegment moved = w;
            moved.p0 = w.p0 + shift;
            moved.p1 = w.p1 + shift;
            const bool on_top_edge =
                std::abs(moved.p0.y - top_y) < 1e-9 && std::abs(moved.p1.y - top_y) < 1e-9;
            const bool on_bottom_edge =
                std::abs(moved.p0.y - y_off) < 1e-9 && std::abs(moved.p1.y - y_off) < 1e-9;
            if (on_bottom_edge && k > 0)
                continue; // shared edge already emitted by the room below
            if (on_top_edge && has_room_above) {
                // Split the shared wall around one doorway.
                const double opening_w = rng.uniform(0.8, std::min(1.4, width - 0.4));
                const double x0 = rng.uniform(0.1, width - opening_w - 0.1);
                const double x1 = x0 + opening_w;
                const double lo_x = std::min(moved.p0.x, moved.p1.x);
                const double hi_x = std::max(moved.p0.x, moved.p1.x);
                if (x0 > lo_x)
                    out.walls.push_back(WallSegment{{lo_x, top_y}, {x0, top_y}, moved.material, false});
                out.walls.push_back(make_opening({x0, top_y}, {x1, top_y}));
                if (x1 < hi_x)
                    out.walls.push_back(WallSegment{{x1, top_y}, {hi_x, top_y}, moved.material, false});
                continue;
            }
            out.walls.push_back(moved);
        }
        for (const auto &box : room.obstacles) {
            BoxObstacle moved = box;
            moved.center = box.center + shift;
            out.obstacles.push_back(moved);
        }
        y_off = top_y;
    }

    out.tx = rooms[0].tx + Vec2{-rooms[0].bounds.lo.x, -rooms[0].bounds.lo.y};
    out.validate();
    return out;
}

} // namespace rfdiff
