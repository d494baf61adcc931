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

#include <chrono>
#include <cmath>
#include <complex>
#include <vector>

#include "rfdiff/frequency.hpp"
#include "rfdiff/geometry.hpp"
#include "rfdiff/parallel.hpp"
#include "rfdiff/scene.hpp"

namespace rfdiff {

// Sentinel for a fully silent cell; far below any observable floor but finite.
constexpr double kSilenceDb = -3000.0;

struct PathContribution {
    double length = 0.0; // meters
    double coeff = 1.0;  // product of reflection and transmission factors
    int order = 0;       // reflection count
};

struct GridSpec {
    Vec2 origin;
    double cell_w = 0.0, cell_h = 0.0;
    int nx = 0, ny = 0;

    static GridSpec cover(const Rect &bounds, int nx, int ny) {
        GridSpec g;
        g.origin = bounds.lo;
        g.nx = nx;
        g.ny = ny;
        g.cell_w = bounds.width() / nx;
        g.cell_h = bounds.height() / ny;
        return g;
    }
    Vec2 center(int ix, int iy) const {
        return {origin.x + (ix + 0.5) * cell_w, origin.y + (iy + 0.5) * cell_h};
    }
    bool operator==(const GridSpec &o) const {
        return origin == o.origin && cell_w == o.cell_w && cell_h == o.cell_h && nx == o.nx &&
               ny == o.ny;
    }
};

struct Heatmap {
    std::vector<double> rssi_db; // row-major, index iy*nx+ix
    GridSpec grid;
    double freq_hz = 0.0;
    double floor_db = 0.0;
    double range_db = 70.0;
    double sim_seconds = 0.0; // wall-clock of the producing simulation

    double &at(int ix, int iy) { return rssi_db[size_t(iy) * grid.nx + ix]; }
    double at(int ix, int iy) const { return rssi_db[size_t(iy) * grid.nx + ix]; }

    double pixel(size_t i) const {
        return std::clamp((rssi_db[i] - floor_db) / range_db, 0.0, 1.0);
    }
    std::vector<float> to_pixels() const {
        std::vector<float> px(rssi_db.size());
        for (size_t i = 0; i < px.size(); ++i)
            px[i] = float(pixel(i));
        return px;
    }
    double pixel_to_db(double p) const { return floor_db + p * range_db; }

    // floor_db = peak - range gives the fixed dynamic range used everywhere.
    void normalize_floor() {
        double peak = kSilenceDb;
        for (double v : rssi_db)
            peak = std::max(peak, v);
        floor_db = peak - range_db;
    }
};

// ============================================================================
// Image-method path tracer
// ============================================================================

// Per-scene tracer. The mirror-image tree over reflective segments depends
// only on the scene, so it is built once and shared by every receiver.
class SceneTracer {
public:
    explicit SceneTracer(const Scene &scene, int max_order = 3, double min_coeff = 1e-4)
        : scene_(scene), max_order_(max_order), min_coeff_(min_coeff) {
        collect_surfaces();
        build_image_tree();
    }

    const Scene &scene() const { return scene_; }
    int max_order() const { return max_order_; }

    std::vector<PathContribution> trace(const Vec2 &rx) const {
        if (distance(rx, scene_.tx) < 1e-12)
            throw NumericError("trace_paths: rx coincident with tx (degenerate geometry)");

        std::vector<PathContribution> paths;
        // Direct path.
        {
            PathContribution direct;
            direct.length = distance(scene_.tx, rx);
            direct.coeff = leg_transmission(scene_.tx, rx, -1, -1);
            direct.order = 0;
            paths.push_back(direct);
        }
        // Specular paths by validating each image-tree node against rx.
        std::vector<Vec2> pts(size_t(max_order_) + 2);
        for (const auto &node : nodes_) {
            if (node.depth == 0)
                continue;
            if (!validate_node(node, rx, pts))
                continue;
            PathContribution p;
            p.length = distance(node.image, rx);
            p.order = node.depth;
            double coeff = node.gamma_prod;
            // pts holds tx, q_1..q_k, rx; attenuate each leg.
            for (int leg = 0; leg <= node.depth; ++leg) {
                const int refl_a = leg == 0 ? -1 : seg_of(node, leg);
                const int refl_b = leg == node.depth ? -1 : seg_of(node, leg + 1);
                coeff *= leg_transmission(pts[size_t(leg)], pts[size_t(leg) + 1], refl_a, refl_b);
            }
            p.coeff = coeff;
            if (std::abs(p.coeff) >= min_coeff_)
                paths.push_back(p);
        }
        return paths;
    }

private:
    struct Surface {
        Vec2 p0, p1;
        double gamma;          // reflection coefficient
        double trans_factor;   // 10^(-loss_db/20), walls only
        int box_index;         // -1 for walls, else owning obstacle
    };
    struct ImageNode {
        Vec2 image;
        double gamma_prod;
        int seg;    // reflecting surface of this bounce
        int parent; // index into nodes_, -1 at depth 1
        int depth;
    };

    void collect_surfaces() {
        for (const auto &w : scene_.walls) {
            if (w.is_opening)
                continue;
            surfaces_.push_back({w.p0, w.p1, w.material.reflection_coeff,
                                 std::pow(10.0, -w.material.transmission_loss_db / 20.0), -1});
        }
        int bi = 0;
        for (const auto &b : scene_.obstacles) {
            const Rect r = b.rect();
            const Vec2 c00 = r.lo, c10{r.hi.x, r.lo.y}, c11 = r.hi, c01{r.lo.x, r.hi.y};
            const double g = b.material.reflection_coeff;
            surfaces_.push_back({c00, c10, g, 1.0, bi});
            surfaces_.push_back({c10, c11, g, 1.0, bi});
            surfaces_.push_back({c11, c01, g, 1.0, bi});
            surfaces_.push_back({c01, c00, g, 1.0, bi});
            box_loss_factor_.push_back(std::pow(10.0, -b.material.transmission_loss_db / 20.0));
            ++bi;
        }
    }

    void build_image_tree() {
        nodes_.push_back({scene_.tx, 1.0, -1, -1, 0});
        size_t level_begin = 0, level_end = 1;
        for (int depth = 1; depth <= max_order_; ++depth) {
            for (size_t pi = level_begin; pi < level_end; ++pi) {
                const ImageNode parent = nodes_[pi];
                for (int si = 0; si < int(surfaces_.size()); ++si) {
                    if (si == parent.seg)
                        continue; // immediate re-reflection is degenerate
                    const Surface &s = surfaces_[size_t(si)];
                    if (s.gamma <= 0.0)
                        continue;
                    const double gp = parent.gamma_prod * s.gamma;
                    if (gp < min_coeff_)
                        continue;
                    nodes_.push_back(
                        {mirror_point(parent.image, s.p0, s.p1), gp, si, int(pi), depth});
                }
            }
            level_begin = level_end;
            level_end = nodes_.size();
        }
    }

    int seg_of(const ImageNode &node, int bounce) const {
        // bounce counts 1..depth from the TX side; the node chain stores them
        // deepest-last, so walk up (depth - bounce) parents.
        const ImageNode *n = &node;
        for (int up = node.depth; up > bounce; --up)
            n = &nodes_[size_t(n->parent)];
        return n->seg;
    }

    // Unfold the candidate reflection sequence against rx. Fills pts with
    // tx, q_1..q_k, rx on success.
    bool validate_node(const ImageNode &node, const Vec2 &rx, std::vector<Vec2> &pts) const {
        const int k = node.depth;
        pts[size_t(k) + 1] = rx;
        Vec2 target = rx;
        const ImageNode *n = &node;
        for (int i = k; i >= 1; --i) {
            const Surface &s = surfaces_[size_t(n->seg)];
            const auto t = segment_intersect_t(target, n->image, s.p0, s.p1);
            if (!t || *t <= 1e-12 || *t >= 1.0 - 1e-12)
                return false;
            const Vec2 q = target + (n->image - target) * *t;
            pts[size_t(i)] = q;
            target = q;
            n = &nodes_[size_t(n->parent)];
        }
        pts[0] = scene_.tx;
        return true;
    }

    // Transmission factor of one leg: walls attenuate per crossing, boxes
    // once per traversal. refl_a / refl_b are surfaces touched at the leg's
    // endpoints and are excluded at those endpoints.
    double leg_transmission(const Vec2 &a, const Vec2 &b, int refl_a, int refl_b) const {
        double factor = 1.0;
        const double eps = 1e-9;
        for (int si = 0; si < int(surfaces_.size()); ++si) {
            const Surface &s = surfaces_[size_t(si)];
            if (s.box_index >= 0)
                continue; // box faces handled as whole boxes below
            const auto t = segment_intersect_t(a, b, s.p0, s.p1);
            if (!t)
                continue;
            const double t_lo = (si == refl_a) ? eps : 1e-12;
            const double t_hi = (si == refl_b) ? 1.0 - eps : 1.0 - 1e-12;
            if (*t > t_lo && *t < t_hi)
                factor *= s.trans_factor;
        }
        for (int bi = 0; bi < int(box_loss_factor_.size()); ++bi) {
            if (segment_passes_box(a, b, bi, refl_a, refl_b))
                factor *= box_loss_factor_[size_t(bi)];
        }
        return factor;
    }

    bool segment_passes_box(const Vec2 &a, const Vec2 &b, int box_index, int refl_a,
                            int refl_b) const {
        const Rect r = scene_.obstacles[size_t(box_index)].rect();
        // Liang-Barsky interval of the segment inside the box.
        const double dx = b.x - a.x, dy = b.y - a.y;
        double t0 = 0.0, t1 = 1.0;
        const double p[4] = {-dx, dx, -dy, dy};
        const double q[4] = {a.x - r.lo.x, r.hi.x - a.x, a.y - r.lo.y, r.hi.y - a.y};
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
        // Reflections off this box's own faces touch the boundary with a
        // degenerate interval; require real traversal depth.
        const bool endpoint_on_box =
            (refl_a >= 0 && surfaces_[size_t(refl_a)].box_index == box_index) ||
            (refl_b >= 0 && surfaces_[size_t(refl_b)].box_index == box_index);
        const double min_depth = endpoint_on_box ? 1e-6 : 1e-12;
        return (t1 - t0) > min_depth;
    }

    Scene scene_;
    int max_order_;
    double min_coeff_;
    std::vector<Surface> surfaces_;
    std::vector<double> box_loss_factor_;
    std::vector<ImageNode> nodes_;
};

inline std::vector<PathContribution> trace_paths(const Scene &scene, const Vec2 &rx,
                                                 int max_order) {
    return SceneTracer(scene, max_order).trace(rx);
}

// Coherent phasor sum over paths: E = sum coeff * (lambda/(4 pi d)) *
// exp(-j 2 pi d / lambda), returned as 20*log10|E|.
inline double rssi_at(const std::vector<PathContribution> &paths, double freq_hz) {
    if (paths.empty())
        throw ContractError("rssi_at: empty path list");
    const double lambda = kSpeedOfLight / freq_hz;
    std::complex<double> field(0.0, 0.0);
    for (const auto &p : paths) {
        const double amp = p.coeff * lambda / (4.0 * M_PI * p.length);
        const double phase = -2.0 * M_PI * p.length / lambda;
        field += std::polar(amp, phase);
    }
    const double mag = std::abs(field);
    if (mag < 1e-150)
        return kSilenceDb;
    return 20.0 * std::log10(mag);
}

// Simulates RSSI over every cell center. Tracing is shared across the
// frequency list since path geometry is frequency independent.
inline std::vector<Heatmap> simulate_heatmaps(const Scene &scene, const GridSpec &grid,
                                              const std::vector<double> &freqs_hz, int max_order) {
    if (grid.nx <= 0 || grid.ny <= 0)
        throw ContractError("simulate_heatmaps: empty grid");
    const auto t_start = std::chrono::steady_clock::now();
    SceneTracer tracer(scene, max_order);

    std::vector<Heatmap> maps(freqs_hz.size());
    for (size_t fi = 0; fi < freqs_hz.size(); ++fi) {
        maps[fi].grid = grid;
        maps[fi].freq_hz = freqs_hz[fi];
        maps[fi].rssi_db.assign(size_t(grid.nx) * grid.ny, kSilenceDb);
    }

    parallel_for(0, int64_t(grid.nx) * grid.ny, [&](int64_t cell) {
        const int ix = int(cell % grid.nx);
        const int iy = int(cell / grid.nx);
        const auto paths = tracer.trace(grid.center(ix, iy));
        for (size_t fi = 0; fi < freqs_hz.size(); ++fi)
            maps[fi].rssi_db[size_t(cell)] = rssi_at(paths, freqs_hz[fi]);
    });

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    for (auto &m : maps) {
        m.normalize_floor();
        m.sim_seconds = elapsed;
    }
    return maps;
}

inline Heatmap simulate_heatmap(const Scene &scene, const GridSpec &grid, double freq_hz,
                                int max_order) {
    return simulate_heatmaps(scene, grid, {freq_hz}, max_order)[0];
}

} // namespace rfdiff
