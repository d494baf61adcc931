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
#include <optional>

namespace rfdiff {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2 &o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2 &o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    bool operator==(const Vec2 &o) const { return x == o.x && y == o.y; }
};

inline double dot(const Vec2 &a, const Vec2 &b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2 &a, const Vec2 &b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2 &a) { return std::sqrt(a.x * a.x + a.y * a.y); }
inline double distance(const Vec2 &a, const Vec2 &b) { return norm(a - b); }

// Axis-aligned rectangle, min-corner / max-corner.
struct Rect {
    Vec2 lo;
    Vec2 hi;

    double width() const { return hi.x - lo.x; }
    double height() const { return hi.y - lo.y; }
    double area() const { return width() * height(); }

    bool contains(const Vec2 &p, double eps = 0.0) const {
        return p.x >= lo.x - eps && p.x <= hi.x + eps && p.y >= lo.y - eps && p.y <= hi.y + eps;
    }
    bool contains_strict(const Vec2 &p) const {
        return p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y;
    }
    bool overlaps(const Rect &o) const {
        return lo.x < o.hi.x && o.lo.x < hi.x && lo.y < o.hi.y && o.lo.y < hi.y;
    }
    bool operator==(const Rect &o) const { return lo == o.lo && hi == o.hi; }
};

// Mirror a point across the infinite line through a-b.
inline Vec2 mirror_point(const Vec2 &p, const Vec2 &a, const Vec2 &b) {
    const Vec2 d = b - a;
    const double len2 = dot(d, d);
    const double t = dot(p - a, d) / len2;
    const Vec2 foot = a + d * t;
    return foot + (foot - p);
}

// Intersection of segments p-q and a-b. Returns the parameter t along p-q
// in [0,1] when the segments properly intersect.
inline std::optional<double> segment_intersect_t(const Vec2 &p, const Vec2 &q, const Vec2 &a,
                                                 const Vec2 &b, double eps = 1e-12) {
    const Vec2 r = q - p;
    const Vec2 s = b - a;
    const double denom = cross(r, s);
    if (std::abs(denom) < eps)
        return std::nullopt; // parallel
    const double t = cross(a - p, s) / denom;
    const double u = cross(a - p, r) / denom;
    if (t < -eps || t > 1.0 + eps || u < -eps || u > 1.0 + eps)
        return std::nullopt;
    return std::clamp(t, 0.0, 1.0);
}

// Parameter u on segment a-b where the line through p-q crosses it, or
// nullopt when the line misses the segment.
inline std::optional<double> line_hits_segment(const Vec2 &p, const Vec2 &q, const Vec2 &a,
                                               const Vec2 &b, double eps = 1e-12) {
    const Vec2 r = q - p;
    const Vec2 s = b - a;
    const double denom = cross(r, s);
    if (std::abs(denom) < eps)
        return std::nullopt;
    const double u = cross(a - p, r) / denom;
    if (u < -eps || u > 1.0 + eps)
        return std::nullopt;
    return std::clamp(u, 0.0, 1.0);
}

} // namespace rfdiff
