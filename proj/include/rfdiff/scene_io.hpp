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

#include <string>

#include <json.hpp>

#include "rfdiff/scene.hpp"

namespace rfdiff {

// Scene files are UTF-8 JSON with top-level keys `bounds`, `walls`,
// `obstacles`, `tx`, `seed`. ordered_json keeps the key order stable so the
// same scene always serializes to identical bytes.
using ojson = nlohmann::ordered_json;

namespace detail {

inline ojson material_to_json(const Material &m) {
    ojson j;
    j["name"] = m.name;
    j["reflection_coeff"] = m.reflection_coeff;
    j["transmission_loss_db"] = m.transmission_loss_db;
    if (m.refractive_index)
        j["refractive_index"] = *m.refractive_index;
    return j;
}

inline Material material_from_json(const ojson &j) {
    Material m;
    m.name = j.at("name").get<std::string>();
    m.reflection_coeff = j.at("reflection_coeff").get<double>();
    m.transmission_loss_db = j.at("transmission_loss_db").get<double>();
    if (j.contains("refractive_index"))
        m.refractive_index = j.at("refractive_index").get<double>();
    m.validate();
    return m;
}

} // namespace detail

inline std::string serialize_scene(const Scene &scene) {
    scene.validate();
    ojson j;
    j["bounds"] = {{"lo", {scene.bounds.lo.x, scene.bounds.lo.y}},
                   {"hi", {scene.bounds.hi.x, scene.bounds.hi.y}}};
    j["walls"] = ojson::array();
    for (const auto &w : scene.walls) {
        ojson jw;
        jw["p0"] = {w.p0.x, w.p0.y};
        jw["p1"] = {w.p1.x, w.p1.y};
        jw["material"] = detail::material_to_json(w.material);
        jw["is_opening"] = w.is_opening;
        j["walls"].push_back(jw);
    }
    j["obstacles"] = ojson::array();
    for (const auto &b : scene.obstacles) {
        ojson jb;
        jb["center"] = {b.center.x, b.center.y};
        jb["half_extents"] = {b.half_extents.x, b.half_extents.y};
        jb["material"] = detail::material_to_json(b.material);
        jb["movable"] = b.movable;
        j["obstacles"].push_back(jb);
    }
    j["tx"] = {scene.tx.x, scene.tx.y};
    j["seed"] = scene.seed;
    return j.dump(2) + "\n";
}

inline Scene parse_scene(const std::string &text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw DataError("scene parse error: " + std::string(e.what()));
    }
    try {
        Scene s;
        const auto &jb = j.at("bounds");
        s.bounds.lo = {jb.at("lo").at(0).get<double>(), jb.at("lo").at(1).get<double>()};
        s.bounds.hi = {jb.at("hi").at(0).get<double>(), jb.at("hi").at(1).get<double>()};
        for (const auto &jw : j.at("walls")) {
            WallSegment w;
            w.p0 = {jw.at("p0").at(0).get<double>(), jw.at("p0").at(1).get<double>()};
            w.p1 = {jw.at("p1").at(0).get<double>(), jw.at("p1").at(1).get<double>()};
            w.material = detail::material_from_json(jw.at("material"));
            w.is_opening = jw.at("is_opening").get<bool>();
            w.validate();
            s.walls.push_back(w);
        }
        for (const auto &jo : j.at("obstacles")) {
            BoxObstacle b;
            b.center = {jo.at("center").at(0).get<double>(), jo.at("center").at(1).get<double>()};
            b.half_extents = {jo.at("half_extents").at(0).get<double>(),
                              jo.at("half_extents").at(1).get<double>()};
            b.material = detail::material_from_json(jo.at("material"));
            b.movable = jo.at("movable").get<bool>();
            b.validate();
            s.obstacles.push_back(b);
        }
        s.tx = {j.at("tx").at(0).get<double>(), j.at("tx").at(1).get<double>()};
        s.seed = j.at("seed").get<int64_t>();
        s.validate();
        return s;
    } catch (const nlohmann::json::exception &e) {
        throw DataError("scene document invalid: " + std::string(e.what()));
    } catch (const ContractError &e) {
        throw DataError("scene validation failed: " + std::string(e.what()));
    }
}

} // namespace rfdiff
