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

#include <array>
#include <optional>
#include <string>

#include "rfdiff/error.hpp"

namespace rfdiff {

struct Material {
    std::string name;
    double reflection_coeff = 0.0;    // |Gamma|, unitless in [0,1]
    double transmission_loss_db = 0.0; // per wall crossing, >= 0
    std::optional<double> refractive_index; // unitless, >= 1 when present

    void validate() const {
        if (reflection_coeff < 0.0 || reflection_coeff > 1.0)
            throw ContractError("Material '" + name + "': reflection_coeff " +
                                std::to_string(reflection_coeff) + " outside [0,1]");
        if (transmission_loss_db < 0.0)
            throw ContractError("Material '" + name + "': transmission_loss_db " +
                                std::to_string(transmission_loss_db) + " negative");
        if (refractive_index && *refractive_index < 1.0)
            throw ContractError("Material '" + name + "': refractive_index " +
                                std::to_string(*refractive_index) + " below 1");
    }

    bool operator==(const Material &o) const {
        return name == o.name && reflection_coeff == o.reflection_coeff &&
               transmission_loss_db == o.transmission_loss_db &&
               refractive_index == o.refractive_index;
    }
};

// Fixed palette of six indoor materials. Reflection coefficients are kept
// pairwise distinct so the material raster channel identifies them.
inline const std::array<Material, 6> &material_palette() {
    static const std::array<Material, 6> palette = {{
        {"concrete", 0.80, 12.0, 2.55},
        {"brick", 0.70, 10.0, 2.00},
        {"plasterboard", 0.30, 3.0, 1.50},
        {"wood", 0.45, 6.0, 1.80},
        {"glass", 0.20, 2.0, 1.47},
        {"metal", 0.95, 30.0, std::nullopt},
    }};
    return palette;
}

inline const Material &material_by_name(const std::string &name) {
    for (const auto &m : material_palette())
        if (m.name == name)
            return m;
    throw DataError("unknown material '" + name + "'");
}

} // namespace rfdiff
