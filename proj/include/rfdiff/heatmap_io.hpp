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

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "rfdiff/propagation.hpp"

namespace rfdiff {

// Heatmaps persist as (a) CSV of dB values, row-major, and (b) 8-bit
// grayscale PGM of the normalized form.

inline std::string heatmap_to_csv(const Heatmap &hm) {
    std::string out;
    out.reserve(hm.rssi_db.size() * 12);
    char buf[40];
    for (int iy = 0; iy < hm.grid.ny; ++iy) {
        for (int ix = 0; ix < hm.grid.nx; ++ix) {
            std::snprintf(buf, sizeof buf, "%.6f", hm.at(ix, iy));
            if (ix)
                out += ',';
            out += buf;
        }
        out += '\n';
    }
    return out;
}

inline void write_heatmap_csv(const Heatmap &hm, const std::string &path) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw DataError("cannot write " + path);
    f << heatmap_to_csv(hm);
}

inline std::string heatmap_to_pgm(const Heatmap &hm) {
    std::ostringstream out;
    out << "P5\n" << hm.grid.nx << " " << hm.grid.ny << "\n255\n";
    for (size_t i = 0; i < hm.rssi_db.size(); ++i) {
        const int v = int(std::lround(hm.pixel(i) * 255.0));
        out.put(char(std::clamp(v, 0, 255)));
    }
    return out.str();
}

inline void write_heatmap_pgm(const Heatmap &hm, const std::string &path) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw DataError("cannot write " + path);
    f << heatmap_to_pgm(hm);
}

inline std::vector<double> read_heatmap_csv(const std::string &path, int &nx_out, int &ny_out) {
    std::ifstream f(path);
    if (!f)
        throw DataError("cannot read " + path);
    std::vector<double> values;
    std::string line;
    int nx = -1, ny = 0;
    while (std::getline(f, line)) {
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string tok;
        int count = 0;
        while (std::getline(ss, tok, ',')) {
            values.push_back(std::stod(tok));
            ++count;
        }
        if (nx < 0)
            nx = count;
        else if (count != nx)
            throw DataError("ragged CSV row in " + path);
        ++ny;
    }
    nx_out = nx;
    ny_out = ny;
    return values;
}

} // namespace rfdiff
