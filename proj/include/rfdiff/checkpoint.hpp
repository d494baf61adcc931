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

#include <fstream>

#include <json.hpp>

#include "rfdiff/nn.hpp"

namespace rfdiff {

// Checkpoint format: one JSON header line mapping parameter names to
// {shape, offset} (offsets in floats), followed by the little-endian f32
// blob of all parameters back to back.

inline void save_checkpoint(const ParamStore &ps, const std::string &path) {
    nlohmann::ordered_json header;
    int64_t offset = 0;
    for (const auto &[name, t] : ps.items()) {
        header[name] = {{"shape", t.shape()}, {"offset", offset}};
        offset += t.numel();
    }
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw DataError("cannot write checkpoint " + path);
    f << header.dump() << "\n";
    for (const auto &[name, t] : ps.items())
        f.write(reinterpret_cast<const char *>(t.value().data()),
                std::streamsize(t.value().size() * sizeof(float)));
    if (!f)
        throw DataError("short write on checkpoint " + path);
}

// allow_missing supports warm starts: parameters absent from the file keep
// their initialization (the video model loads image checkpoints this way).
inline void load_checkpoint(ParamStore &ps, const std::string &path, bool allow_missing = false) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw DataError("cannot read checkpoint " + path);
    std::string header_line;
    if (!std::getline(f, header_line))
        throw DataError("checkpoint " + path + " missing header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_line);
    } catch (const nlohmann::json::parse_error &e) {
        throw DataError("checkpoint header invalid: " + std::string(e.what()));
    }
    const std::streampos blob_start = f.tellg();
    for (auto &[name, t] : ps.items()) {
        if (!header.contains(name)) {
            if (allow_missing)
                continue;
            throw DataError("checkpoint " + path + " missing parameter '" + name + "'");
        }
        const auto &entry = header.at(name);
        const Shape shape = entry.at("shape").get<Shape>();
        if (shape != t.shape())
            throw DataError("checkpoint parameter '" + name + "' has shape " + shape_str(shape) +
                            ", model expects " + shape_str(t.shape()));
        const int64_t offset = entry.at("offset").get<int64_t>();
        f.seekg(blob_start + std::streampos(offset * int64_t(sizeof(float))));
        f.read(reinterpret_cast<char *>(t.value().data()),
               std::streamsize(t.value().size() * sizeof(float)));
        if (!f)
            throw DataError("checkpoint " + path + " truncated at parameter '" + name + "'");
    }
}

} // namespace rfdiff
