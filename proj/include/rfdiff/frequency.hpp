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
#include <string>
#include <vector>

#include "rfdiff/error.hpp"

namespace rfdiff {

constexpr double kSpeedOfLight = 299792458.0;

struct FrequencyPlan {
    std::vector<double> frequencies; // Hz, strictly increasing
    std::string band_label;          // "wifi" or "mmwave"

    void validate() const {
        if (frequencies.empty())
            throw ContractError("FrequencyPlan: empty");
        double prev = 0.0;
        for (double f : frequencies) {
            if (f <= prev)
                throw ContractError("FrequencyPlan: frequencies must be strictly increasing and > 0");
            prev = f;
        }
    }
};

// FMCW sweep sampling: f = f_min + B*t/T_c with t stepped at 1/R_s.
inline FrequencyPlan fmcw_frequencies(double f_min, double bandwidth, double chirp_len,
                                      double sample_rate, int n) {
    if (f_min <= 0.0 || bandwidth <= 0.0 || chirp_len <= 0.0 || sample_rate <= 0.0 || n <= 0)
        throw ContractError("fmcw_frequencies: all parameters must be positive");
    if (double(n) / sample_rate > chirp_len)
        throw ContractError("fmcw_frequencies: sample step exceeds the sweep length");
    FrequencyPlan plan;
    plan.band_label = "mmwave";
    plan.frequencies.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        const double t = double(i) / sample_rate;
        plan.frequencies.push_back(f_min + bandwidth * t / chirp_len);
    }
    plan.validate();
    return plan;
}

// Default chirp plan, first 10 channels: 77, 77.008, ..., 77.072 GHz.
inline FrequencyPlan default_mmwave_plan(int n = 10) {
    return fmcw_frequencies(77e9, 4e9, 20e-6, 25e6, n);
}

// 2.4 GHz plus ten 5 GHz channels at 20 MHz spacing.
inline FrequencyPlan wifi_frequencies() {
    FrequencyPlan plan;
    plan.band_label = "wifi";
    plan.frequencies.push_back(2.4e9);
    for (int i = 0; i < 10; ++i)
        plan.frequencies.push_back(5.16e9 + 0.02e9 * i);
    plan.validate();
    return plan;
}

// Log-scaled frequency shared across Wi-Fi and mmWave bands.
inline double normalized_frequency(double freq_hz) {
    const double lo = std::log(2.4e9);
    const double hi = std::log(77.1e9);
    return (std::log(freq_hz) - lo) / (hi - lo);
}

} // namespace rfdiff
