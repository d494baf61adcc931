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

#include <functional>

#include "rfdiff/tensor.hpp"

namespace rfdiff {

// Compares the reverse-mode gradient of a scalar-valued function against
// central finite differences, component-wise. Returns the max relative
// error over all components of x.
inline double grad_check(const std::function<Tensor(const Tensor &)> &f, Tensor &x,
                         double eps = 1e-3) {
    x.zero_grad();
    {
        Tensor loss = f(x);
        if (loss.numel() != 1)
            throw ContractError("grad_check: f must be scalar-valued");
        backward(loss);
    }
    const std::vector<float> analytic = x.grad();

    std::vector<double> numeric(x.value().size());
    {
        NoGradGuard ng;
        for (size_t i = 0; i < x.value().size(); ++i) {
            const float orig = x.value()[i];
            const double h = eps * std::max(1.0, std::abs(double(orig)));
            x.value()[i] = float(orig + h);
            const double up = double(f(x).item());
            x.value()[i] = float(orig - h);
            const double down = double(f(x).item());
            x.value()[i] = orig;
            numeric[i] = (up - down) / (2.0 * h);
        }
    }

    // Values are f32, so central differences cannot resolve components far
    // below the dominant gradient scale; the floor keeps that noise out of
    // the relative error.
    double gmax = 0.0;
    for (size_t i = 0; i < numeric.size(); ++i)
        gmax = std::max({gmax, std::abs(double(analytic[i])), std::abs(numeric[i])});
    const double floor = std::max(1e-3, 1e-2 * gmax);

    double max_rel = 0.0;
    for (size_t i = 0; i < numeric.size(); ++i) {
        const double a = double(analytic[i]);
        const double denom = std::max(floor, std::abs(a) + std::abs(numeric[i]));
        max_rel = std::max(max_rel, std::abs(a - numeric[i]) / denom);
    }
    return max_rel;
}

} // namespace rfdiff
