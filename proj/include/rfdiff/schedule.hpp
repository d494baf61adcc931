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

#include <vector>

#include "rfdiff/ops.hpp"

namespace rfdiff {

// Linear variance schedule. Arrays are double precision; tensors touched by
// the network stay f32.
struct NoiseSchedule {
    int steps = 0;                 // T
    std::vector<double> beta;      // beta[t-1] for t in [1, T]
    std::vector<double> alpha;     // 1 - beta
    std::vector<double> alpha_bar; // cumulative product

    static NoiseSchedule linear(int T, double beta_start, double beta_end) {
        if (T < 2 || beta_start <= 0.0 || beta_end <= beta_start || beta_end >= 1.0)
            throw ContractError("NoiseSchedule: need 0 < beta_start < beta_end < 1 and T >= 2");
        NoiseSchedule s;
        s.steps = T;
        s.beta.resize(size_t(T));
        s.alpha.resize(size_t(T));
        s.alpha_bar.resize(size_t(T));
        double prod = 1.0;
        for (int t = 0; t < T; ++t) {
            s.beta[size_t(t)] = beta_start + (beta_end - beta_start) * double(t) / double(T - 1);
            s.alpha[size_t(t)] = 1.0 - s.beta[size_t(t)];
            prod *= s.alpha[size_t(t)];
            s.alpha_bar[size_t(t)] = prod;
        }
        s.validate();
        return s;
    }

    void validate() const {
        double prev_beta = 0.0;
        double prev_ab = 1.0;
        for (int t = 0; t < steps; ++t) {
            if (beta[size_t(t)] <= prev_beta || beta[size_t(t)] >= 1.0)
                throw ContractError("NoiseSchedule: beta must be strictly increasing in (0,1)");
            if (alpha_bar[size_t(t)] >= prev_ab)
                throw ContractError("NoiseSchedule: alpha_bar must be strictly decreasing");
            prev_beta = beta[size_t(t)];
            prev_ab = alpha_bar[size_t(t)];
        }
        if (alpha_bar[size_t(steps - 1)] >= 0.01)
            throw ContractError("NoiseSchedule: alpha_bar at T must fall below 0.01");
    }

    // alpha_bar with the t=0 boundary (no noise) convention.
    double alpha_bar_at(int t) const {
        if (t < 0 || t > steps)
            throw ContractError("NoiseSchedule: t out of range");
        return t == 0 ? 1.0 : alpha_bar[size_t(t - 1)];
    }
    double beta_at(int t) const {
        if (t < 1 || t > steps)
            throw ContractError("NoiseSchedule: t out of range");
        return beta[size_t(t - 1)];
    }
    double alpha_at(int t) const { return 1.0 - beta_at(t); }

    // Coefficients of the analytic posterior q(z_{t-1} | z_t, z_0):
    // mean = coef_z0 * z0 + coef_zt * z_t, variance beta_tilde.
    struct Posterior {
        double coef_z0;
        double coef_zt;
        double beta_tilde;
    };
    Posterior posterior(int t) const {
        if (t < 1 || t > steps)
            throw ContractError("NoiseSchedule: posterior t out of range");
        const double ab_t = alpha_bar_at(t);
        const double ab_prev = alpha_bar_at(t - 1);
        const double b_t = beta_at(t);
        const double a_t = alpha_at(t);
        Posterior p;
        p.coef_z0 = std::sqrt(ab_prev) * b_t / (1.0 - ab_t);
        p.coef_zt = std::sqrt(a_t) * (1.0 - ab_prev) / (1.0 - ab_t);
        p.beta_tilde = (1.0 - ab_prev) / (1.0 - ab_t) * b_t;
        return p;
    }
};

inline NoiseSchedule make_schedule(int T = 1000, double beta_start = 1e-4,
                                   double beta_end = 0.02) {
    return NoiseSchedule::linear(T, beta_start, beta_end);
}

// Forward process sample: z_t = sqrt(ab_t) z0 + sqrt(1 - ab_t) eps.
inline Tensor q_sample(const Tensor &z0, int t, const Tensor &eps, const NoiseSchedule &sched) {
    if (t < 1 || t > sched.steps)
        throw ContractError("q_sample: t outside [1, T]");
    detail::check_same_shape("q_sample", z0, eps);
    const double ab = sched.alpha_bar_at(t);
    return add(scale(z0, float(std::sqrt(ab))), scale(eps, float(std::sqrt(1.0 - ab))));
}

// Analytic posterior mean (and variance) given the true z0.
inline std::pair<Tensor, double> posterior_stats(const Tensor &z_t, const Tensor &z0, int t,
                                                 const NoiseSchedule &sched) {
    detail::check_same_shape("posterior_stats", z_t, z0);
    const auto p = sched.posterior(t);
    Tensor mean = add(scale(z0, float(p.coef_z0)), scale(z_t, float(p.coef_zt)));
    return {mean, p.beta_tilde};
}

} // namespace rfdiff
