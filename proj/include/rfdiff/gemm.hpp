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

#include <Eigen/Core>

#include "rfdiff/parallel.hpp"

namespace rfdiff {

// Row-major f32 GEMM wrappers over Eigen, single threaded by design: the
// hot loops parallelize one level up (batch items, eval samples, simulator
// cells), which keeps every accumulation order fixed.

namespace detail {

using EMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

} // namespace detail

// C = A(m,k) * B(k,n), optionally accumulating into C.
inline void gemm_nn(const float *a, const float *b, float *c, int m, int k, int n,
                    bool accumulate = false) {
    detail::CMap A(a, m, k);
    detail::CMap B(b, k, n);
    detail::MMap C(c, m, n);
    if (accumulate)
        C.noalias() += A * B;
    else
        C.noalias() = A * B;
}

// C = A^T * B with A stored (k,m): output is (m,n).
inline void gemm_tn(const float *a, const float *b, float *c, int m, int k, int n,
                    bool accumulate = false) {
    detail::CMap A(a, k, m);
    detail::CMap B(b, k, n);
    detail::MMap C(c, m, n);
    if (accumulate)
        C.noalias() += A.transpose() * B;
    else
        C.noalias() = A.transpose() * B;
}

// C = A(m,k) * B^T with B stored (n,k).
inline void gemm_nt(const float *a, const float *b, float *c, int m, int k, int n,
                    bool accumulate = false) {
    detail::CMap A(a, m, k);
    detail::CMap B(b, n, k);
    detail::MMap C(c, m, n);
    if (accumulate)
        C.noalias() += A * B.transpose();
    else
        C.noalias() = A * B.transpose();
}

} // namespace rfdiff
