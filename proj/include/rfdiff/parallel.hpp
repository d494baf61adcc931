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
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace rfdiff {

inline int &thread_count_ref() {
    static int n = [] {
        if (const char *env = std::getenv("RFDIFF_THREADS"))
            return std::max(1, std::atoi(env));
        return int(std::max(1u, std::thread::hardware_concurrency()));
    }();
    return n;
}

inline void set_thread_count(int n) { thread_count_ref() = std::max(1, n); }
inline int thread_count() { return thread_count_ref(); }

// Worker threads set this so nested loops (and the GEMM splits) run serial.
inline bool &in_parallel_worker() {
    thread_local bool flag = false;
    return flag;
}

// Static-partition parallel loop. Each index is processed by exactly one
// thread and writes must be disjoint per index, which keeps results
// independent of the thread count.
inline void parallel_for(int64_t begin, int64_t end, const std::function<void(int64_t)> &fn) {
    const int64_t n = end - begin;
    if (n <= 0)
        return;
    const int nt = in_parallel_worker() ? 1 : int(std::min<int64_t>(thread_count(), n));
    if (nt <= 1) {
        for (int64_t i = begin; i < end; ++i)
            fn(i);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(size_t(nt));
    const int64_t chunk = (n + nt - 1) / nt;
    for (int t = 0; t < nt; ++t) {
        const int64_t lo = begin + t * chunk;
        const int64_t hi = std::min(end, lo + chunk);
        if (lo >= hi)
            break;
        workers.emplace_back([lo, hi, &fn] {
            in_parallel_worker() = true;
            for (int64_t i = lo; i < hi; ++i)
                fn(i);
            in_parallel_worker() = false;
        });
    }
    for (auto &w : workers)
        w.join();
}

} // namespace rfdiff
