#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace volterra {

// Deterministic index-sliced parallel loop. fn(index, slot) runs each index exactly
// once; slot identifies the worker so callers can accumulate into per-worker storage
// and combine in fixed order afterwards. Results must not depend on scheduling, only
// on the index -> slot assignment, which is a pure function of (n, threads).
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    threads = std::max(1, threads);
    if (threads == 1 || n < 2 * threads) {
        for (int i = 0; i < n; ++i) fn(i, 0);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    const int chunk = (n + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
        const int lo = w * chunk;
        const int hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, w, &fn] {
            for (int i = lo; i < hi; ++i) fn(i, w);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace volterra
