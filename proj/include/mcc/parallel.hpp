#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace mcc {

namespace detail {
inline std::atomic<int>& max_threads_storage() {
    static std::atomic<int> n{1};
    return n;
}
}  // namespace detail

// Thread budget for the parallel kernels. 0 selects hardware concurrency.
// Affects wall clock only: every kernel assigns disjoint output ranges with
// sequential per-element inner loops, so results are identical for any value.
inline void set_max_threads(int n) {
    detail::max_threads_storage().store(n < 0 ? 0 : n);
}

inline int max_threads() {
    int n = detail::max_threads_storage().load();
    if (n == 0) {
        n = int(std::thread::hardware_concurrency());
        if (n == 0) n = 1;
    }
    return n;
}

// Runs fn(i) for i in [0, count), split into contiguous chunks across
// threads. fn must only write state owned by index i.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    const int want = max_threads();
    if (want <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const std::size_t n_threads = std::min<std::size_t>(want, count);
    const std::size_t chunk = (count + n_threads - 1) / n_threads;
    std::vector<std::thread> workers;
    workers.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& w : workers) w.join();
}

}  // namespace mcc
