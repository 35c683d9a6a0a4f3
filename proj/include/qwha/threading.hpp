#pragma once

#include "qwha/types.hpp"

#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace qwha {

// Thread-count resolution: explicit request > QWHA_THREADS > hardware.
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("QWHA_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Static partition of [0, n) across `threads` workers. Each index is
// processed exactly once and fn(i) must touch only state owned by index i,
// which makes the result independent of the thread count.
inline void parallel_for(Index n, int threads, const std::function<void(Index)>& fn) {
    if (n <= 0) return;
    threads = std::min<Index>(std::max(threads, 1), n);
    if (threads == 1) {
        for (Index i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::exception_ptr error;
    std::mutex error_mu;
    for (int t = 0; t < threads; ++t) {
        const Index begin = n * t / threads;
        const Index end = n * (t + 1) / threads;
        pool.emplace_back([&, begin, end] {
            try {
                for (Index i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace qwha
