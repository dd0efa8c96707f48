#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace stobas {

/// Number of worker threads to use when `requested` is 0 (= auto).
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Static block partition of [0, n) across threads. Work items must be
/// independent; determinism is the caller's responsibility (per-item seeding).
template <typename Fn>
void parallel_for(std::ptrdiff_t n, int threads, Fn&& fn) {
    threads = std::min<std::ptrdiff_t>(resolve_threads(threads), n > 0 ? n : 1);
    if (threads <= 1) {
        for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::ptrdiff_t chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        std::ptrdiff_t lo = t * chunk;
        std::ptrdiff_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn, &first_error, &error_mutex] {
            try {
                for (std::ptrdiff_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace stobas
