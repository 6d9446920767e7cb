#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace axmlp {

inline unsigned worker_count() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

// Static block partition of [0, n) over worker threads. Work items must be
// independent; the first exception thrown (if any) is rethrown on the caller.
template <typename Fn> void parallel_for(size_t n, Fn&& fn) {
    if (n == 0)
        return;
    unsigned workers = std::min<size_t>(worker_count(), n);
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    std::exception_ptr first_error = nullptr;
    std::atomic<bool> failed{false};
    std::mutex err_mu;
    for (unsigned w = 0; w < workers; ++w) {
        size_t lo = n * w / workers;
        size_t hi = n * (w + 1) / workers;
        threads.emplace_back([&, lo, hi] {
            try {
                for (size_t i = lo; i < hi; ++i) {
                    if (failed.load(std::memory_order_relaxed))
                        return;
                    fn(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error)
                    first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
            }
        });
    }
    for (auto& t : threads)
        t.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

} // namespace axmlp
