#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace stabman {

/// Process-wide worker count used by parallel loops (1 = run inline).
inline std::size_t& worker_threads() {
    static std::size_t n = 1;
    return n;
}

inline bool& inside_worker() {
    thread_local bool flag = false;
    return flag;
}

/// Runs fn(i) for i in [0, count). Results must be written by index so the
/// outcome does not depend on scheduling. The first exception is rethrown.
/// Nested calls from a worker run inline.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn, std::size_t threads = worker_threads()) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (inside_worker()) threads = 1;
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            inside_worker() = true;
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = count;
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace stabman
