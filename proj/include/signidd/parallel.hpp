#pragma once

#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace signidd {

// Worker cap: SIGN_IDD_THREADS when set, otherwise hardware concurrency.
inline int worker_thread_cap() {
    if (const char* env = std::getenv("SIGN_IDD_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs f(i) for i in [0, n). Each index is computed exactly once and writes
// only its own output slot, so results match the sequential order bit for
// bit regardless of the thread count. The first exception thrown by any
// worker is rethrown after the join.
inline void parallel_for(int n, const std::function<void(int)>& f) {
    const int threads = std::min(worker_thread_cap(), n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (int i = t; i < n; i += threads) f(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace signidd
