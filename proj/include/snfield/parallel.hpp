#pragma once

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace snfield {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(trial) for trial in [0, n). Each trial writes only its own slot in
// caller-owned storage, so results are identical for any thread count.
template <class F>
void parallel_trials(long n, int threads, F&& fn) {
    threads = resolve_threads(threads);
    if (threads <= 1 || n <= 1) {
        for (long t = 0; t < n; ++t) fn(t);
        return;
    }
    std::atomic<long> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            const long t = next.fetch_add(1, std::memory_order_relaxed);
            if (t >= n || failed.load(std::memory_order_relaxed)) return;
            try {
                fn(t);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace snfield
