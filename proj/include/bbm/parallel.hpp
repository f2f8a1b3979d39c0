#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bbm {

// Runs f(i) for i in [0, n). Items must be independent; callers write results
// into per-index slots and reduce in index order afterwards, so the outcome
// does not depend on the thread count.
template <class F>
void parallel_for(std::uint64_t n, int threads, F&& f) {
    if (threads <= 1 || n <= 1) {
        for (std::uint64_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            std::uint64_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                f(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    int k = std::min<std::uint64_t>(static_cast<std::uint64_t>(threads), n);
    pool.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace bbm
