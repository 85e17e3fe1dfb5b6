// parallel.hpp — Deterministic work pool over independent grid indices

#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

namespace vapormem::detail {

// Runs fn(i) for i in [0, n) on `jobs` workers. Each index is processed by
// exactly one worker and writes only its own output slot, so results are
// independent of the schedule. If several indices throw, the lowest index
// wins, which keeps error reporting deterministic too.
template <typename Fn>
inline void parallel_for_indexed(std::size_t n, unsigned jobs, Fn&& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::size_t first_error_index = std::numeric_limits<std::size_t>::max();

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (i < first_error_index) {
                    first_error_index = i;
                    first_error = std::current_exception();
                }
            }
        }
    };

    std::vector<std::thread> pool;
    const unsigned count = static_cast<unsigned>(std::min<std::size_t>(jobs, n));
    pool.reserve(count);
    for (unsigned k = 0; k < count; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    if (first_error) std::rethrow_exception(first_error);
}

} // namespace vapormem::detail
