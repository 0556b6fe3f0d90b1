#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dirsmooth {

/// Statically partitioned parallel loop. Work item i must only write state
/// owned by item i; results are then independent of the thread count, so
/// parallel runs reproduce sequential ones exactly.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                         int threads = 0) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(threads),
                                                count == 0 ? 1 : count);
    if (t <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex err_mutex;
    for (std::size_t k = 0; k < t; ++k) {
        pool.emplace_back([&, k] {
            const std::size_t lo = count * k / t;
            const std::size_t hi = count * (k + 1) / t;
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace dirsmooth
