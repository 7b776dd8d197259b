#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace stiffkit {

// Runs fn(i) for i in [0, n) across up to `threads` workers. Callers write
// results into preallocated slots indexed by i, so the aggregate is
// independent of the thread count.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn)
{
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    threads = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([w, n, threads, &fn] {
            for (std::size_t i = w; i < n; i += threads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace stiffkit
