// -*- c++ -*-
#ifndef WITS_PARALLEL_HPP
#define WITS_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace wits {

/**
 * Runs body(i) for i in [0, n) on up to @p threads workers. Each index is
 * processed exactly once and results are expected to be written to per-index
 * slots, so output does not depend on scheduling. The first exception thrown
 * (lowest index) is rethrown after all workers finish.
 */
template <class Body>
void parallel_for(int n, int threads, Body&& body) {
    if (n <= 0)
        return;
    threads = std::clamp(threads, 1, n);
    if (threads == 1) {
        for (int i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    int first_error_index = n;
    auto worker = [&] {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (i < first_error_index) {
                    first_error_index = i;
                    first_error = std::current_exception();
                }
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (int t = 1; t < threads; ++t)
        pool.emplace_back(worker);
    worker();
    pool.clear();
    if (first_error)
        std::rethrow_exception(first_error);
}

} // namespace wits

#endif
