#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace nedsim {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Callers make results
// deterministic by writing into index i's own slot; any reduction happens
// afterwards in index order. The lowest-index exception wins and is
// rethrown on the calling thread.
inline void parallel_for(int jobs, std::int64_t n,
                         const std::function<void(std::int64_t)>& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || n <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const int workers = int(std::min<std::int64_t>(jobs, n));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::int64_t first_error_index = n;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::int64_t i = w; i < n; i += workers) {
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
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace nedsim
