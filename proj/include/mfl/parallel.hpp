#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mfl {

/// Run fn(i) for i in [0, count) on up to `jobs` threads. Work items are
/// claimed dynamically; callers write results into per-index slots, so the
/// outcome does not depend on the number of threads. The first exception
/// thrown by any item is rethrown after all threads join.
template <class Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn)
{
    std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)),
                                                count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count)
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                next = count;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

}  // namespace mfl
