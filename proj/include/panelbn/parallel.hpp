#ifndef PANELBN_PARALLEL_HPP
#define PANELBN_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace panelbn {

inline std::size_t resolve_threads(std::size_t requested) {
    if (requested > 0) return requested;
    auto hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware).
/// Indices are claimed dynamically, so bodies must write only to slot i.
/// The first exception thrown is rethrown after all workers join.
template <typename Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
    const std::size_t workers = std::min(resolve_threads(threads), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace panelbn

#endif  // PANELBN_PARALLEL_HPP
