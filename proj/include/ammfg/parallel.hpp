#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ammfg {

namespace detail {
inline std::atomic<int>& thread_cap_storage() {
    static std::atomic<int> cap{0}; // 0 = unset
    return cap;
}
inline int env_thread_cap() {
    if (const char* s = std::getenv("AMMFG_THREADS")) {
        const int v = std::atoi(s);
        if (v > 0) return v;
    }
    return 0;
}
} // namespace detail

// Worker cap for parallel_for. Resolution order: set_max_threads() value,
// then AMMFG_THREADS, then hardware concurrency. Results never depend on it.
inline void set_max_threads(int n) { detail::thread_cap_storage().store(n > 0 ? n : 0); }

inline int max_threads() {
    if (const int cap = detail::thread_cap_storage().load(); cap > 0) return cap;
    if (const int env = detail::env_thread_cap(); env > 0) return env;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs f(i) for i in [0, n). Work is split into contiguous chunks; callers
// write results into preallocated slots and reduce sequentially afterwards,
// which keeps outputs bit-identical for every thread count.
template <class F>
void parallel_for(std::size_t n, F&& f, std::size_t grain = 1024) {
    const std::size_t nt =
        std::min<std::size_t>(static_cast<std::size_t>(max_threads()),
                              n / std::max<std::size_t>(grain, 1));
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mu;
    std::vector<std::thread> workers;
    workers.reserve(nt);
    const std::size_t chunk = (n + nt - 1) / nt;
    for (std::size_t w = 0; w < nt; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) f(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(error_mu);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace ammfg
