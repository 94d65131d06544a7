#pragma once
// Deterministic replicate-parallel execution. Work is split into fixed-size
// blocks; workers pull block indices from a shared counter. Because the
// block layout never depends on the worker count, per-block outputs (and any
// in-order reduction over them) are identical for every --threads value.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace perpetua::par {

inline constexpr uint64_t kDefaultBlock = 4096;

inline int default_threads() {
    if (const char* env = std::getenv("PERPETUA_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// fn(block_index, begin, end) over [0, total).
inline void parallel_blocks(
    uint64_t total, uint64_t block_size, int threads,
    const std::function<void(size_t, uint64_t, uint64_t)>& fn) {
    if (total == 0) return;
    if (block_size == 0) block_size = kDefaultBlock;
    const size_t nblocks =
        static_cast<size_t>((total + block_size - 1) / block_size);
    if (threads <= 0) threads = default_threads();
    const auto run_block = [&](size_t b) {
        const uint64_t begin = b * block_size;
        const uint64_t end = std::min(begin + block_size, total);
        fn(b, begin, end);
    };
    if (threads == 1 || nblocks == 1) {
        for (size_t b = 0; b < nblocks; ++b) run_block(b);
        return;
    }
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    const size_t nworkers =
        std::min(static_cast<size_t>(threads), nblocks);
    std::vector<std::thread> pool;
    pool.reserve(nworkers);
    for (size_t w = 0; w < nworkers; ++w) {
        pool.emplace_back([&] {
            while (!failed.load(std::memory_order_relaxed)) {
                const size_t b = next.fetch_add(1, std::memory_order_relaxed);
                if (b >= nblocks) break;
                try {
                    run_block(b);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true, std::memory_order_relaxed);
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace perpetua::par
