#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "specklegi/frame.hpp"

namespace specklegi {

/// Frames per reduction block. The block structure (not the thread count)
/// defines the floating-point summation order, so any thread count yields
/// bit-identical results.
constexpr std::int64_t kFrameBlock = 512;

/// Worker count from SPECKLEGI_THREADS; defaults to 1 (reproducibility-first).
inline int env_thread_count() {
    if (const char* s = std::getenv("SPECKLEGI_THREADS")) {
        const int n = std::atoi(s);
        if (n >= 1) return n;
    }
    return 1;
}

/// Streams every frame of `src` once, folding frames of block b into
/// accumulator b in ascending index order. Blocks are handed to workers
/// dynamically; the per-block result does not depend on which worker ran it.
template <class Acc, class Init, class Step>
std::vector<Acc> map_frame_blocks(const FrameSource& src, int n_threads, Init&& init,
                                  Step&& step, std::int64_t block_size = kFrameBlock) {
    const std::int64_t n = src.n_frames();
    if (n <= 0) throw std::invalid_argument("map_frame_blocks: empty source");
    const std::int64_t n_blocks = (n + block_size - 1) / block_size;
    std::vector<Acc> blocks;
    blocks.reserve(static_cast<std::size_t>(n_blocks));
    for (std::int64_t b = 0; b < n_blocks; ++b) blocks.push_back(init());

    std::atomic<std::int64_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mtx;

    auto worker = [&]() {
        for (;;) {
            const std::int64_t b = next.fetch_add(1);
            if (b >= n_blocks || failed.load()) return;
            const std::int64_t lo = b * block_size;
            const std::int64_t hi = std::min(n, lo + block_size);
            for (std::int64_t i = lo; i < hi; ++i) {
                try {
                    step(blocks[static_cast<std::size_t>(b)], src.frame(i));
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(error_mtx);
                    if (!failed.exchange(true))
                        error = std::make_exception_ptr(std::runtime_error(
                            "frame " + std::to_string(i) + ": " + e.what()));
                    return;
                }
            }
        }
    };

    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failed.load()) std::rethrow_exception(error);
    return blocks;
}

/// map_frame_blocks followed by an in-order merge of the block accumulators.
template <class Acc, class Init, class Step, class Merge>
Acc reduce_frames(const FrameSource& src, int n_threads, Init&& init, Step&& step,
                  Merge&& merge, std::int64_t block_size = kFrameBlock) {
    auto blocks = map_frame_blocks<Acc>(src, n_threads, init, step, block_size);
    Acc total = init();
    for (auto& b : blocks) merge(total, b);
    return total;
}

}  // namespace specklegi
