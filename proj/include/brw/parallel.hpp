#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace brw {

// Replica index range is split into fixed-size chunks; worker threads pull
// chunk indices from a shared counter. The chunk boundaries depend only on the
// total count, never on the worker count, and the caller combines the per-chunk
// partials in chunk order, so every aggregate is invariant to the degree of
// parallelism (including workers == 1).
inline constexpr std::uint64_t kReplicaChunk = 1024;

inline unsigned resolve_workers(unsigned workers) {
    if (workers != 0) return workers;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// fn(begin, end) -> Partial is invoked once per chunk [begin,end) of [0,total).
// Returns the partials indexed by chunk.
template <class Partial, class ChunkFn>
std::vector<Partial> map_chunks(std::uint64_t total, unsigned workers, ChunkFn&& fn) {
    const std::uint64_t n_chunks = (total + kReplicaChunk - 1) / kReplicaChunk;
    std::vector<Partial> partials(static_cast<std::size_t>(n_chunks));
    if (n_chunks == 0) return partials;

    unsigned n_threads = resolve_workers(workers);
    if (static_cast<std::uint64_t>(n_threads) > n_chunks) {
        n_threads = static_cast<unsigned>(n_chunks);
    }

    std::atomic<std::uint64_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};

    auto worker = [&]() {
        for (;;) {
            const std::uint64_t chunk = next.fetch_add(1, std::memory_order_relaxed);
            if (chunk >= n_chunks || failed.load(std::memory_order_relaxed)) break;
            const std::uint64_t begin = chunk * kReplicaChunk;
            const std::uint64_t end = std::min(total, begin + kReplicaChunk);
            try {
                partials[static_cast<std::size_t>(chunk)] = fn(begin, end);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                break;
            }
        }
    };

    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) std::rethrow_exception(error);
    return partials;
}

}  // namespace brw
