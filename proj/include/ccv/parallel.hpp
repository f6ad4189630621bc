#pragma once

#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ccv {

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// Deterministic block map-reduce over [0, n). The accumulator layout is fixed
// by the block size, each block is filled serially by one worker, and blocks
// are merged in index order, so the result is bit-identical for any thread
// count. threads <= 1 runs the plain serial loop (the reference path).
template <class Acc, class Body>
Acc block_reduce(int64_t n, int threads, int64_t block, const Body& body) {
    if (n <= 0) return Acc{};
    if (block <= 0) block = 4096;
    const int64_t nblocks = (n + block - 1) / block;
    std::vector<Acc> partial(size_t(nblocks), Acc{});

    auto run_block = [&](int64_t b) {
        Acc acc{};
        const int64_t lo = b * block;
        const int64_t hi = std::min<int64_t>(n, lo + block);
        for (int64_t i = lo; i < hi; ++i) body(i, acc);
        partial[size_t(b)] = acc;
    };

#ifdef _OPENMP
    if (threads > 1) {
#pragma omp parallel for schedule(static, 1) num_threads(threads)
        for (int64_t b = 0; b < nblocks; ++b) run_block(b);
    } else {
        for (int64_t b = 0; b < nblocks; ++b) run_block(b);
    }
#else
    (void)threads;
    for (int64_t b = 0; b < nblocks; ++b) run_block(b);
#endif

    Acc total{};
    for (int64_t b = 0; b < nblocks; ++b) total.merge(partial[size_t(b)]);
    return total;
}

}  // namespace ccv
