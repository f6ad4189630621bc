#pragma once

#include <cstdint>
#include <span>

#include "ccv/math.hpp"

namespace ccv {

// Counter-based stream: every draw is a hash of (seed, stream, counter), so
// parallel and serial runs that consume the same (stream, counter) pairs see
// identical values regardless of scheduling.
namespace rngdetail {
inline uint64_t mix64(uint64_t z) {
    z ^= z >> 33;
    z *= 0xff51afd7ed558ccdULL;
    z ^= z >> 33;
    z *= 0xc4ceb9fe1a85ec53ULL;
    z ^= z >> 33;
    return z;
}
}  // namespace rngdetail

struct RngStream {
    uint64_t key = 0;
    uint64_t ctr = 0;

    RngStream() = default;
    RngStream(uint64_t seed, uint64_t stream_hi, uint64_t stream_lo) {
        uint64_t k = rngdetail::mix64(seed + 0x9e3779b97f4a7c15ULL);
        k = rngdetail::mix64(k ^ (stream_hi * 0xbf58476d1ce4e5b9ULL + 0x94d049bb133111ebULL));
        key = rngdetail::mix64(k ^ (stream_lo * 0x2545f4914f6cdd1dULL + 0x9e3779b97f4a7c15ULL));
    }

    uint64_t next_u64() { return rngdetail::mix64(key ^ (0x9e3779b97f4a7c15ULL * ++ctr)); }

    // uniform in [0,1)
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    uint64_t next_below(uint64_t n) { return next_u64() % n; }

    double next_normal() {
        double u;
        do { u = next_double(); } while (u <= 0.0);
        return inv_norm_cdf(u);
    }

    // index into a probability vector by cdf inversion
    int next_index(std::span<const double> probs) {
        double u = next_double();
        double acc = 0.0;
        for (size_t i = 0; i + 1 < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return int(i);
        }
        return int(probs.size()) - 1;
    }
};

}  // namespace ccv
