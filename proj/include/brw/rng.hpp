#pragma once

#include <array>
#include <cstdint>

namespace brw {

// Identifier of the hashing / stream-derivation scheme, emitted with every
// result record so independent implementations can be matched bit-for-bit.
inline constexpr const char* kRngSchemeId = "splitmix64-zigzag/xoshiro256ss-v1";

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer. Bijective on 64-bit words, full avalanche.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Injective encoding of signed integers into unsigned ones:
// 0,-1,1,-2,2,... -> 0,1,2,3,4,...
inline constexpr std::uint64_t zigzag(std::int64_t v) noexcept {
    return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}

// 53-bit uniform in [0,1) from a 64-bit word.
inline constexpr double to_unit_interval(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

struct SplitMix64 {
    std::uint64_t state;
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state(seed) {}
    constexpr std::uint64_t next() noexcept {
        return mix64(state += kGolden);
    }
};

// Domain tags keep the derived streams of unrelated consumers disjoint even
// when they share a master seed.
enum class StreamDomain : std::uint64_t {
    Environment   = 0x01,
    McReplica     = 0x02,
    SpineReplica  = 0x03,
    WalkerReplica = 0x04,
    EnvSweep      = 0x05,
    Experiment    = 0x06,
};

// Counter-based derivation: a pure function of (master, domain, index), so any
// worker can seed replica #index without coordination.
inline constexpr std::uint64_t derive_seed(std::uint64_t master, StreamDomain domain,
                                           std::uint64_t index) noexcept {
    std::uint64_t h = mix64(master + kGolden * static_cast<std::uint64_t>(domain));
    return mix64(h ^ (index + kGolden));
}

// xoshiro256** by Blackman & Vigna (public domain reference implementation).
struct Xoshiro256ss {
    std::array<std::uint64_t, 4> s{1, 2, 3, 4};

    Xoshiro256ss() = default;
    explicit Xoshiro256ss(std::uint64_t seed) noexcept { seed_with(seed); }

    void seed_with(std::uint64_t seed) noexcept {
        SplitMix64 sm(seed);
        for (auto& w : s) w = sm.next();
        if ((s[0] | s[1] | s[2] | s[3]) == 0) s[0] = kGolden;  // all-zero state is invalid
    }

    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t result = rotl(s[1] * 5ULL, 7) * 9ULL;
        const std::uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }

    // uniform in [0,1) with 53-bit resolution
    double uniform01() noexcept { return to_unit_interval(next_u64()); }

    // uniform in {0,...,bound-1}, unbiased; rejection-free when bound is a power of two
    std::uint64_t uniform_below(std::uint64_t bound) noexcept {
        const std::uint64_t threshold = (0 - bound) % bound;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x < threshold);
        return x % bound;
    }

    bool coin() noexcept { return (next_u64() >> 63) != 0; }
};

inline Xoshiro256ss make_stream(std::uint64_t master, StreamDomain domain,
                                std::uint64_t index) noexcept {
    return Xoshiro256ss(derive_seed(master, domain, index));
}

}  // namespace brw
