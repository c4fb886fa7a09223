#include <doctest.h>

#include <cmath>
#include <set>

#include "brw/rng.hpp"

using namespace brw;

TEST_CASE("mix64 is deterministic and spreads nearby inputs") {
    CHECK(mix64(0) == mix64(0));
    CHECK(mix64(1) != mix64(2));
    // avalanche sanity: consecutive inputs differ in roughly half the bits
    int total_flips = 0;
    for (std::uint64_t i = 0; i < 256; ++i) {
        total_flips += __builtin_popcountll(mix64(i) ^ mix64(i + 1));
    }
    const double mean_flips = total_flips / 256.0;
    CHECK(mean_flips > 24.0);
    CHECK(mean_flips < 40.0);
}

TEST_CASE("zigzag encodes signed integers injectively") {
    CHECK(zigzag(0) == 0);
    CHECK(zigzag(-1) == 1);
    CHECK(zigzag(1) == 2);
    CHECK(zigzag(-2) == 3);
    CHECK(zigzag(2) == 4);
    std::set<std::uint64_t> seen;
    for (std::int64_t v = -1000; v <= 1000; ++v) seen.insert(zigzag(v));
    CHECK(seen.size() == 2001);
}

TEST_CASE("uniform01 stays in [0,1) and has roughly uniform mean") {
    Xoshiro256ss rng(42);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    // 3 sigma of the mean of n uniforms: 3 / sqrt(12 n)
    CHECK(std::abs(sum / n - 0.5) < 3.0 / std::sqrt(12.0 * n));
}

TEST_CASE("uniform_below covers the range without bias artifacts") {
    Xoshiro256ss rng(7);
    int counts[6] = {0, 0, 0, 0, 0, 0};
    const int n = 60000;
    for (int i = 0; i < n; ++i) ++counts[rng.uniform_below(6)];
    for (int k = 0; k < 6; ++k) {
        CHECK(std::abs(counts[k] - n / 6.0) < 5.0 * std::sqrt(n / 6.0));
    }
}

TEST_CASE("derived streams are reproducible and index-disjoint") {
    auto a = make_stream(123, StreamDomain::McReplica, 0);
    auto b = make_stream(123, StreamDomain::McReplica, 0);
    auto c = make_stream(123, StreamDomain::McReplica, 1);
    auto d = make_stream(123, StreamDomain::SpineReplica, 0);
    const std::uint64_t first_a = a.next_u64();
    CHECK(first_a == b.next_u64());
    CHECK(first_a != c.next_u64());
    CHECK(first_a != d.next_u64());
}
