#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gsr/rng.hpp"

using gsr::Rng;

TEST_SUITE("rng") {

TEST_CASE("engine follows the standard mt19937_64 sequence") {
    // The standard fixes the 10000th output of a default-seeded engine.
    Rng rng(5489u);
    std::uint64_t v = 0;
    for (int i = 0; i < 10000; ++i) v = rng.next_u64();
    CHECK(v == 9981545732273789042ull);
}

TEST_CASE("uniform01 uses the top 53 bits") {
    Rng a(7), b(7);
    for (int i = 0; i < 100; ++i) {
        const double u = a.uniform01();
        CHECK(u == static_cast<double>(b.next_u64() >> 11) * 0x1.0p-53);
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("below stays in range and covers it") {
    Rng rng(3);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = rng.below(7);
        REQUIRE(v < 7);
        ++hits[v];
    }
    for (int h : hits) CHECK(h > 850);
    CHECK(rng.below(1) == 0);
}

TEST_CASE("normal has unit moments") {
    Rng rng(11);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        s += z;
        s2 += z * z;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("same seed, same stream; different seed, different stream") {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 50; ++i) {
        const double x = a.normal();
        CHECK(x == b.normal());
        differs |= x != c.normal();
    }
    CHECK(differs);
}

TEST_CASE("permutation is a permutation") {
    Rng rng(9);
    auto p = rng.permutation(1000);
    auto sorted = p;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> iota(1000);
    std::iota(iota.begin(), iota.end(), std::size_t{0});
    CHECK(sorted == iota);
    CHECK(p != iota);
}

}  // TEST_SUITE
