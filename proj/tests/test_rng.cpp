#include <doctest.h>

#include <cmath>

#include "soint/rng.hpp"

using namespace soint;

TEST_CASE("streams are pure functions of (seed, words)") {
    rng::Stream a = rng::stream(42, {rng::hash_str("x"), 7});
    rng::Stream b = rng::stream(42, {rng::hash_str("x"), 7});
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    rng::Stream c = rng::stream(42, {rng::hash_str("x"), 8});
    rng::Stream d = rng::stream(42, {rng::hash_str("x"), 7});
    CHECK(c.next_u64() != d.next_u64());
}

TEST_CASE("uniform stays strictly inside (0,1)") {
    rng::Stream s = rng::stream(1, {});
    for (int i = 0; i < 100000; ++i) {
        const double u = s.uniform();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal moments match the standard distribution") {
    rng::Stream s = rng::stream(9, {rng::hash_str("moments")});
    const int count = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < count; ++i) {
        const double z = s.normal();
        sum += z;
        sq += z * z;
    }
    const double mean = sum / count;
    const double var = sq / count - mean * mean;
    CHECK(std::fabs(mean) < 0.01);
    CHECK(std::fabs(var - 1.0) < 0.02);
}

TEST_CASE("gumbel mean is near the Euler-Mascheroni constant") {
    rng::Stream s = rng::stream(11, {rng::hash_str("gumbel")});
    const int count = 200000;
    double sum = 0.0;
    for (int i = 0; i < count; ++i) sum += s.gumbel();
    CHECK(std::fabs(sum / count - 0.5772156649) < 0.02);
}
