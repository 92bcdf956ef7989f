#include <catch2/catch_amalgamated.hpp>

#include "truncgauss/rng.hpp"

using truncgauss::Rng;

TEST_CASE("identical seeds produce bit-identical streams") {
    Rng a(1234), b(1234);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(a.next_u64() == b.next_u64());
    }
    Rng c(1234), d(1234);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(c.normal() == d.normal());
    }
}

TEST_CASE("uniform stays in [0,1)") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("normal moments match a standard Gaussian") {
    Rng rng(99);
    const int n = 200000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sum_sq += z * z;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    REQUIRE(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    REQUIRE(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("substreams differ from each other and the base stream") {
    Rng base(42);
    Rng s0 = Rng::substream(42, 1, 0);
    Rng s1 = Rng::substream(42, 1, 1);
    Rng s2 = Rng::substream(42, 2, 0);
    const auto x = base.next_u64();
    REQUIRE(x != s0.next_u64());
    REQUIRE(s1.next_u64() != s2.next_u64());
}
