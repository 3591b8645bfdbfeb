#include <algorithm>
#include <cmath>

#include "cdn/rng.hpp"
#include "doctest.h"

using cdn::Rng;

TEST_CASE("identical seeds give identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform stays in [0,1) with plausible mean") {
    Rng rng(7);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / 100000 - 0.5) < 0.01);
}

TEST_CASE("normal has unit moments") {
    Rng rng(11);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("below respects the bound and is roughly uniform") {
    Rng rng(3);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 100000; ++i) {
        uint64_t v = rng.below(10);
        REQUIRE(v < 10);
        ++counts[v];
    }
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("permutation is a bijection") {
    Rng rng(5);
    auto p = rng.permutation(50);
    std::sort(p.begin(), p.end());
    for (int i = 0; i < 50; ++i) CHECK(p[i] == i);
}

TEST_CASE("forked streams differ from the parent and each other") {
    Rng rng(9);
    Rng f1 = rng.fork(1);
    Rng f2 = rng.fork(2);
    CHECK(f1.next_u64() != f2.next_u64());
}
