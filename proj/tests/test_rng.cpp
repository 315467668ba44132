#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "bfl1/errors.hpp"
#include "bfl1/rng.hpp"

using namespace bfl1;

TEST_CASE("same seed reproduces the same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds produce different streams") {
    Rng a(1), b(2);
    int agree = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++agree;
    CHECK(agree == 0);
}

TEST_CASE("uniform01 stays in the half-open unit interval") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("split children do not disturb the parent") {
    Rng parent(9);
    Rng control(9);
    const Rng child = parent.split(3);
    (void)child;
    for (int i = 0; i < 16; ++i) CHECK(parent.next_u64() == control.next_u64());
}

TEST_CASE("split is a pure function of key and stream index") {
    Rng parent(9);
    Rng a = parent.split(5);
    // Draw from the parent, then split again: the child only depends on the
    // parent's key, not on how much the parent has been consumed.
    for (int i = 0; i < 10; ++i) parent.next_u64();
    Rng b = parent.split(5);
    for (int i = 0; i < 32; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("sibling splits and grandchildren have distinct keys") {
    Rng root(1234);
    std::set<std::uint64_t> keys;
    keys.insert(root.key());
    for (std::uint64_t i = 0; i < 32; ++i) {
        const Rng child = root.split(i);
        keys.insert(child.key());
        for (std::uint64_t j = 0; j < 8; ++j) keys.insert(child.split(j).key());
    }
    CHECK(keys.size() == 1 + 32 + 32 * 8);
}

TEST_CASE("normal consumes exactly two draws per variate") {
    Rng a(11), b(11);
    (void)a.normal();
    b.next_u64();
    b.next_u64();
    CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("normal sample moments match N(0,1) at Monte Carlo accuracy") {
    Rng rng(2024);
    const std::size_t n = 200000;
    const Vector z = standard_normal_sample(rng, n);

    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= static_cast<double>(n);

    double var = 0.0, skew = 0.0;
    for (double v : z) {
        const double d = v - mean;
        var += d * d;
        skew += d * d * d;
    }
    var /= static_cast<double>(n);
    skew /= static_cast<double>(n) * std::pow(var, 1.5);

    // standard errors: 1/sqrt(n) ~ 2.2e-3 for the mean, sqrt(6/n) ~ 5.5e-3
    // for the skewness; bounds are ~4 sigma.
    CHECK(std::abs(mean) < 1e-2);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
    CHECK(std::abs(skew) < 2.5e-2);
}

TEST_CASE("uniform_sample covers its range with the right moments") {
    Rng rng(5);
    const Vector u = uniform_sample(rng, 9.0, 11.0, 100000);
    double mean = 0.0, lo = u[0], hi = u[0];
    for (double v : u) {
        mean += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    mean /= static_cast<double>(u.size());
    CHECK(lo >= 9.0);
    CHECK(hi < 11.0);
    CHECK(mean == doctest::Approx(10.0).epsilon(1e-3));

    CHECK_THROWS_AS(uniform_sample(rng, 2.0, 1.0, 4), config_error);
    CHECK_THROWS_AS(uniform_sample(rng, 1.0, 1.0, 4), config_error);
}
