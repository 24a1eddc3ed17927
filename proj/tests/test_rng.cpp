#include "doctest.h"

#include "popvote/rng.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <set>

using namespace popvote;

TEST_SUITE_BEGIN("rng");

TEST_CASE("streams are deterministic per seed")
{
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next() == b.next());
    }
    Rng c(43);
    bool differs = false;
    Rng a2(42);
    for (int i = 0; i < 16; ++i) {
        differs |= a2.next() != c.next();
    }
    CHECK(differs);
}

TEST_CASE("bounded stays in range and consumes one draw")
{
    Rng rng(7);
    for (std::uint64_t n : {1ull, 2ull, 5ull, 97ull, 1ull << 40}) {
        const auto before = rng.draws();
        const std::uint64_t v = rng.bounded(n);
        CHECK(v < n);
        CHECK(rng.draws() == before + 1);
    }
}

TEST_CASE("uniform01 lies in [0,1) and consumes one draw")
{
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        const auto before = rng.draws();
        const double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(rng.draws() == before + 1);
    }
}

TEST_CASE("random_permutation consumes exactly count-1 draws")
{
    Rng rng(11);
    for (std::uint32_t m : {0u, 1u, 2u, 5u, 33u}) {
        const auto before = rng.draws();
        const auto perm = random_permutation(m, rng);
        CHECK(rng.draws() == before + (m > 0 ? m - 1 : 0));
        REQUIRE(perm.size() == m);
        std::set<std::uint32_t> seen(perm.begin(), perm.end());
        CHECK(seen.size() == m);
    }
}

TEST_CASE("permutations of three elements are close to uniform")
{
    Rng rng(123);
    std::array<int, 6> hits{};
    const int trials = 12000;
    for (int i = 0; i < trials; ++i) {
        const auto p = random_permutation(3, rng);
        const int code = p[0] * 2 + (p[1] > p[2] ? 1 : 0);
        ++hits[code];
    }
    // 3 sigma band around 1/6 for a binomial count.
    const double sigma = std::sqrt((1.0 / 6) * (5.0 / 6) / trials);
    for (const int h : hits) {
        CHECK(std::abs(h / static_cast<double>(trials) - 1.0 / 6) < 3 * sigma);
    }
}

TEST_CASE("derive_seed separates streams")
{
    std::set<std::uint64_t> seeds;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        seeds.insert(derive_seed(99, s));
    }
    CHECK(seeds.size() == 1000);
    CHECK(derive_seed(99, 0) != derive_seed(100, 0));
    CHECK(derive_seed(99, 0) == derive_seed(99, 0));
}

TEST_SUITE_END();
