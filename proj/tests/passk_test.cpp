#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "veriloop/harness.hpp"

using namespace veriloop;

namespace {

// Independent oracle: enumerate all k-subsets of r runs and count those
// containing at least one of the c correct runs.
double pass_at_k_bruteforce(int r, int c, int k) {
    int subsets = 0, hits = 0;
    for (unsigned mask = 0; mask < (1u << r); mask++) {
        if (__builtin_popcount(mask) != k) continue;
        subsets++;
        if (mask & ((1u << c) - 1)) hits++;
    }
    return static_cast<double>(hits) / subsets;
}

} // namespace

TEST_CASE("pass_at_k spec examples") {
    CHECK(pass_at_k(5, 5, 1) == 1.0);
    CHECK(pass_at_k(5, 0, 5) == 0.0);
    CHECK_THAT(pass_at_k(5, 2, 1), Catch::Matchers::WithinAbs(0.4, 1e-12));
    CHECK(pass_at_k(5, 2, 5) == 1.0);
}

TEST_CASE("pass_at_k matches brute-force enumeration for all r <= 6") {
    for (int r = 1; r <= 6; r++)
        for (int c = 0; c <= r; c++)
            for (int k = 1; k <= r; k++) {
                INFO("r=" << r << " c=" << c << " k=" << k);
                CHECK_THAT(pass_at_k(r, c, k),
                           Catch::Matchers::WithinAbs(pass_at_k_bruteforce(r, c, k), 1e-12));
            }
}

TEST_CASE("pass_at_k monotonicity and k=1 closed form") {
    for (int r = 1; r <= 6; r++) {
        for (int c = 0; c <= r; c++) {
            CHECK_THAT(pass_at_k(r, c, 1),
                       Catch::Matchers::WithinAbs(static_cast<double>(c) / r, 1e-12));
            for (int k = 2; k <= r; k++)
                CHECK(pass_at_k(r, c, k) >= pass_at_k(r, c, k - 1) - 1e-15);
        }
        for (int k = 1; k <= r; k++)
            for (int c = 1; c <= r; c++)
                CHECK(pass_at_k(r, c, k) >= pass_at_k(r, c - 1, k) - 1e-15);
    }
}

TEST_CASE("pass_at_k rejects out-of-domain arguments") {
    CHECK_THROWS_AS(pass_at_k(5, 6, 1), domain_error);
    CHECK_THROWS_AS(pass_at_k(5, -1, 1), domain_error);
    CHECK_THROWS_AS(pass_at_k(5, 2, 0), domain_error);
    CHECK_THROWS_AS(pass_at_k(5, 2, 6), domain_error);
    CHECK_THROWS_AS(pass_at_k(0, 0, 1), domain_error);
}

TEST_CASE("pass_at_k agrees with a million-draw Monte Carlo at r=5 c=2 k=1") {
    std::mt19937 rng(424242);
    std::uniform_int_distribution<int> pick(0, 4);
    const int trials = 1000000;
    int hits = 0;
    for (int i = 0; i < trials; i++)
        if (pick(rng) < 2) hits++; // runs 0 and 1 are the correct ones
    double estimate = static_cast<double>(hits) / trials;
    CHECK_THAT(estimate, Catch::Matchers::WithinAbs(pass_at_k(5, 2, 1), 0.002));
    CHECK_THAT(pass_at_k(5, 2, 1), Catch::Matchers::WithinAbs(0.400, 1e-12));
}
