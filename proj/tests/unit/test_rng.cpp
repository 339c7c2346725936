#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "lawsim/rng.hpp"

using lawsim::Rng;

TEST_CASE("same seed replays the same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    Rng c(42), d(43);
    bool differs = false;
    for (int i = 0; i < 10 && !differs; ++i) {
        differs = c.next_u64() != d.next_u64();
    }
    CHECK(differs);
}

TEST_CASE("next_double stays in [0,1)") {
    Rng rng(7);
    for (int i = 0; i < 100000; ++i) {
        const double x = rng.next_double();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
}

TEST_CASE("uniform_int covers the closed range") {
    Rng rng(11);
    std::set<int> seen;
    for (int i = 0; i < 2000; ++i) {
        const int v = rng.uniform_int(3, 7);
        CHECK(v >= 3);
        CHECK(v <= 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 5);

    // Degenerate range always returns the single value.
    for (int i = 0; i < 10; ++i) {
        CHECK(rng.uniform_int(4, 4) == 4);
    }
}

TEST_CASE("bernoulli endpoints and frequency") {
    Rng rng(13);
    for (int i = 0; i < 1000; ++i) {
        CHECK_FALSE(rng.bernoulli(0.0));
        CHECK(rng.bernoulli(1.0));
    }

    const int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        if (rng.bernoulli(0.3)) ++hits;
    }
    const double freq = static_cast<double>(hits) / n;
    const double se = std::sqrt(0.3 * 0.7 / n);
    CHECK(std::abs(freq - 0.3) < 4.0 * se);
}

TEST_CASE("bernoulli consumes one draw regardless of p") {
    Rng a(17), b(17);
    a.bernoulli(0.0);
    a.bernoulli(-1.0);
    a.bernoulli(0.5);
    b.next_double();
    b.next_double();
    b.next_double();
    CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("normal consumes exactly two draws") {
    Rng a(19), b(19);
    a.normal();
    b.next_double();
    b.next_double();
    CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("normal moments") {
    Rng rng(23);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);

    Rng rng2(29);
    double shifted = 0.0;
    for (int i = 0; i < n; ++i) shifted += rng2.normal(10.0, 2.0);
    CHECK(std::abs(shifted / n - 10.0) < 0.02);
}

TEST_CASE("log_normal median matches exp(location)") {
    Rng rng(31);
    const int n = 100001;
    std::vector<double> xs(n);
    for (auto& x : xs) x = rng.log_normal(std::log(1000.0), 0.5);
    std::nth_element(xs.begin(), xs.begin() + n / 2, xs.end());
    const double median = xs[n / 2];
    CHECK(std::abs(median - 1000.0) / 1000.0 < 0.01);
    CHECK(std::all_of(xs.begin(), xs.end(), [](double x) { return x > 0.0; }));
}

TEST_CASE("categorical follows the weights") {
    Rng rng(37);
    const std::vector<double> weights = {0.2, 0.3, 0.5};
    const int n = 100000;
    std::vector<int> counts(3, 0);
    for (int i = 0; i < n; ++i) {
        const auto idx = rng.categorical(weights);
        REQUIRE(idx < weights.size());
        ++counts[idx];
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double freq = static_cast<double>(counts[i]) / n;
        const double se = std::sqrt(weights[i] * (1.0 - weights[i]) / n);
        CHECK(std::abs(freq - weights[i]) < 4.0 * se);
    }

    // Unnormalized weights pick the same indices as their normalized form.
    Rng a(41), b(41);
    const std::vector<double> raw = {2.0, 3.0, 5.0};
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.categorical(raw) == b.categorical(weights));
    }
}
