#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <qkdtiming/rng.hpp>

#include <cmath>
#include <vector>

using qkdtiming::CounterRng;

TEST_CASE("same key reproduces the same stream") {
    CounterRng a(42, 1000), b(42, 1000);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("streams differ across slots and seeds") {
    CounterRng a(42, 0), b(42, 1), c(43, 0);
    int same_ab = 0, same_ac = 0;
    for (int i = 0; i < 64; ++i) {
        const auto va = a.next_u64();
        same_ab += (va == b.next_u64());
        same_ac += (va == c.next_u64());
    }
    CHECK(same_ab == 0);
    CHECK(same_ac == 0);
}

TEST_CASE("unit draws are uniform: moments and range") {
    CounterRng rng(7, 3);
    const int n = 200000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.next_unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        sum2 += u * u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(sum2 / n == doctest::Approx(1.0 / 3.0).epsilon(0.01));
}

TEST_CASE("gaussian draws: mean, variance, tails") {
    CounterRng rng(11, 0);
    const int n = 400000;
    double sum = 0, sum2 = 0;
    int beyond3 = 0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.next_gaussian();
        sum += g;
        sum2 += g * g;
        if (std::abs(g) > 3.0) ++beyond3;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.02));
    // P(|Z| > 3) = 0.0027
    CHECK(static_cast<double>(beyond3) / n == doctest::Approx(0.0027).epsilon(0.2));
}

TEST_CASE("poisson draws match mean and variance") {
    for (double mean : {0.05, 0.4, 2.5}) {
        CounterRng rng(5, static_cast<std::uint64_t>(mean * 1000));
        const double exp_neg = std::exp(-mean);
        const int n = 200000;
        double sum = 0, sum2 = 0;
        for (int i = 0; i < n; ++i) {
            const int k = rng.next_poisson(exp_neg);
            sum += k;
            sum2 += static_cast<double>(k) * k;
        }
        const double m = sum / n;
        const double var = sum2 / n - m * m;
        const double se = std::sqrt(mean / n);
        CHECK(std::abs(m - mean) < 5.0 * se);
        CHECK(var == doctest::Approx(mean).epsilon(0.05));
    }
}

TEST_CASE("zero mean gives zero counts") {
    CounterRng rng(1, 2);
    for (int i = 0; i < 100; ++i) CHECK(rng.next_poisson(1.0) == 0);
}
