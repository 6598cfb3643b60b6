#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "phevsim/errors.hpp"
#include "phevsim/metrics.hpp"

using namespace phevsim;

TEST_CASE("single sample: zero spread, undefined skewness") {
    const MetricsSummary s = collect_metrics({30.0});
    CHECK(s.count == 1);
    CHECK(s.mean == doctest::Approx(30.0));
    CHECK(s.stddev == doctest::Approx(0.0));
    CHECK_FALSE(s.skewness.has_value());
}

TEST_CASE("two samples by hand") {
    const MetricsSummary s = collect_metrics({20.0, 30.0});
    CHECK(s.mean == doctest::Approx(25.0));
    CHECK(s.stddev == doctest::Approx(5.0));  // population
}

TEST_CASE("empty input is rejected") {
    CHECK_THROWS_AS(collect_metrics({}), EmptyRecords);
}

TEST_CASE("histogram bins cover every sample exactly once") {
    const MetricsSummary s = collect_metrics({20.2, 20.9, 21.5, 25.0, 29.9}, 1.0);
    std::size_t total = 0;
    for (const HistogramBin& b : s.histogram) {
        CHECK(b.hi == doctest::Approx(b.lo + 1.0));
        total += b.count;
    }
    CHECK(total == s.count);
}

TEST_CASE("two-pass aggregates match a streaming oracle on seeded data") {
    // Welford's online algorithm with third-moment update, implemented
    // independently of the library's two-pass computation.
    std::mt19937_64 rng(123);
    std::lognormal_distribution<double> dist(3.3, 0.25);
    std::vector<double> values;
    double n = 0.0, mean = 0.0, m2 = 0.0, m3 = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double x = dist(rng);
        values.push_back(x);
        n += 1.0;
        const double delta = x - mean;
        const double delta_n = delta / n;
        const double term = delta * delta_n * (n - 1.0);
        m3 += term * delta_n * (n - 2.0) - 3.0 * delta_n * m2;
        m2 += term;
        mean += delta_n;
    }
    const double var = m2 / n;
    const double g1 = (m3 / n) / std::pow(var, 1.5);
    const double skew = std::sqrt(n * (n - 1.0)) / (n - 2.0) * g1;

    const MetricsSummary s = collect_metrics(values);
    CHECK(s.count == 1000);
    CHECK(std::abs(s.mean - mean) <= 1e-9 * std::abs(mean));
    CHECK(std::abs(s.stddev - std::sqrt(var)) <= 1e-9 * s.stddev);
    REQUIRE(s.skewness.has_value());
    CHECK(std::abs(*s.skewness - skew) <= 1e-9 * std::max(1.0, std::abs(skew)));
}
