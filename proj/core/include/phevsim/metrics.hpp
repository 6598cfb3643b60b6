#pragma once

#include <optional>
#include <vector>

namespace phevsim {

struct HistogramBin {
    double lo = 0.0;  // inclusive
    double hi = 0.0;  // exclusive
    std::size_t count = 0;
};

struct MetricsSummary {
    std::size_t count = 0;
    double mean = 0.0;
    double stddev = 0.0;                  // population
    std::optional<double> skewness;       // sample skewness; unset for n < 3
    std::vector<HistogramBin> histogram;  // bin counts sum to count
};

/// Two-pass aggregates of a sample (mean, population standard deviation,
/// sample skewness, histogram at the given bin width). Throws EmptyRecords.
MetricsSummary collect_metrics(const std::vector<double>& values, double bin_width = 1.0);

}  // namespace phevsim
