#include "phevsim/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "phevsim/errors.hpp"

namespace phevsim {

MetricsSummary collect_metrics(const std::vector<double>& values, double bin_width) {
    if (values.empty()) throw EmptyRecords("collect_metrics needs at least one value");
    if (bin_width <= 0.0) throw InvalidInput("bin width must be positive");

    MetricsSummary summary;
    const std::size_t n = values.size();
    summary.count = n;

    double sum = 0.0;
    for (double v : values) sum += v;
    summary.mean = sum / static_cast<double>(n);

    double m2 = 0.0, m3 = 0.0;
    for (double v : values) {
        const double d = v - summary.mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    summary.stddev = std::sqrt(m2);

    if (n >= 3 && m2 > 0.0) {
        const double g1 = m3 / std::pow(m2, 1.5);
        const double nn = static_cast<double>(n);
        summary.skewness = std::sqrt(nn * (nn - 1.0)) / (nn - 2.0) * g1;
    }

    const double lo = *std::min_element(values.begin(), values.end());
    const double hi = *std::max_element(values.begin(), values.end());
    const double first_edge = std::floor(lo / bin_width) * bin_width;
    const std::size_t bins =
        static_cast<std::size_t>(std::floor((hi - first_edge) / bin_width)) + 1;
    summary.histogram.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        summary.histogram[b].lo = first_edge + static_cast<double>(b) * bin_width;
        summary.histogram[b].hi = summary.histogram[b].lo + bin_width;
    }
    for (double v : values) {
        std::size_t b = static_cast<std::size_t>(std::floor((v - first_edge) / bin_width));
        b = std::min(b, bins - 1);
        ++summary.histogram[b].count;
    }
    return summary;
}

}  // namespace phevsim
