#pragma once

#include <wordorder/errors.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace wordorder::stats {

/// Linear-interpolation quantile (the "type 7" definition), q in [0, 1].
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw DataError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline double median(const std::vector<double>& values) { return quantile(values, 0.5); }

struct Summary {
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    std::size_t count = 0;
};

inline Summary summarize(const std::vector<double>& values) {
    return {quantile(values, 0.5), quantile(values, 0.25), quantile(values, 0.75), values.size()};
}

}  // namespace wordorder::stats
