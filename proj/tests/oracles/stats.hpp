#pragma once

// Textbook two-pass sample statistics, independent of the metrics module.

#include <cmath>
#include <vector>

namespace plp::oracle {

inline double sample_pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    // (n-1) denominators cancel in the ratio
    return (cov / (n - 1)) / std::sqrt((va / (n - 1)) * (vb / (n - 1)));
}

inline double root_mean_square_error(const std::vector<double>& truth, const std::vector<double>& pred) {
    double s = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    return std::sqrt(s / static_cast<double>(truth.size()));
}

}  // namespace plp::oracle
