#include "tiledrop/downstream.hpp"

#include "tiledrop/errors.hpp"

#include <algorithm>
#include <stdexcept>

namespace tiledrop {

namespace {

void check_pair(std::span<const double> y, std::span<const double> y_hat, std::size_t min_n)
{
    if (y.size() != y_hat.size()) {
        throw std::invalid_argument("metric: length mismatch");
    }
    if (y.size() < min_n) {
        throw std::invalid_argument("metric: too few samples");
    }
}

double mean_of(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Exact test; a computed variance of identical values can be a rounding
// residue instead of zero.
bool is_constant(std::span<const double> v)
{
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

double variance_of(std::span<const double> v)
{
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

}  // namespace

double pearson_r2(std::span<const double> y, std::span<const double> y_hat)
{
    check_pair(y, y_hat, 2);
    if (is_constant(y) || is_constant(y_hat)) {
        throw MetricError("pearson_r2: zero variance input");
    }
    const double my = mean_of(y);
    const double mp = mean_of(y_hat);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double a = y[i] - my;
        const double b = y_hat[i] - mp;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw MetricError("pearson_r2: zero variance input");
    }
    return std::min(1.0, (sxy * sxy) / (sxx * syy));
}

double mse(std::span<const double> y, std::span<const double> y_hat)
{
    check_pair(y, y_hat, 1);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        s += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    }
    return s / static_cast<double>(y.size());
}

double explained_variance(std::span<const double> y, std::span<const double> y_hat)
{
    check_pair(y, y_hat, 2);
    const double var_y = variance_of(y);
    if (is_constant(y) || var_y == 0.0) {
        throw MetricError("explained_variance: zero variance target");
    }
    std::vector<double> resid(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        resid[i] = y[i] - y_hat[i];
    }
    return 1.0 - variance_of(resid) / var_y;
}

std::vector<double> missed_per_class(const std::vector<ClusterFeatures>& reference,
                                     const std::vector<ClusterFeatures>& approx)
{
    if (reference.size() != approx.size() || reference.empty()) {
        throw std::invalid_argument("missed_per_class: need equal, non-empty cluster lists");
    }
    const std::size_t l = reference.front().m.size();
    std::vector<double> out(l, 0.0);
    for (std::size_t i = 0; i < reference.size(); ++i) {
        if (reference[i].m.size() != l || approx[i].m.size() != l) {
            throw std::invalid_argument("missed_per_class: class length mismatch");
        }
        for (std::size_t c = 0; c < l; ++c) {
            out[c] += std::max(0.0, reference[i].m[c] - approx[i].m[c]);
        }
    }
    for (auto& v : out) {
        v /= static_cast<double>(reference.size());
    }
    return out;
}

}  // namespace tiledrop
