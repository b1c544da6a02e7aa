#include "vinecop/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/tools/minima.hpp>

#include "vinecop/errors.hpp"

namespace vinecop {

double clamp_uniform(double u) {
    return std::clamp(u, kUniformEps, 1.0 - kUniformEps);
}

double normal_pdf(double x) {
    static const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * M_PI);
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / M_SQRT2); }

double normal_quantile(double p) {
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, p);
}

double anderson_darling_uniform(std::span<const double> u) {
    const std::size_t n = u.size();
    if (n == 0) return 0.0;
    std::vector<double> s(u.begin(), u.end());
    for (double& v : s) v = clamp_uniform(v);
    std::sort(s.begin(), s.end());
    return anderson_darling_sorted(s);
}

double anderson_darling_sorted(std::span<const double> s) {
    const std::size_t n = s.size();
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 2.0 * static_cast<double>(i) + 1.0;
        acc += w * (std::log(s[i]) + std::log1p(-s[n - 1 - i]));
    }
    return -static_cast<double>(n) - acc / static_cast<double>(n);
}

ScalarMinimum minimize_scalar(const std::function<double(double)>& f, double start,
                              double lo, double hi) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    auto safe = [&](double z) {
        const double v = f(z);
        return std::isfinite(v) ? v : inf;
    };

    constexpr int grid = 16;
    std::vector<double> probes;
    probes.reserve(grid + 2);
    for (int k = 0; k <= grid; ++k) probes.push_back(lo + (hi - lo) * k / grid);
    probes.push_back(std::clamp(start, lo, hi));
    std::sort(probes.begin(), probes.end());
    probes.erase(std::unique(probes.begin(), probes.end()), probes.end());

    std::vector<double> values(probes.size());
    std::size_t best = 0;
    for (std::size_t k = 0; k < probes.size(); ++k) {
        values[k] = safe(probes[k]);
        if (values[k] < values[best]) best = k;
    }
    if (!std::isfinite(values[best])) {
        throw FitFailure("objective is non-finite at every probe");
    }

    const double a = probes[best == 0 ? 0 : best - 1];
    const double b = probes[std::min(best + 1, probes.size() - 1)];
    const int bits = std::numeric_limits<double>::digits / 2;
    auto [z, v] = boost::math::tools::brent_find_minima(safe, a, b, bits);
    if (!(v <= values[best])) return {probes[best], values[best]};
    return {z, v};
}

}  // namespace vinecop
