#pragma once

#include <functional>
#include <span>

namespace vinecop {

// Lower/upper clamp applied wherever the library produces a uniform variate.
inline constexpr double kUniformEps = 1e-12;

double clamp_uniform(double u);

double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);

// Anderson-Darling statistic of `u` against the standard uniform law.
// Values are clamped to (kUniformEps, 1 - kUniformEps) before use.
double anderson_darling_uniform(std::span<const double> u);

// Same statistic for input already sorted ascending and inside (0, 1).
double anderson_darling_sorted(std::span<const double> u);

// 5% critical value of the Anderson-Darling statistic (fully specified null).
inline constexpr double kAndersonDarling5pct = 2.492;

struct ScalarMinimum {
    double argmin;
    double value;
};

// Bounded one-dimensional minimization: the initial point and a coarse probe
// grid over [lo, hi] locate a bracket, Brent's method polishes it.
// Non-finite objective values are treated as +infinity; throws FitFailure if
// every probe is non-finite.
ScalarMinimum minimize_scalar(const std::function<double(double)>& f, double start,
                              double lo, double hi);

}  // namespace vinecop
