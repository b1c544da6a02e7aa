#include "vinecop/marginals.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <fmt/format.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "vinecop/errors.hpp"
#include "vinecop/numeric.hpp"

namespace vinecop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Type-7 sample quantile of sorted data.
double sample_quantile(std::span<const double> sorted, double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> sorted_finite(std::span<const double> column, const char* what) {
    std::vector<double> s(column.begin(), column.end());
    for (double v : s) {
        if (!std::isfinite(v)) throw FitFailure(fmt::format("{}: non-finite value in column", what));
    }
    std::sort(s.begin(), s.end());
    return s;
}

std::size_t count_distinct(std::span<const double> sorted) {
    if (sorted.empty()) return 0;
    std::size_t count = 1;
    for (std::size_t k = 1; k < sorted.size(); ++k) count += sorted[k] != sorted[k - 1];
    return count;
}

// ---------------------------------------------------------------------------
// GLD
// ---------------------------------------------------------------------------

double q_raw(double y, const GldParams& p) {
    return p.lambda1 + (std::pow(y, p.lambda3) - std::pow(1.0 - y, p.lambda4)) / p.lambda2;
}

double dq_raw(double y, const GldParams& p) {
    return (p.lambda3 * std::pow(y, p.lambda3 - 1.0) +
            p.lambda4 * std::pow(1.0 - y, p.lambda4 - 1.0)) /
           p.lambda2;
}

const std::vector<double>& validity_grid() {
    static const std::vector<double> grid = [] {
        std::vector<double> g;
        for (int k = 1; k < 1000; ++k) g.push_back(k / 1000.0);
        for (int e = 3; e <= 12; ++e) {
            const double t = std::pow(10.0, -e);
            g.push_back(t);
            g.push_back(1.0 - t);
        }
        std::sort(g.begin(), g.end());
        return g;
    }();
    return grid;
}

void require_valid(const GldParams& p) {
    if (!gld_is_valid(p)) {
        throw InvalidParameter(fmt::format("invalid GLD parameters ({}, {}, {}, {})", p.lambda1,
                                           p.lambda2, p.lambda3, p.lambda4));
    }
}

// Q and Q' from y and 1 - y supplied separately, so both tails keep full
// relative precision.
double q_pair(double y, double ybar, const GldParams& p) {
    return p.lambda1 + (std::pow(y, p.lambda3) - std::pow(ybar, p.lambda4)) / p.lambda2;
}

double dq_pair(double y, double ybar, const GldParams& p) {
    return (p.lambda3 * std::pow(y, p.lambda3 - 1.0) +
            p.lambda4 * std::pow(ybar, p.lambda4 - 1.0)) /
           p.lambda2;
}

struct TailPoint {
    double y;
    double ybar;
};

// Inverts Q inside a tail beyond kUniformEps by bisection on log(y) (lower)
// or log(1 - y) (upper).
TailPoint invert_tail(double x, const GldParams& p, bool lower) {
    double lo = -745.0;
    double hi = std::log(kUniformEps);
    auto point = [&](double t) {
        const double small = std::exp(t);
        const double big = -std::expm1(t);
        return lower ? TailPoint{small, big} : TailPoint{big, small};
    };
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const TailPoint tp = point(mid);
        const bool below = q_pair(tp.y, tp.ybar, p) < x;
        // lower tail: Q increases with t; upper tail: Q decreases with t
        if (below == lower) lo = mid; else hi = mid;
    }
    return point(0.5 * (lo + hi));
}

double gld_cdf_unchecked(double x, const GldParams& p) {
    constexpr double lo_u = kUniformEps;
    constexpr double hi_u = 1.0 - kUniformEps;
    if (std::isnan(x)) return x;
    if (x <= q_raw(lo_u, p)) return lo_u;
    if (x >= q_raw(hi_u, p)) return hi_u;
    double lo = lo_u;
    double hi = hi_u;
    while (hi - lo > 1e-6) {
        const double mid = 0.5 * (lo + hi);
        if (q_raw(mid, p) < x) lo = mid; else hi = mid;
    }
    double y = 0.5 * (lo + hi);
    for (int it = 0; it < 60; ++it) {
        const double r = q_raw(y, p) - x;
        if (r > 0) hi = y; else lo = y;
        if (std::abs(r) <= 1e-10 * std::max(1.0, std::abs(x))) break;
        double next = y - r / dq_raw(y, p);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - y) < 1e-16) break;
        y = next;
    }
    return clamp_uniform(y);
}

// Density 1 / Q'(y) at y = F(x), resolving the tails beyond the clamp.
double gld_pdf_unchecked(double x, const GldParams& p) {
    if (!(x > q_raw(0.0, p) && x < q_raw(1.0, p))) return 0.0;
    TailPoint tp{};
    if (x < q_raw(kUniformEps, p)) {
        tp = invert_tail(x, p, true);
    } else if (x > q_raw(1.0 - kUniformEps, p)) {
        tp = invert_tail(x, p, false);
    } else {
        const double y = gld_cdf_unchecked(x, p);
        tp = {y, 1.0 - y};
    }
    const double d = dq_pair(tp.y, tp.ybar, p);
    return std::isfinite(d) && d > 0.0 ? 1.0 / d : 0.0;
}

// Quantile function tabulated on an evenly spaced logit grid of (eps, 1 - eps).
struct QuantileTable {
    std::vector<double> t;
    std::vector<double> y;
    std::vector<double> q;
};

QuantileTable make_table(const GldParams& p, int m) {
    const double tmax = std::log((1.0 - kUniformEps) / kUniformEps);
    QuantileTable tab;
    tab.t.resize(m + 1);
    tab.y.resize(m + 1);
    tab.q.resize(m + 1);
    for (int k = 0; k <= m; ++k) {
        const double t = -tmax + 2.0 * tmax * k / m;
        tab.t[k] = t;
        tab.y[k] = 1.0 / (1.0 + std::exp(-t));
        tab.q[k] = q_raw(tab.y[k], p);
    }
    return tab;
}

// PIT of ascending data. Without `polish` the result is the logit-space
// interpolation of the table; with it, a bracketed Newton refinement follows.
void pit_sorted(std::span<const double> xs, const GldParams& p, const QuantileTable& tab,
                bool polish, std::vector<double>& out) {
    out.resize(xs.size());
    const std::size_t m = tab.q.size() - 1;
    std::size_t k = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double x = xs[i];
        if (x <= tab.q.front()) {
            out[i] = kUniformEps;
            continue;
        }
        if (x >= tab.q.back()) {
            out[i] = 1.0 - kUniformEps;
            continue;
        }
        while (k + 1 < m && tab.q[k + 1] < x) ++k;
        const double dq = tab.q[k + 1] - tab.q[k];
        const double frac = dq > 0 ? (x - tab.q[k]) / dq : 0.5;
        const double t = tab.t[k] + frac * (tab.t[k + 1] - tab.t[k]);
        double y = 1.0 / (1.0 + std::exp(-t));
        if (polish) {
            double lo = tab.y[k];
            double hi = tab.y[k + 1];
            for (int it = 0; it < 30; ++it) {
                const double r = q_raw(y, p) - x;
                if (r > 0) hi = y; else lo = y;
                if (std::abs(r) <= 1e-10 * std::max(1.0, std::abs(x))) break;
                double next = y - r / dq_raw(y, p);
                if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
                if (std::abs(next - y) < 1e-16) break;
                y = next;
            }
        }
        out[i] = clamp_uniform(y);
    }
}

constexpr int kTableSize = 512;

double ad_objective_sorted(std::span<const double> xs, const GldParams& p, bool exact,
                           std::vector<double>& scratch) {
    if (!gld_is_valid(p)) return kInf;
    const QuantileTable tab = make_table(p, kTableSize);
    pit_sorted(xs, p, tab, exact, scratch);
    return anderson_darling_sorted(scratch);
}

// Scale matched to unit interquartile range and location to zero median.
std::optional<GldParams> standardized_start(double l3, double l4) {
    const double l2 = std::pow(0.75, l3) - std::pow(0.25, l4) - std::pow(0.25, l3) +
                      std::pow(0.75, l4);
    if (!std::isfinite(l2) || std::abs(l2) < 1e-10) return std::nullopt;
    const double l1 = -(std::pow(0.5, l3) - std::pow(0.5, l4)) / l2;
    return GldParams{l1, l2, l3, l4};
}

struct NmContext {
    std::span<const double> xs;
    std::vector<double>* scratch;
};

double nm_objective(const gsl_vector* v, void* params) {
    auto* ctx = static_cast<NmContext*>(params);
    const GldParams p{gsl_vector_get(v, 0), gsl_vector_get(v, 1), gsl_vector_get(v, 2),
                      gsl_vector_get(v, 3)};
    const double f = ad_objective_sorted(ctx->xs, p, true, *ctx->scratch);
    return std::isfinite(f) ? f : 1e12;
}

GldParams nelder_mead(std::span<const double> xs, const GldParams& start,
                      std::vector<double>& scratch) {
    NmContext ctx{xs, &scratch};
    gsl_multimin_function fn{&nm_objective, 4, &ctx};
    gsl_vector* x = gsl_vector_alloc(4);
    gsl_vector* step = gsl_vector_alloc(4);
    gsl_vector_set(x, 0, start.lambda1);
    gsl_vector_set(x, 1, start.lambda2);
    gsl_vector_set(x, 2, start.lambda3);
    gsl_vector_set(x, 3, start.lambda4);
    gsl_vector_set(step, 0, 0.05);
    gsl_vector_set(step, 1, 0.05 * std::abs(start.lambda2));
    gsl_vector_set(step, 2, 0.05);
    gsl_vector_set(step, 3, 0.05);

    gsl_multimin_fminimizer* s =
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 4);
    gsl_multimin_fminimizer_set(s, &fn, x, step);
    for (int iter = 0; iter < 800; ++iter) {
        if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-6) == GSL_SUCCESS) break;
    }
    const gsl_vector* best = gsl_multimin_fminimizer_x(s);
    const GldParams out{gsl_vector_get(best, 0), gsl_vector_get(best, 1),
                        gsl_vector_get(best, 2), gsl_vector_get(best, 3)};
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(step);
    gsl_vector_free(x);
    return out;
}

// ---------------------------------------------------------------------------
// Johnson
// ---------------------------------------------------------------------------

constexpr double kJohnsonZ = 0.524;

struct FourQuantiles {
    double m3, m1, p1, p3;  // x at -3z, -z, +z, +3z
    double m() const { return p3 - p1; }
    double n() const { return m1 - m3; }
    double p() const { return p1 - m1; }
};

FourQuantiles four_quantiles(std::span<const double> sorted) {
    return {sample_quantile(sorted, normal_cdf(-3.0 * kJohnsonZ)),
            sample_quantile(sorted, normal_cdf(-kJohnsonZ)),
            sample_quantile(sorted, normal_cdf(kJohnsonZ)),
            sample_quantile(sorted, normal_cdf(3.0 * kJohnsonZ))};
}

double johnson_z(double x, const JohnsonParams& p) {
    const double u = (x - p.epsilon) / p.lambda;
    switch (p.variant) {
        case JohnsonVariant::SU: return p.gamma + p.eta * std::asinh(u);
        case JohnsonVariant::SB: return p.gamma + p.eta * (std::log(u) - std::log1p(-u));
        case JohnsonVariant::SL: return p.gamma + p.eta * std::log(u);
    }
    return 0.0;
}

// Large-eta SU member standing in for its normal limit.
constexpr double kSuNormalLimitEta = 1e3;

JohnsonParams fit_su(const FourQuantiles& q, std::size_t n_obs) {
    const double m = q.m(), n = q.n(), p = q.p();
    const double mp = m / p, np = n / p;
    // discriminant within three sampling standard errors (about 4.1 / sqrt(n)) under normality
    const double normal_band = 3.0 * 4.1 / std::sqrt(static_cast<double>(n_obs));
    if (mp * np <= 1.0 + 1e-6 && mp * np >= 1.0 - normal_band) {
        const double sigma = p / (2.0 * kJohnsonZ);
        return {JohnsonVariant::SU, 0.0, kSuNormalLimitEta, 0.5 * (q.p1 + q.m1),
                kSuNormalLimitEta * sigma};
    }
    if (!(mp * np > 1.0)) throw FitFailure("Johnson SU: quantile ratio does not admit SU");
    const double eta = 2.0 * kJohnsonZ / std::acosh(0.5 * (mp + np));
    const double gamma = eta * std::asinh((np - mp) / (2.0 * std::sqrt(mp * np - 1.0)));
    const double lambda =
        2.0 * p * std::sqrt(mp * np - 1.0) / ((mp + np - 2.0) * std::sqrt(mp + np + 2.0));
    const double eps = 0.5 * (q.p1 + q.m1) + p * (np - mp) / (2.0 * (mp + np - 2.0));
    return {JohnsonVariant::SU, gamma, eta, eps, lambda};
}

JohnsonParams fit_sb(const FourQuantiles& q) {
    const double m = q.m(), n = q.n(), p = q.p();
    const double pm = p / m, pn = p / n;
    if (!(pm * pn > 1.0)) throw FitFailure("Johnson SB: quantile ratio does not admit SB");
    const double prod = (1.0 + pm) * (1.0 + pn);
    const double eta = kJohnsonZ / std::acosh(0.5 * std::sqrt(prod));
    const double gamma =
        eta * std::asinh((pn - pm) * std::sqrt(prod - 4.0) / (2.0 * (pm * pn - 1.0)));
    const double lambda = p * std::sqrt((prod - 2.0) * (prod - 2.0) - 4.0) / (pm * pn - 1.0);
    const double eps = 0.5 * (q.p1 + q.m1) - 0.5 * lambda + p * (pn - pm) / (2.0 * (pm * pn - 1.0));
    return {JohnsonVariant::SB, gamma, eta, eps, lambda};
}

JohnsonParams fit_sl(const FourQuantiles& q) {
    const double mp = q.m() / q.p();
    if (!(mp > 1.0)) throw FitFailure("Johnson SL: upper quantile spread must exceed the central one");
    const double eta = 2.0 * kJohnsonZ / std::log(mp);
    const double gamma = eta * std::log((mp - 1.0) / (q.p() * std::sqrt(mp)));
    const double eps = 0.5 * (q.p1 + q.m1) - 0.5 * q.p() * (mp + 1.0) / (mp - 1.0);
    return {JohnsonVariant::SL, gamma, eta, eps, 1.0};
}

// Least squares of z on log(x - location) at the four matched quantiles.
JohnsonParams fit_sl_located(const FourQuantiles& q, double location) {
    const std::array<double, 4> x{q.m3, q.m1, q.p1, q.p3};
    const std::array<double, 4> z{-3.0 * kJohnsonZ, -kJohnsonZ, kJohnsonZ, 3.0 * kJohnsonZ};
    std::array<double, 4> w{};
    for (int k = 0; k < 4; ++k) {
        if (!(x[k] > location)) throw FitFailure("Johnson SL: quantiles below the given location");
        w[k] = std::log(x[k] - location);
    }
    const double wbar = (w[0] + w[1] + w[2] + w[3]) / 4.0;
    double sww = 0.0, swz = 0.0;
    for (int k = 0; k < 4; ++k) {
        sww += (w[k] - wbar) * (w[k] - wbar);
        swz += (w[k] - wbar) * z[k];
    }
    if (!(sww > 0.0)) throw FitFailure("Johnson SL: degenerate quantiles");
    const double eta = swz / sww;
    const double gamma = -eta * wbar;  // z sums to zero
    return {JohnsonVariant::SL, gamma, eta, location, 1.0};
}

JohnsonParams fit_variant(std::span<const double> sorted, const FourQuantiles& q,
                          JohnsonVariant variant, std::optional<double> location) {
    JohnsonParams out;
    switch (variant) {
        case JohnsonVariant::SU: out = fit_su(q, sorted.size()); break;
        case JohnsonVariant::SB: out = fit_sb(q); break;
        case JohnsonVariant::SL:
            out = location ? fit_sl_located(q, *location) : fit_sl(q);
            break;
    }
    if (!johnson_is_valid(out)) {
        throw FitFailure(fmt::format("Johnson {}: fitted parameters are degenerate",
                                     johnson_variant_name(variant)));
    }
    const double lo = sorted.front();
    const double hi = sorted.back();
    if (variant == JohnsonVariant::SB && (lo <= out.epsilon || hi >= out.epsilon + out.lambda)) {
        throw FitFailure("Johnson SB: data outside the fitted support");
    }
    if (variant == JohnsonVariant::SL && lo <= out.epsilon) {
        throw FitFailure("Johnson SL: data below the fitted location");
    }
    double prev = -kInf;
    for (double x : sorted) {
        const double u = johnson_cdf(x, out);
        if (!(u >= prev)) throw FitFailure("Johnson: fitted CDF is not monotone on the data");
        prev = u;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// GLD public API
// ---------------------------------------------------------------------------

bool gld_is_valid(const GldParams& p) {
    if (!std::isfinite(p.lambda1) || !std::isfinite(p.lambda2) || !std::isfinite(p.lambda3) ||
        !std::isfinite(p.lambda4) || p.lambda2 == 0.0) {
        return false;
    }
    for (double y : validity_grid()) {
        const double d = dq_raw(y, p);
        if (!(d > 0.0) || !std::isfinite(d)) return false;
    }
    return true;
}

double gld_quantile(double y, const GldParams& p) {
    require_valid(p);
    if (!(y >= 0.0 && y <= 1.0)) throw std::domain_error("gld_quantile: probability outside [0, 1]");
    return q_raw(y, p);
}

double gld_cdf(double x, const GldParams& p) {
    require_valid(p);
    return gld_cdf_unchecked(x, p);
}

double gld_pdf(double x, const GldParams& p) {
    require_valid(p);
    return gld_pdf_unchecked(x, p);
}

double starship_objective(std::span<const double> column, const GldParams& p) {
    require_valid(p);
    std::vector<double> u(column.size());
    for (std::size_t i = 0; i < column.size(); ++i) u[i] = gld_cdf_unchecked(column[i], p);
    return anderson_darling_uniform(u);
}

GldParams gld_fit_starship(std::span<const double> column) {
    std::vector<double> xs = sorted_finite(column, "gld_fit_starship");
    if (count_distinct(xs) < 20) {
        throw FitFailure("gld_fit_starship: need at least 20 distinct values");
    }
    const double median = sample_quantile(xs, 0.5);
    const double iqr = sample_quantile(xs, 0.75) - sample_quantile(xs, 0.25);
    if (!(iqr > 0.0)) throw FitFailure("gld_fit_starship: zero interquartile range");
    for (double& x : xs) x = (x - median) / iqr;

    std::vector<double> scratch;
    std::optional<GldParams> grid_best;
    double grid_value = kInf;
    for (int a = -30; a <= 30; ++a) {
        for (int b = -30; b <= 30; ++b) {
            const auto start = standardized_start(a * 0.05, b * 0.05);
            if (!start) continue;
            const double v = ad_objective_sorted(xs, *start, false, scratch);
            if (v < grid_value) {
                grid_value = v;
                grid_best = start;
            }
        }
    }

    std::vector<GldParams> contenders;
    if (grid_best) contenders.push_back(*grid_best);
    contenders.push_back(*standardized_start(1.0, 1.0));
    if (grid_best) contenders.push_back(nelder_mead(xs, *grid_best, scratch));

    std::optional<GldParams> best;
    double best_value = kInf;
    for (const auto& c : contenders) {
        const double v = ad_objective_sorted(xs, c, true, scratch);
        if (v < best_value) {
            best_value = v;
            best = c;
        }
    }
    if (!best) throw FitFailure("gld_fit_starship: no valid parameter set found");
    return {median + iqr * best->lambda1, best->lambda2 / iqr, best->lambda3, best->lambda4};
}

// ---------------------------------------------------------------------------
// Johnson public API
// ---------------------------------------------------------------------------

std::string_view johnson_variant_name(JohnsonVariant v) {
    switch (v) {
        case JohnsonVariant::SU: return "SU";
        case JohnsonVariant::SB: return "SB";
        case JohnsonVariant::SL: return "SL";
    }
    return "?";
}

JohnsonVariant johnson_variant_from_name(std::string_view name) {
    std::string s(name);
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (s == "SU") return JohnsonVariant::SU;
    if (s == "SB") return JohnsonVariant::SB;
    if (s == "SL") return JohnsonVariant::SL;
    throw InvalidParameter(fmt::format("unknown Johnson variant '{}'", name));
}

bool johnson_is_valid(const JohnsonParams& p) {
    return std::isfinite(p.gamma) && std::isfinite(p.eta) && std::isfinite(p.epsilon) &&
           std::isfinite(p.lambda) && p.eta > 0.0 && p.lambda > 0.0;
}

double johnson_pdf(double x, const JohnsonParams& p) {
    if (!johnson_is_valid(p)) throw InvalidParameter("invalid Johnson parameters");
    const double u = (x - p.epsilon) / p.lambda;
    double jac = 0.0;
    switch (p.variant) {
        case JohnsonVariant::SU: jac = 1.0 / (p.lambda * std::sqrt(u * u + 1.0)); break;
        case JohnsonVariant::SB:
            if (!(u > 0.0 && u < 1.0)) return 0.0;
            jac = 1.0 / (p.lambda * u * (1.0 - u));
            break;
        case JohnsonVariant::SL:
            if (!(u > 0.0)) return 0.0;
            jac = 1.0 / (x - p.epsilon);
            break;
    }
    return p.eta * jac * normal_pdf(johnson_z(x, p));
}

double johnson_cdf(double x, const JohnsonParams& p) {
    if (!johnson_is_valid(p)) throw InvalidParameter("invalid Johnson parameters");
    const double u = (x - p.epsilon) / p.lambda;
    if (p.variant == JohnsonVariant::SB) {
        if (u <= 0.0) return 0.0;
        if (u >= 1.0) return 1.0;
    }
    if (p.variant == JohnsonVariant::SL && u <= 0.0) return 0.0;
    return normal_cdf(johnson_z(x, p));
}

double johnson_quantile(double u, const JohnsonParams& p) {
    if (!johnson_is_valid(p)) throw InvalidParameter("invalid Johnson parameters");
    if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("johnson_quantile: probability outside [0, 1]");
    const double w = (normal_quantile(clamp_uniform(u)) - p.gamma) / p.eta;
    switch (p.variant) {
        case JohnsonVariant::SU: return p.epsilon + p.lambda * std::sinh(w);
        case JohnsonVariant::SB: return p.epsilon + p.lambda / (1.0 + std::exp(-w));
        case JohnsonVariant::SL: return p.epsilon + p.lambda * std::exp(w);
    }
    return 0.0;
}

double johnson_discriminant(std::span<const double> column) {
    const auto xs = sorted_finite(column, "johnson_discriminant");
    if (xs.size() < 2) throw FitFailure("johnson_discriminant: need at least two values");
    const auto q = four_quantiles(xs);
    return q.m() * q.n() / (q.p() * q.p());
}

JohnsonParams johnson_fit(std::span<const double> column, JohnsonFitOptions options) {
    const auto xs = sorted_finite(column, "johnson_fit");
    if (count_distinct(xs) < 5) throw FitFailure("johnson_fit: need at least five distinct values");
    const auto q = four_quantiles(xs);
    if (!(q.m() > 0.0 && q.n() > 0.0 && q.p() > 0.0)) {
        throw FitFailure("johnson_fit: matched quantiles are not strictly increasing");
    }
    if (options.variant) return fit_variant(xs, q, *options.variant, options.location);

    const double d = q.m() * q.n() / (q.p() * q.p());
    std::vector<JohnsonVariant> order;
    if (std::abs(d - 1.0) < 1e-6) {
        order = {JohnsonVariant::SL, JohnsonVariant::SU, JohnsonVariant::SB};
    } else if (d > 1.0) {
        order = {JohnsonVariant::SU, JohnsonVariant::SL, JohnsonVariant::SB};
    } else {
        order = {JohnsonVariant::SB, JohnsonVariant::SL, JohnsonVariant::SU};
    }
    std::string reasons;
    for (auto v : order) {
        try {
            return fit_variant(xs, q, v, options.location);
        } catch (const FitFailure& e) {
            if (!reasons.empty()) reasons += "; ";
            reasons += e.what();
        }
    }
    throw FitFailure(fmt::format("johnson_fit: no variant fits ({})", reasons));
}

// ---------------------------------------------------------------------------
// Empirical margin
// ---------------------------------------------------------------------------

EmpiricalMargin::EmpiricalMargin(std::span<const double> column)
    : sorted_(sorted_finite(column, "empirical margin")) {
    if (count_distinct(sorted_) < 2) throw FitFailure("empirical margin: need two distinct values");
    const double denom = static_cast<double>(sorted_.size()) + 1.0;
    std::vector<double> xs;
    std::vector<double> us;
    for (std::size_t a = 0; a < sorted_.size();) {
        std::size_t b = a;
        while (b < sorted_.size() && sorted_[b] == sorted_[a]) ++b;
        const double avg_rank = 0.5 * (static_cast<double>(a + 1) + static_cast<double>(b));
        xs.push_back(sorted_[a]);
        us.push_back(avg_rank / denom);
        a = b;
    }
    const std::size_t m = xs.size();
    const double left_slope = (us[1] - us[0]) / (xs[1] - xs[0]);
    const double right_slope = (us[m - 1] - us[m - 2]) / (xs[m - 1] - xs[m - 2]);
    knots_x_.push_back(xs[0] - us[0] / left_slope);
    knots_u_.push_back(0.0);
    knots_x_.insert(knots_x_.end(), xs.begin(), xs.end());
    knots_u_.insert(knots_u_.end(), us.begin(), us.end());
    knots_x_.push_back(xs[m - 1] + (1.0 - us[m - 1]) / right_slope);
    knots_u_.push_back(1.0);
}

double EmpiricalMargin::cdf(double x) const {
    if (x <= knots_x_.front()) return 0.0;
    if (x >= knots_x_.back()) return 1.0;
    const auto it = std::upper_bound(knots_x_.begin(), knots_x_.end(), x);
    const auto k = static_cast<std::size_t>(it - knots_x_.begin());
    const double w = (x - knots_x_[k - 1]) / (knots_x_[k] - knots_x_[k - 1]);
    return knots_u_[k - 1] + w * (knots_u_[k] - knots_u_[k - 1]);
}

double EmpiricalMargin::pdf(double x) const {
    if (x < knots_x_.front() || x >= knots_x_.back()) return 0.0;
    const auto it = std::upper_bound(knots_x_.begin(), knots_x_.end(), x);
    const auto k = static_cast<std::size_t>(it - knots_x_.begin());
    return (knots_u_[k] - knots_u_[k - 1]) / (knots_x_[k] - knots_x_[k - 1]);
}

double EmpiricalMargin::quantile(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("empirical quantile: probability outside [0, 1]");
    const auto it = std::lower_bound(knots_u_.begin(), knots_u_.end(), u);
    const auto k = static_cast<std::size_t>(it - knots_u_.begin());
    if (k == 0) return knots_x_.front();
    const double w = (u - knots_u_[k - 1]) / (knots_u_[k] - knots_u_[k - 1]);
    return knots_x_[k - 1] + w * (knots_x_[k] - knots_x_[k - 1]);
}

// ---------------------------------------------------------------------------
// MarginalModel
// ---------------------------------------------------------------------------

MarginalModel MarginalModel::gld(const GldParams& p) {
    require_valid(p);
    return MarginalModel(Payload(p));
}

MarginalModel MarginalModel::johnson(const JohnsonParams& p) {
    if (!johnson_is_valid(p)) throw InvalidParameter("invalid Johnson parameters");
    return MarginalModel(Payload(p));
}

MarginalModel MarginalModel::empirical(std::span<const double> column) {
    return MarginalModel(Payload(EmpiricalMargin(column)));
}

MarginalModel::Kind MarginalModel::kind() const {
    switch (payload_.index()) {
        case 0: return Kind::Gld;
        case 1: return Kind::Johnson;
        default: return Kind::Empirical;
    }
}

const GldParams& MarginalModel::gld_params() const { return std::get<GldParams>(payload_); }
const JohnsonParams& MarginalModel::johnson_params() const {
    return std::get<JohnsonParams>(payload_);
}
const EmpiricalMargin& MarginalModel::empirical_margin() const {
    return std::get<EmpiricalMargin>(payload_);
}

double MarginalModel::cdf(double x) const {
    double u = 0.0;
    switch (kind()) {
        case Kind::Gld: u = gld_cdf_unchecked(x, gld_params()); break;
        case Kind::Johnson: u = johnson_cdf(x, johnson_params()); break;
        case Kind::Empirical: u = empirical_margin().cdf(x); break;
    }
    return clamp_uniform(u);
}

double MarginalModel::pdf(double x) const {
    switch (kind()) {
        case Kind::Gld: return gld_pdf_unchecked(x, gld_params());
        case Kind::Johnson: return johnson_pdf(x, johnson_params());
        case Kind::Empirical: return empirical_margin().pdf(x);
    }
    return 0.0;
}

double MarginalModel::log_pdf(double x) const {
    const double f = pdf(x);
    return f > 0.0 ? std::log(f) : -kInf;
}

double MarginalModel::quantile(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("quantile: probability outside [0, 1]");
    const double v = clamp_uniform(u);
    switch (kind()) {
        case Kind::Gld: return q_raw(v, gld_params());
        case Kind::Johnson: return johnson_quantile(v, johnson_params());
        case Kind::Empirical: return empirical_margin().quantile(v);
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

Eigen::MatrixXd pseudo_observations(const Eigen::MatrixXd& columns) {
    const Eigen::Index n = columns.rows();
    Eigen::MatrixXd out(n, columns.cols());
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index c = 0; c < columns.cols(); ++c) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::sort(order.begin(), order.end(),
                  [&](Eigen::Index a, Eigen::Index b) { return columns(a, c) < columns(b, c); });
        for (std::size_t a = 0; a < order.size();) {
            std::size_t b = a;
            while (b < order.size() && columns(order[b], c) == columns(order[a], c)) ++b;
            const double avg_rank = 0.5 * (static_cast<double>(a + 1) + static_cast<double>(b));
            for (std::size_t k = a; k < b; ++k) out(order[k], c) = avg_rank / (static_cast<double>(n) + 1.0);
            a = b;
        }
    }
    return out;
}

Eigen::MatrixXd pit(const Eigen::MatrixXd& columns, std::span<const MarginalModel> models) {
    if (static_cast<std::size_t>(columns.cols()) != models.size()) {
        throw LengthMismatch("pit: number of models differs from number of columns");
    }
    Eigen::MatrixXd out(columns.rows(), columns.cols());
    for (Eigen::Index c = 0; c < columns.cols(); ++c) {
        const auto& m = models[static_cast<std::size_t>(c)];
        if (m.kind() == MarginalModel::Kind::Gld) {
            // Sort once and sweep a quantile table for speed.
            std::vector<Eigen::Index> order(static_cast<std::size_t>(columns.rows()));
            std::iota(order.begin(), order.end(), Eigen::Index{0});
            std::sort(order.begin(), order.end(),
                      [&](Eigen::Index a, Eigen::Index b) { return columns(a, c) < columns(b, c); });
            std::vector<double> xs(order.size());
            for (std::size_t k = 0; k < order.size(); ++k) xs[k] = columns(order[k], c);
            const auto tab = make_table(m.gld_params(), kTableSize);
            std::vector<double> u;
            pit_sorted(xs, m.gld_params(), tab, true, u);
            for (std::size_t k = 0; k < order.size(); ++k) out(order[k], c) = u[k];
        } else {
            for (Eigen::Index r = 0; r < columns.rows(); ++r) out(r, c) = m.cdf(columns(r, c));
        }
    }
    return out;
}

Eigen::MatrixXd inverse_pit(const Eigen::MatrixXd& uniforms, std::span<const MarginalModel> models) {
    if (static_cast<std::size_t>(uniforms.cols()) != models.size()) {
        throw LengthMismatch("inverse_pit: number of models differs from number of columns");
    }
    Eigen::MatrixXd out(uniforms.rows(), uniforms.cols());
    for (Eigen::Index c = 0; c < uniforms.cols(); ++c) {
        for (Eigen::Index r = 0; r < uniforms.rows(); ++r) {
            out(r, c) = models[static_cast<std::size_t>(c)].quantile(uniforms(r, c));
        }
    }
    return out;
}

}  // namespace vinecop
