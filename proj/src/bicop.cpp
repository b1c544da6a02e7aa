#include "vinecop/bicop.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <tuple>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "vinecop/dependence.hpp"
#include "vinecop/errors.hpp"
#include "vinecop/numeric.hpp"

namespace vinecop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Unrotated families. All in-scope families are exchangeable, so a single
// h-function h(v | u) = dC(u, v)/du describes both conditionings.
// ---------------------------------------------------------------------------

// log(exp(a) + exp(b) - 1) for a, b >= 0
double log_sum_exp_minus_one(double a, double b) {
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi) - std::exp(-hi));
}

double gaussian_cdf(double rho, double u, double v) {
    const double x = normal_quantile(u);
    const double y = normal_quantile(v);
    if (rho == 0.0) return u * v;
    // Plackett's identity with r = sin(a): the integrand stays smooth as |rho| -> 1.
    auto dens = [&](double a) {
        const double s = std::sin(a);
        const double c = std::cos(a);
        return std::exp(-(x * x - 2.0 * s * x * y + y * y) / (2.0 * c * c)) / (2.0 * M_PI);
    };
    const double top = std::asin(rho);
    const double lo = std::min(0.0, top);
    const double hi = std::max(0.0, top);
    double integral =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(dens, lo, hi, 15, 1e-12);
    if (rho < 0.0) integral = -integral;
    return std::clamp(u * v + integral, 0.0, std::min(u, v));
}

double gaussian_log_pdf(double rho, double u, double v) {
    const double x = normal_quantile(u);
    const double y = normal_quantile(v);
    const double s = 1.0 - rho * rho;
    return -0.5 * std::log(s) - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * s);
}

double clayton_log_term(double th, double u, double v) {
    // log(u^-th + v^-th - 1)
    return log_sum_exp_minus_one(-th * std::log(u), -th * std::log(v));
}

double joe_log_s(double th, double u, double v, double& x, double& y) {
    // S = 1 - (1 - ubar^th)(1 - vbar^th)
    const double lu = std::log1p(-u);
    const double lv = std::log1p(-v);
    x = std::exp(th * lu);
    y = std::exp(th * lv);
    const double omx = -std::expm1(th * lu);
    const double omy = -std::expm1(th * lv);
    const double prod = omx * omy;
    if (prod < 0.5) return std::log1p(-prod);
    return std::log(x + y - x * y);
}

double base_cdf(Family f, double th, double u, double v) {
    switch (f) {
        case Family::Independence:
            return u * v;
        case Family::Gaussian:
            return gaussian_cdf(th, u, v);
        case Family::Clayton:
            return std::exp(-clayton_log_term(th, u, v) / th);
        case Family::Gumbel: {
            const double x = -std::log(u);
            const double y = -std::log(v);
            const double hi = std::max(x, y);
            const double lo = std::min(x, y);
            const double log_t = th * std::log(hi) + std::log1p(std::pow(lo / hi, th));
            return std::exp(-std::exp(log_t / th));
        }
        case Family::Frank: {
            const double a = std::expm1(-th * u);
            const double b = std::expm1(-th * v);
            const double k = std::expm1(-th);
            return -std::log1p(a * b / k) / th;
        }
        case Family::Joe: {
            double x = 0.0;
            double y = 0.0;
            const double log_s = joe_log_s(th, u, v, x, y);
            return -std::expm1(log_s / th);
        }
    }
    return 0.0;
}

double base_log_pdf(Family f, double th, double u, double v) {
    switch (f) {
        case Family::Independence:
            return 0.0;
        case Family::Gaussian:
            return gaussian_log_pdf(th, u, v);
        case Family::Clayton:
            return std::log1p(th) - (1.0 + th) * (std::log(u) + std::log(v)) -
                   (2.0 + 1.0 / th) * clayton_log_term(th, u, v);
        case Family::Gumbel: {
            const double x = -std::log(u);
            const double y = -std::log(v);
            const double hi = std::max(x, y);
            const double lo = std::min(x, y);
            const double log_t = th * std::log(hi) + std::log1p(std::pow(lo / hi, th));
            const double a = std::exp(log_t / th);
            return -a + x + y + (th - 1.0) * (std::log(x) + std::log(y)) +
                   (1.0 / th - 2.0) * log_t + std::log(a + th - 1.0);
        }
        case Family::Frank: {
            const double a = std::expm1(-th * u);
            const double b = std::expm1(-th * v);
            const double k = std::expm1(-th);
            return std::log(-th * k) - th * (u + v) - 2.0 * std::log(std::fabs(k + a * b));
        }
        case Family::Joe: {
            double x = 0.0;
            double y = 0.0;
            const double log_s = joe_log_s(th, u, v, x, y);
            return (1.0 / th - 2.0) * log_s + (th - 1.0) * (std::log1p(-u) + std::log1p(-v)) +
                   std::log(th - 1.0 + std::exp(log_s));
        }
    }
    return 0.0;
}

// h(v | u) = dC(u, v)/du
double base_h(Family f, double th, double v, double u) {
    switch (f) {
        case Family::Independence:
            return v;
        case Family::Gaussian: {
            const double x = normal_quantile(u);
            const double y = normal_quantile(v);
            return normal_cdf((y - th * x) / std::sqrt(1.0 - th * th));
        }
        case Family::Clayton:
            return std::exp(-(th + 1.0) * std::log(u) -
                            (1.0 + 1.0 / th) * clayton_log_term(th, u, v));
        case Family::Gumbel: {
            const double x = -std::log(u);
            const double y = -std::log(v);
            const double hi = std::max(x, y);
            const double lo = std::min(x, y);
            const double log_t = th * std::log(hi) + std::log1p(std::pow(lo / hi, th));
            const double a = std::exp(log_t / th);
            return std::exp(-a + (1.0 / th - 1.0) * log_t + (th - 1.0) * std::log(x) + x);
        }
        case Family::Frank: {
            const double a = std::expm1(-th * u);
            const double b = std::expm1(-th * v);
            const double k = std::expm1(-th);
            return (a + 1.0) * b / (k + a * b);
        }
        case Family::Joe: {
            double x = 0.0;
            double y = 0.0;
            const double log_s = joe_log_s(th, u, v, x, y);
            const double omy = -std::expm1(th * std::log1p(-v));
            return std::exp((1.0 / th - 1.0) * log_s + (th - 1.0) * std::log1p(-u)) * omy;
        }
    }
    return v;
}

double bisect_h(Family f, double th, double p, double u) {
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double h = base_h(f, th, clamp_uniform(mid), u);
        if (h < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// v such that h(v | u) = p
double base_hinv(Family f, double th, double p, double u) {
    switch (f) {
        case Family::Independence:
            return p;
        case Family::Gaussian: {
            const double x = normal_quantile(u);
            return normal_cdf(normal_quantile(p) * std::sqrt(1.0 - th * th) + th * x);
        }
        case Family::Clayton: {
            // 1 + (p^(-th/(1+th)) - 1) * u^-th, assembled in logs
            const double e = std::expm1(-th / (1.0 + th) * std::log(p));
            const double b = -th * std::log(u);
            const double log_e = std::log(e);
            const double s = b + log_e;
            const double log_term = s < 700.0 ? std::log1p(std::exp(s)) : s + std::log1p(std::exp(-s));
            return std::exp(-log_term / th);
        }
        case Family::Frank: {
            const double a = std::expm1(-th * u);
            const double k = std::expm1(-th);
            const double b = p * k / (1.0 + a * (1.0 - p));
            return -std::log1p(b) / th;
        }
        case Family::Gumbel:
        case Family::Joe:
            return bisect_h(f, th, p, u);
    }
    return p;
}

struct Base {
    Family family;
    double theta;
};

Base base_of(const PairCopulaSpec& spec) {
    return {spec.family, spec.theta.empty() ? 0.0 : spec.theta.front()};
}

double rotated_cdf(const PairCopulaSpec& spec, double u1, double u2) {
    const auto [f, th] = base_of(spec);
    switch (spec.rotation) {
        case Rotation::Deg0:
            return base_cdf(f, th, u1, u2);
        case Rotation::Deg90:
            return u2 - base_cdf(f, th, u2, 1.0 - u1);
        case Rotation::Deg180:
            return u1 + u2 - 1.0 + base_cdf(f, th, 1.0 - u1, 1.0 - u2);
        case Rotation::Deg270:
            return u1 - base_cdf(f, th, 1.0 - u2, u1);
    }
    return 0.0;
}

double rotated_log_pdf(const PairCopulaSpec& spec, double u1, double u2) {
    const auto [f, th] = base_of(spec);
    const auto [a, b] = rotate_inputs(spec.rotation, clamp_uniform(u1), clamp_uniform(u2));
    return base_log_pdf(f, th, clamp_uniform(a), clamp_uniform(b));
}

double rotated_h(const PairCopulaSpec& spec, Conditioning which, double c, double v) {
    const auto [f, th] = base_of(spec);
    c = clamp_uniform(c);
    v = clamp_uniform(v);
    const double cc = clamp_uniform(1.0 - c);
    const double vc = clamp_uniform(1.0 - v);
    double h = 0.0;
    if (which == Conditioning::First) {
        switch (spec.rotation) {
            case Rotation::Deg0: h = base_h(f, th, v, c); break;
            case Rotation::Deg90: h = base_h(f, th, v, cc); break;
            case Rotation::Deg180: h = 1.0 - base_h(f, th, vc, cc); break;
            case Rotation::Deg270: h = 1.0 - base_h(f, th, vc, c); break;
        }
    } else {
        switch (spec.rotation) {
            case Rotation::Deg0: h = base_h(f, th, v, c); break;
            case Rotation::Deg90: h = 1.0 - base_h(f, th, vc, c); break;
            case Rotation::Deg180: h = 1.0 - base_h(f, th, vc, cc); break;
            case Rotation::Deg270: h = base_h(f, th, v, cc); break;
        }
    }
    return clamp_uniform(h);
}

double rotated_hinv(const PairCopulaSpec& spec, Conditioning which, double c, double p) {
    const auto [f, th] = base_of(spec);
    c = clamp_uniform(c);
    p = clamp_uniform(p);
    const double cc = clamp_uniform(1.0 - c);
    const double pc = clamp_uniform(1.0 - p);
    double v = 0.0;
    if (which == Conditioning::First) {
        switch (spec.rotation) {
            case Rotation::Deg0: v = base_hinv(f, th, p, c); break;
            case Rotation::Deg90: v = base_hinv(f, th, p, cc); break;
            case Rotation::Deg180: v = 1.0 - base_hinv(f, th, pc, cc); break;
            case Rotation::Deg270: v = 1.0 - base_hinv(f, th, pc, c); break;
        }
    } else {
        switch (spec.rotation) {
            case Rotation::Deg0: v = base_hinv(f, th, p, c); break;
            case Rotation::Deg90: v = 1.0 - base_hinv(f, th, pc, c); break;
            case Rotation::Deg180: v = 1.0 - base_hinv(f, th, pc, cc); break;
            case Rotation::Deg270: v = base_hinv(f, th, p, cc); break;
        }
    }
    return clamp_uniform(v);
}

// D1(x) = (1/x) * integral_0^x t / (e^t - 1) dt
double debye1(double x) {
    auto integrand = [](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); };
    const double lo = std::min(0.0, x);
    const double hi = std::max(0.0, x);
    double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        integrand, lo, hi, 15, 1e-14);
    if (x < 0.0) integral = -integral;
    return integral / x;
}

double base_tau(Family f, double th) {
    switch (f) {
        case Family::Independence:
            return 0.0;
        case Family::Gaussian:
            return 2.0 / M_PI * std::asin(th);
        case Family::Clayton:
            return th / (th + 2.0);
        case Family::Gumbel:
            return 1.0 - 1.0 / th;
        case Family::Frank:
            return 1.0 - 4.0 / th + 4.0 * debye1(th) / th;
        case Family::Joe: {
            using boost::math::digamma;
            if (std::fabs(th - 2.0) < 1e-8) return 1.0 - boost::math::trigamma(2.0);
            return 1.0 + 2.0 / (2.0 - th) * (digamma(2.0) - digamma(2.0 / th + 1.0));
        }
    }
    return 0.0;
}

// Solves base_tau(f, theta) = tau on theta in [lo, +inf) by bracket expansion.
double invert_tau_monotone(Family f, double tau, double lo) {
    auto g = [&](double th) { return base_tau(f, th) - tau; };
    double hi = std::max(2.0 * lo, lo + 1.0);
    int guard = 0;
    while (g(hi) < 0.0) {
        hi *= 2.0;
        if (++guard > 60) throw RangeError("tau not attainable");
    }
    boost::math::tools::eps_tolerance<double> tol(48);
    std::uintmax_t max_iter = 200;
    auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, tol, max_iter);
    return 0.5 * (a + b);
}

bool theta_valid(Family f, const std::vector<double>& theta) {
    if (theta.size() != parameter_count(f)) return false;
    if (f == Family::Independence) return true;
    const double th = theta.front();
    if (!std::isfinite(th)) return false;
    switch (f) {
        case Family::Gaussian: return th > -1.0 && th < 1.0;
        case Family::Clayton: return th > 0.0;
        case Family::Gumbel: return th >= 1.0;
        case Family::Frank: return th != 0.0;
        case Family::Joe: return th >= 1.0;
        case Family::Independence: return true;
    }
    return false;
}

struct Reparam {
    double lo;
    double hi;
    double (*to_theta)(double);
    double (*to_z)(double);
};

Reparam reparam_of(Family f) {
    switch (f) {
        case Family::Gaussian:
            return {std::atanh(-0.9999), std::atanh(0.9999), [](double z) { return std::tanh(z); },
                    [](double t) { return std::atanh(t); }};
        case Family::Clayton:
            return {std::log(1e-4), std::log(28.0), [](double z) { return std::exp(z); },
                    [](double t) { return std::log(t); }};
        case Family::Gumbel:
            return {std::log(1e-5), std::log(49.0), [](double z) { return 1.0 + std::exp(z); },
                    [](double t) { return std::log(t - 1.0); }};
        case Family::Joe:
            return {std::log(1e-5), std::log(29.0), [](double z) { return 1.0 + std::exp(z); },
                    [](double t) { return std::log(t - 1.0); }};
        case Family::Frank:
            return {-35.0, 35.0,
                    [](double z) { return std::fabs(z) < 1e-6 ? std::copysign(1e-6, z) : z; },
                    [](double t) { return t; }};
        case Family::Independence:
            break;
    }
    return {0.0, 0.0, nullptr, nullptr};
}

}  // namespace

std::size_t parameter_count(Family family) {
    return family == Family::Independence ? 0 : 1;
}

bool is_rotatable(Family family) {
    return family == Family::Clayton || family == Family::Gumbel || family == Family::Joe;
}

int degrees(Rotation rotation) { return static_cast<int>(rotation); }

Rotation rotation_from_degrees(int deg) {
    switch (deg) {
        case 0: return Rotation::Deg0;
        case 90: return Rotation::Deg90;
        case 180: return Rotation::Deg180;
        case 270: return Rotation::Deg270;
        default: throw InvalidParameter("rotation must be 0, 90, 180 or 270 degrees");
    }
}

std::string_view family_name(Family family) {
    switch (family) {
        case Family::Independence: return "Independence";
        case Family::Gaussian: return "Gaussian";
        case Family::Clayton: return "Clayton";
        case Family::Gumbel: return "Gumbel";
        case Family::Frank: return "Frank";
        case Family::Joe: return "Joe";
    }
    return "";
}

std::string_view family_tag(Family family) {
    switch (family) {
        case Family::Independence: return "indep";
        case Family::Gaussian: return "gaussian";
        case Family::Clayton: return "clayton";
        case Family::Gumbel: return "gumbel";
        case Family::Frank: return "frank";
        case Family::Joe: return "joe";
    }
    return "";
}

Family family_from_tag(std::string_view tag) {
    for (Family f : {Family::Independence, Family::Gaussian, Family::Clayton, Family::Gumbel,
                     Family::Frank, Family::Joe}) {
        if (tag == family_tag(f) || tag == family_name(f)) return f;
    }
    if (tag == "independence") return Family::Independence;
    throw InvalidParameter("unknown copula family '" + std::string(tag) + "'");
}

void validate(const PairCopulaSpec& spec) {
    if (spec.rotation != Rotation::Deg0 && !is_rotatable(spec.family)) {
        throw InvalidParameter(std::string(family_name(spec.family)) +
                               " copula admits only the 0 degree rotation");
    }
    if (!theta_valid(spec.family, spec.theta)) {
        throw InvalidParameter("parameter outside the domain of the " +
                               std::string(family_name(spec.family)) + " copula");
    }
}

PairCopulaSpec make_spec(Family family, Rotation rotation, std::vector<double> theta) {
    PairCopulaSpec spec{family, rotation, std::move(theta)};
    validate(spec);
    return spec;
}

std::string display_name(const PairCopulaSpec& spec) {
    std::string name(family_name(spec.family));
    if (spec.rotation != Rotation::Deg0) name += "_" + std::to_string(degrees(spec.rotation));
    return name;
}

std::vector<Candidate> full_candidate_set() {
    std::vector<Candidate> out{{Family::Independence, Rotation::Deg0},
                               {Family::Gaussian, Rotation::Deg0},
                               {Family::Frank, Rotation::Deg0}};
    for (Family f : {Family::Clayton, Family::Gumbel, Family::Joe}) {
        for (Rotation r : {Rotation::Deg0, Rotation::Deg90, Rotation::Deg180, Rotation::Deg270}) {
            out.push_back({f, r});
        }
    }
    return out;
}

double aic(double loglik, std::size_t n_params) {
    return 2.0 * static_cast<double>(n_params) - 2.0 * loglik;
}

double bic(double loglik, std::size_t n_params, std::size_t n_obs) {
    return static_cast<double>(n_params) * std::log(static_cast<double>(n_obs)) - 2.0 * loglik;
}

std::pair<double, double> rotate_inputs(Rotation rotation, double u1, double u2) {
    switch (rotation) {
        case Rotation::Deg0: return {u1, u2};
        case Rotation::Deg90: return {u2, 1.0 - u1};
        case Rotation::Deg180: return {1.0 - u1, 1.0 - u2};
        case Rotation::Deg270: return {1.0 - u2, u1};
    }
    return {u1, u2};
}

double bicop_cdf(const PairCopulaSpec& spec, double u1, double u2) {
    validate(spec);
    if (u1 <= 0.0 || u2 <= 0.0) return 0.0;
    if (u1 >= 1.0) return std::min(u2, 1.0);
    if (u2 >= 1.0) return u1;
    return std::clamp(rotated_cdf(spec, u1, u2), 0.0, std::min(u1, u2));
}

double bicop_log_pdf(const PairCopulaSpec& spec, double u1, double u2) {
    validate(spec);
    return rotated_log_pdf(spec, u1, u2);
}

double bicop_pdf(const PairCopulaSpec& spec, double u1, double u2) {
    return std::exp(bicop_log_pdf(spec, u1, u2));
}

double hfunc(const PairCopulaSpec& spec, Conditioning which, double u_cond, double u_free) {
    validate(spec);
    return rotated_h(spec, which, u_cond, u_free);
}

double hinv(const PairCopulaSpec& spec, Conditioning which, double u_cond, double p) {
    validate(spec);
    return rotated_hinv(spec, which, u_cond, p);
}

double param_to_tau(const PairCopulaSpec& spec) {
    validate(spec);
    const auto [f, th] = base_of(spec);
    const double tau = base_tau(f, th);
    const bool negate = spec.rotation == Rotation::Deg90 || spec.rotation == Rotation::Deg270;
    return negate ? -tau : tau;
}

PairCopulaSpec tau_to_param(Family family, Rotation rotation, double tau) {
    if (rotation != Rotation::Deg0 && !is_rotatable(family)) {
        throw InvalidParameter(std::string(family_name(family)) +
                               " copula admits only the 0 degree rotation");
    }
    if (!(tau > -1.0 && tau < 1.0)) throw RangeError("tau must lie in (-1, 1)");
    const bool negate = rotation == Rotation::Deg90 || rotation == Rotation::Deg270;
    const double t = negate ? -tau : tau;
    auto unattainable = [&] {
        return RangeError("tau = " + std::to_string(tau) + " is not attainable by " +
                          display_name({family, rotation, {}}));
    };
    double th = 0.0;
    switch (family) {
        case Family::Independence:
            if (tau != 0.0) throw unattainable();
            return {family, rotation, {}};
        case Family::Gaussian:
            th = std::sin(M_PI * t / 2.0);
            break;
        case Family::Clayton:
            if (!(t > 0.0)) throw unattainable();
            th = 2.0 * t / (1.0 - t);
            break;
        case Family::Gumbel:
            if (t < 0.0) throw unattainable();
            th = 1.0 / (1.0 - t);
            break;
        case Family::Joe:
            if (t < 0.0) throw unattainable();
            th = t == 0.0 ? 1.0 : invert_tau_monotone(Family::Joe, t, 1.0);
            break;
        case Family::Frank: {
            if (t == 0.0) throw unattainable();
            const double a = std::fabs(t);
            // tau ~ theta / 9 near independence
            th = a < 1e-7 ? 9.0 * a : invert_tau_monotone(Family::Frank, a, 1e-6);
            if (t < 0.0) th = -th;
            break;
        }
    }
    return make_spec(family, rotation, {th});
}

TailDependence tail_dependence(const PairCopulaSpec& spec) {
    validate(spec);
    const auto [f, th] = base_of(spec);
    TailDependence base;
    switch (f) {
        case Family::Clayton: base = {std::pow(2.0, -1.0 / th), 0.0}; break;
        case Family::Gumbel:
        case Family::Joe: base = {0.0, 2.0 - std::pow(2.0, 1.0 / th)}; break;
        default: break;
    }
    switch (spec.rotation) {
        case Rotation::Deg0: return base;
        case Rotation::Deg180: return {base.upper, base.lower};
        default: return {0.0, 0.0};
    }
}

TailDependence tail_dependence_numeric(const PairCopulaSpec& spec) {
    validate(spec);
    auto lower_at = [&](double t) { return rotated_cdf(spec, t, t) / t; };
    auto upper_at = [&](double s) {
        const double t = 1.0 - s;
        return (1.0 - 2.0 * t + rotated_cdf(spec, t, t)) / (1.0 - t);
    };
    auto limit = [](double a, double b) {
        if (std::fabs(a - b) > 1e-3) return 0.0;
        return std::clamp(b, 0.0, 1.0);
    };
    return {limit(lower_at(1e-6), lower_at(1e-7)), limit(upper_at(1e-6), upper_at(1e-7))};
}

double bicop_loglik(const PairCopulaSpec& spec, std::span<const double> u1,
                    std::span<const double> u2) {
    validate(spec);
    if (u1.size() != u2.size()) throw LengthMismatch("copula data columns differ in length");
    if (spec.family == Family::Independence) return 0.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < u1.size(); ++k) acc += rotated_log_pdf(spec, u1[k], u2[k]);
    return acc;
}

FittedPairCopula make_fitted(const PairCopulaSpec& spec, double loglik, std::size_t n_obs) {
    FittedPairCopula out;
    out.spec = spec;
    out.loglik = loglik;
    out.n_obs = n_obs;
    const std::size_t np = parameter_count(spec.family);
    out.aic = aic(loglik, np);
    out.bic = bic(loglik, np, n_obs);
    out.tau = param_to_tau(spec);
    const TailDependence td = tail_dependence(spec);
    out.lambda_lower = td.lower;
    out.lambda_upper = td.upper;
    return out;
}

FittedPairCopula fit_mle(Family family, Rotation rotation, std::span<const double> u1,
                         std::span<const double> u2) {
    if (u1.size() != u2.size()) throw LengthMismatch("copula data columns differ in length");
    const std::size_t n = u1.size();
    if (n < 10) throw FitFailure("at least 10 observations are required to fit a pair-copula");
    if (rotation != Rotation::Deg0 && !is_rotatable(family)) {
        throw InvalidParameter(std::string(family_name(family)) +
                               " copula admits only the 0 degree rotation");
    }
    if (family == Family::Independence) return make_fitted({family, rotation, {}}, 0.0, n);

    const Reparam rp = reparam_of(family);
    const bool negate = rotation == Rotation::Deg90 || rotation == Rotation::Deg270;
    const double sample_tau = kendall_tau(u1, u2);

    double start = 0.0;
    try {
        double t = std::clamp(sample_tau, -0.95, 0.95);
        if (family == Family::Frank && std::fabs(t) < 1e-4) t = t < 0.0 ? -1e-4 : 1e-4;
        start = rp.to_z(tau_to_param(family, rotation, t).theta.front());
    } catch (const RangeError&) {
        // wrong-signed dependence: start at the independence end of the domain
        start = family == Family::Gaussian || family == Family::Frank
                    ? (negate ? -1e-3 : 1e-3)
                    : rp.lo;
    }

    PairCopulaSpec spec{family, rotation, {0.0}};
    auto negloglik = [&](double z) {
        spec.theta[0] = rp.to_theta(z);
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += rotated_log_pdf(spec, u1[k], u2[k]);
        return -acc;
    };
    const ScalarMinimum best = minimize_scalar(negloglik, start, rp.lo, rp.hi);
    spec.theta[0] = rp.to_theta(best.argmin);
    validate(spec);
    const double ll = bicop_loglik(spec, u1, u2);
    if (!std::isfinite(ll)) throw FitFailure("log-likelihood is not finite at the optimum");
    return make_fitted(spec, ll, n);
}

FittedPairCopula select_family(std::span<const double> u1, std::span<const double> u2,
                               std::span<const Candidate> candidates, Criterion criterion) {
    if (candidates.empty()) throw InvalidParameter("candidate family set is empty");
    std::optional<FittedPairCopula> best;
    std::string last_error;
    auto key = [&](const FittedPairCopula& f) {
        const double value = criterion == Criterion::Aic ? f.aic : f.bic;
        return std::make_tuple(value, parameter_count(f.spec.family),
                               static_cast<int>(f.spec.family), degrees(f.spec.rotation));
    };
    for (const Candidate& c : candidates) {
        FittedPairCopula fit;
        try {
            fit = fit_mle(c.family, c.rotation, u1, u2);
        } catch (const FitFailure& e) {
            last_error = e.what();
            continue;
        }
        if (!best || key(fit) < key(*best)) best = std::move(fit);
    }
    if (!best) throw FitFailure("every candidate family failed: " + last_error);
    return *best;
}

}  // namespace vinecop
