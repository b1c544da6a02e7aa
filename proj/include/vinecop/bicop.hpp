#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vinecop {

// One-parameter bivariate copula families; declaration order is the fixed
// tie-break order used by family selection.
enum class Family { Independence, Gaussian, Clayton, Gumbel, Frank, Joe };

enum class Rotation { Deg0 = 0, Deg90 = 90, Deg180 = 180, Deg270 = 270 };

// Which argument of the copula the h-function conditions on.
enum class Conditioning { First = 1, Second = 2 };

enum class Criterion { Aic, Bic };

std::size_t parameter_count(Family family);

// True for the families that carry rotated variants (Clayton, Gumbel, Joe).
bool is_rotatable(Family family);

int degrees(Rotation rotation);
Rotation rotation_from_degrees(int degrees);  // throws InvalidParameter

std::string_view family_name(Family family);  // "Clayton"
std::string_view family_tag(Family family);   // "clayton"
Family family_from_tag(std::string_view tag);  // accepts tag or name, throws InvalidParameter

struct PairCopulaSpec {
    Family family = Family::Independence;
    Rotation rotation = Rotation::Deg0;
    std::vector<double> theta;

    friend bool operator==(const PairCopulaSpec&, const PairCopulaSpec&) = default;
};

// Validated construction; throws InvalidParameter on a bad rotation or theta.
PairCopulaSpec make_spec(Family family, Rotation rotation, std::vector<double> theta);
void validate(const PairCopulaSpec& spec);

// "Clayton_90", "Gaussian", ...
std::string display_name(const PairCopulaSpec& spec);

struct TailDependence {
    double lower = 0.0;
    double upper = 0.0;
};

struct FittedPairCopula {
    PairCopulaSpec spec;
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    double tau = 0.0;  // Kendall's tau implied by the fitted parameter
    double lambda_lower = 0.0;
    double lambda_upper = 0.0;
    std::size_t n_obs = 0;
};

struct Candidate {
    Family family;
    Rotation rotation;

    friend bool operator==(const Candidate&, const Candidate&) = default;
};

// Independence, Gaussian, Frank, and Clayton/Gumbel/Joe at every rotation.
std::vector<Candidate> full_candidate_set();

double aic(double loglik, std::size_t n_params);
double bic(double loglik, std::size_t n_params, std::size_t n_obs);

// Maps copula arguments onto the arguments of the unrotated family.
std::pair<double, double> rotate_inputs(Rotation rotation, double u1, double u2);

double bicop_cdf(const PairCopulaSpec& spec, double u1, double u2);
double bicop_pdf(const PairCopulaSpec& spec, double u1, double u2);
double bicop_log_pdf(const PairCopulaSpec& spec, double u1, double u2);

// Conditional distribution of the free argument given the conditioning one:
// First  -> dC/du1 evaluated at (u_cond, u_free)
// Second -> dC/du2 evaluated at (u_free, u_cond)
double hfunc(const PairCopulaSpec& spec, Conditioning which, double u_cond, double u_free);

// Inverse of hfunc in its free argument.
double hinv(const PairCopulaSpec& spec, Conditioning which, double u_cond, double p);

double param_to_tau(const PairCopulaSpec& spec);

// Throws RangeError when tau is not attainable by the family/rotation.
PairCopulaSpec tau_to_param(Family family, Rotation rotation, double tau);

TailDependence tail_dependence(const PairCopulaSpec& spec);

// Tail dependence from the defining limits, evaluated at t = 1e-6 and 1e-7
// (resp. 1 - t). A limit is reported as 0 unless both evaluations agree
// within 1e-3.
TailDependence tail_dependence_numeric(const PairCopulaSpec& spec);

// Sum of log densities over paired observations.
double bicop_loglik(const PairCopulaSpec& spec, std::span<const double> u1,
                    std::span<const double> u2);

// Maximum-likelihood fit of a single family/rotation. Requires n >= 10.
FittedPairCopula fit_mle(Family family, Rotation rotation, std::span<const double> u1,
                         std::span<const double> u2);

// Fits every candidate and returns the one with the lowest criterion value.
// Ties go to fewer parameters, then family order, then rotation.
FittedPairCopula select_family(std::span<const double> u1, std::span<const double> u2,
                               std::span<const Candidate> candidates, Criterion criterion);

FittedPairCopula make_fitted(const PairCopulaSpec& spec, double loglik, std::size_t n_obs);

}  // namespace vinecop
