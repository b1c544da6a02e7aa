#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace vinecop {

// ---------------------------------------------------------------------------
// Generalized lambda distribution (RS parameterization)
//   Q(y) = lambda1 + (y^lambda3 - (1 - y)^lambda4) / lambda2
// ---------------------------------------------------------------------------

struct GldParams {
    double lambda1 = 0.0;  // location
    double lambda2 = 1.0;  // inverse scale, nonzero
    double lambda3 = 1.0;  // left shape
    double lambda4 = 1.0;  // right shape

    friend bool operator==(const GldParams&, const GldParams&) = default;
};

// Q'(y) > 0 on a dense grid of (0, 1), including points within 1e-12 of the ends.
bool gld_is_valid(const GldParams& p);

// The functions below throw InvalidParameter when gld_is_valid fails.
double gld_quantile(double y, const GldParams& p);
double gld_cdf(double x, const GldParams& p);
double gld_pdf(double x, const GldParams& p);

// Anderson-Darling uniformity statistic of the PIT of `column` under `p`.
double starship_objective(std::span<const double> column, const GldParams& p);

// Starship estimate: grid over (lambda3, lambda4) then Nelder-Mead on all four
// parameters, minimizing the Anderson-Darling statistic of the PIT.
// Requires at least 20 distinct finite values; throws FitFailure otherwise.
GldParams gld_fit_starship(std::span<const double> column);

// ---------------------------------------------------------------------------
// Johnson system
// ---------------------------------------------------------------------------

enum class JohnsonVariant { SU, SB, SL };

std::string_view johnson_variant_name(JohnsonVariant v);
JohnsonVariant johnson_variant_from_name(std::string_view name);

struct JohnsonParams {
    JohnsonVariant variant = JohnsonVariant::SU;
    double gamma = 0.0;
    double eta = 1.0;      // > 0
    double epsilon = 0.0;  // location
    double lambda = 1.0;   // > 0

    friend bool operator==(const JohnsonParams&, const JohnsonParams&) = default;
};

bool johnson_is_valid(const JohnsonParams& p);

double johnson_pdf(double x, const JohnsonParams& p);
double johnson_cdf(double x, const JohnsonParams& p);
double johnson_quantile(double u, const JohnsonParams& p);

struct JohnsonFitOptions {
    // Unset: chosen by the quantile-ratio discriminant.
    std::optional<JohnsonVariant> variant;
    // Known location; only used for SL, where eta and gamma are then matched
    // on log(x - epsilon).
    std::optional<double> location;
};

// Classical quantile-ratio discriminant mn/p^2 at normal abscissae +-z, +-3z.
double johnson_discriminant(std::span<const double> column);

// Four-quantile matching at standard-normal abscissae +-z, +-3z, z = 0.524.
JohnsonParams johnson_fit(std::span<const double> column, JohnsonFitOptions options = {});

// ---------------------------------------------------------------------------
// Marginal model and probability-integral transforms
// ---------------------------------------------------------------------------

// Continuous piecewise-linear CDF through the average-rank plotting positions
// R/(n+1) of the distinct training values, extended linearly to 0 and 1.
class EmpiricalMargin {
public:
    explicit EmpiricalMargin(std::span<const double> column);

    const std::vector<double>& sorted_sample() const { return sorted_; }
    double cdf(double x) const;
    double pdf(double x) const;
    double quantile(double u) const;

private:
    std::vector<double> sorted_;
    std::vector<double> knots_x_;
    std::vector<double> knots_u_;
};

class MarginalModel {
public:
    enum class Kind { Gld, Johnson, Empirical };

    static MarginalModel gld(const GldParams& p);
    static MarginalModel johnson(const JohnsonParams& p);
    static MarginalModel empirical(std::span<const double> column);

    Kind kind() const;
    const GldParams& gld_params() const;
    const JohnsonParams& johnson_params() const;
    const EmpiricalMargin& empirical_margin() const;

    // Clamped to (1e-12, 1 - 1e-12).
    double cdf(double x) const;
    double pdf(double x) const;
    double log_pdf(double x) const;
    double quantile(double u) const;

private:
    using Payload = std::variant<GldParams, JohnsonParams, EmpiricalMargin>;
    explicit MarginalModel(Payload payload) : payload_(std::move(payload)) {}
    Payload payload_;
};

// Average ranks divided by n + 1, column by column.
Eigen::MatrixXd pseudo_observations(const Eigen::MatrixXd& columns);

Eigen::MatrixXd pit(const Eigen::MatrixXd& columns, std::span<const MarginalModel> models);
Eigen::MatrixXd inverse_pit(const Eigen::MatrixXd& uniforms, std::span<const MarginalModel> models);

}  // namespace vinecop
