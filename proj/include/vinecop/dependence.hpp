#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace vinecop {

// Sample Kendall's tau: 2/(n(n-1)) * sum_{i<j} sign[(x_i - x_j)(y_i - y_j)].
// Tied pairs contribute zero and the denominator is not tie-corrected.
// O(n log n) via merge-sort inversion counting.
double kendall_tau(std::span<const double> x, std::span<const double> y);

// Reference O(n^2) evaluation of the same estimator.
double kendall_tau_brute_force(std::span<const double> x, std::span<const double> y);

// Kendall's tau between conditional variates u_{i|D} and u_{j|D}.
double partial_tau(std::span<const double> u_i_given_d, std::span<const double> u_j_given_d);

struct TauMatrix {
    std::vector<std::string> labels;
    Eigen::MatrixXd values;
};

TauMatrix tau_matrix(const Eigen::MatrixXd& columns, std::vector<std::string> labels = {});

// Labeled square CSV table, values at 17 significant digits.
void write_tau_csv(std::ostream& out, const TauMatrix& tau);

}  // namespace vinecop
