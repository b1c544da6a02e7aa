#include "vinecop/dependence.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "vinecop/errors.hpp"

namespace vinecop {

namespace {

void check_lengths(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw LengthMismatch(fmt::format("kendall_tau: lengths {} and {} differ", x.size(),
                                         y.size()));
    }
    if (x.size() < 2) throw std::invalid_argument("kendall_tau: need at least two observations");
}

std::int64_t tied_pairs(std::span<const double> sorted) {
    std::int64_t total = 0;
    std::size_t run = 1;
    for (std::size_t k = 1; k <= sorted.size(); ++k) {
        if (k < sorted.size() && sorted[k] == sorted[k - 1]) {
            ++run;
        } else {
            total += static_cast<std::int64_t>(run) * static_cast<std::int64_t>(run - 1) / 2;
            run = 1;
        }
    }
    return total;
}

// Counts pairs i < j with v[i] > v[j] while sorting v ascending.
std::int64_t count_inversions(std::vector<double>& v, std::vector<double>& scratch,
                              std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::int64_t swaps = count_inversions(v, scratch, lo, mid) + count_inversions(v, scratch, mid, hi);
    std::size_t a = lo;
    std::size_t b = mid;
    std::size_t out = lo;
    while (a < mid && b < hi) {
        if (v[b] < v[a]) {
            swaps += static_cast<std::int64_t>(mid - a);
            scratch[out++] = v[b++];
        } else {
            scratch[out++] = v[a++];
        }
    }
    while (a < mid) scratch[out++] = v[a++];
    while (b < hi) scratch[out++] = v[b++];
    std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
              scratch.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

double finish(std::int64_t concordant_minus_discordant, std::size_t n) {
    const std::int64_t pairs = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
    return static_cast<double>(concordant_minus_discordant) / static_cast<double>(pairs);
}

}  // namespace

double kendall_tau_brute_force(std::span<const double> x, std::span<const double> y) {
    check_lengths(x, y);
    const std::size_t n = x.size();
    std::int64_t s = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            const int sx = (dx > 0) - (dx < 0);
            const int sy = (dy > 0) - (dy < 0);
            s += sx * sy;
        }
    }
    return finish(s, n);
}

double kendall_tau(std::span<const double> x, std::span<const double> y) {
    check_lengths(x, y);
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });

    std::vector<double> xs(n);
    std::vector<double> ys(n);
    for (std::size_t k = 0; k < n; ++k) {
        xs[k] = x[order[k]];
        ys[k] = y[order[k]];
    }
    const std::int64_t x_ties = tied_pairs(xs);
    std::int64_t joint_ties = 0;
    std::size_t run = 1;
    for (std::size_t k = 1; k <= n; ++k) {
        if (k < n && xs[k] == xs[k - 1] && ys[k] == ys[k - 1]) {
            ++run;
        } else {
            joint_ties += static_cast<std::int64_t>(run) * static_cast<std::int64_t>(run - 1) / 2;
            run = 1;
        }
    }

    std::vector<double> scratch(n);
    const std::int64_t discordant = count_inversions(ys, scratch, 0, n);
    const std::int64_t y_ties = tied_pairs(ys);  // ys is sorted now
    const std::int64_t pairs = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
    return finish(pairs - x_ties - y_ties + joint_ties - 2 * discordant, n);
}

double partial_tau(std::span<const double> u_i_given_d, std::span<const double> u_j_given_d) {
    return kendall_tau(u_i_given_d, u_j_given_d);
}

TauMatrix tau_matrix(const Eigen::MatrixXd& columns, std::vector<std::string> labels) {
    const auto d = static_cast<std::size_t>(columns.cols());
    if (d < 2) throw std::invalid_argument("tau_matrix: need at least two columns");
    if (labels.empty()) {
        for (std::size_t k = 0; k < d; ++k) labels.push_back(fmt::format("V{}", k + 1));
    }
    if (labels.size() != d) throw LengthMismatch("tau_matrix: label count differs from columns");
    TauMatrix out{std::move(labels), Eigen::MatrixXd::Identity(columns.cols(), columns.cols())};
    const auto n = static_cast<std::size_t>(columns.rows());
    for (Eigen::Index i = 0; i < columns.cols(); ++i) {
        for (Eigen::Index j = i + 1; j < columns.cols(); ++j) {
            const double t = kendall_tau({columns.col(i).data(), n}, {columns.col(j).data(), n});
            out.values(i, j) = t;
            out.values(j, i) = t;
        }
    }
    return out;
}

void write_tau_csv(std::ostream& out, const TauMatrix& tau) {
    for (const auto& label : tau.labels) out << ',' << label;
    out << '\n';
    for (std::size_t i = 0; i < tau.labels.size(); ++i) {
        out << tau.labels[i];
        for (std::size_t j = 0; j < tau.labels.size(); ++j) {
            out << ',' << fmt::format("{:.17g}", tau.values(static_cast<Eigen::Index>(i),
                                                             static_cast<Eigen::Index>(j)));
        }
        out << '\n';
    }
}

}  // namespace vinecop
