#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "vinecop/bicop.hpp"
#include "vinecop/dependence.hpp"
#include "vinecop/errors.hpp"
#include "vinecop/marginals.hpp"
#include "vinecop/numeric.hpp"
#include "vinecop/vine.hpp"

using namespace vinecop;
namespace ts = testing_support;

namespace {

PairCopulaSpec indep() { return {Family::Independence, Rotation::Deg0, {}}; }

VineModel independence_model(std::size_t d) {
    std::vector<std::size_t> order(d);
    for (std::size_t k = 0; k < d; ++k) order[k] = k;
    auto s = dvine_structure(order);
    std::vector<std::vector<PairCopulaSpec>> cops;
    for (const auto& tree : s.trees) cops.emplace_back(tree.size(), indep());
    return make_vine_model(std::move(s), cops);
}

Eigen::MatrixXd uniform_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd u(n, d);
    for (std::size_t k = 0; k < d; ++k) {
        const auto col = ts::uniform_draws(n, rng);
        for (std::size_t r = 0; r < n; ++r) u(r, k) = col[r];
    }
    return u;
}

std::vector<EdgeLabel> labels_of(const VineTree& tree) {
    std::vector<EdgeLabel> out;
    for (const auto& e : tree) out.push_back(e.label);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> col(const Eigen::MatrixXd& m, Eigen::Index k) {
    return {m.col(k).data(), m.col(k).data() + m.rows()};
}

// Random one-parameter copula with moderate dependence.
PairCopulaSpec random_spec(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, 4);
    std::uniform_real_distribution<double> tau(0.1, 0.6);
    std::uniform_int_distribution<int> rot(0, 3);
    const Family fam = std::array{Family::Gaussian, Family::Clayton, Family::Gumbel, Family::Frank,
                                  Family::Joe}[pick(rng)];
    const Rotation r = is_rotatable(fam) ? rotation_from_degrees(90 * rot(rng)) : Rotation::Deg0;
    const bool negative = r == Rotation::Deg90 || r == Rotation::Deg270;
    return tau_to_param(fam, r, negative ? -tau(rng) : tau(rng));
}

// Inputs labeled 1..4 -> 0..3.
struct DVine4 {
    PairCopulaSpec c12, c23, c34, c13_2, c24_3, c14_23;
};

VineModel dvine4_model(const DVine4& c) {
    auto s = dvine_structure({0, 1, 2, 3});
    return make_vine_model(std::move(s), {{c.c12, c.c23, c.c34}, {c.c13_2, c.c24_3}, {c.c14_23}});
}

// Six-factor D-vine product assembled term by term.
double dvine4_density(const DVine4& c, const std::array<double, 4>& u) {
    using C = Conditioning;
    const double u1_2 = hfunc(c.c12, C::Second, u[1], u[0]);
    const double u3_2 = hfunc(c.c23, C::First, u[1], u[2]);
    const double u2_3 = hfunc(c.c23, C::Second, u[2], u[1]);
    const double u4_3 = hfunc(c.c34, C::First, u[2], u[3]);
    const double u1_23 = hfunc(c.c13_2, C::Second, u3_2, u1_2);
    const double u4_23 = hfunc(c.c24_3, C::First, u2_3, u4_3);
    return bicop_pdf(c.c12, u[0], u[1]) * bicop_pdf(c.c23, u[1], u[2]) *
           bicop_pdf(c.c34, u[2], u[3]) * bicop_pdf(c.c13_2, u1_2, u3_2) *
           bicop_pdf(c.c24_3, u2_3, u4_3) * bicop_pdf(c.c14_23, u1_23, u4_23);
}

// h by integrating the density in the free argument.
double h_quad(const PairCopulaSpec& s, Conditioning which, double cond, double free) {
    if (which == Conditioning::First) {
        return ts::integrate([&](double t) { return bicop_pdf(s, cond, t); }, 0.0, free, 1e-12, 20);
    }
    return ts::integrate([&](double t) { return bicop_pdf(s, t, cond); }, 0.0, free, 1e-12, 20);
}

double bvn_log_density(double x, double y, double rho) {
    const double q = (x * x - 2.0 * rho * x * y + y * y) / (1.0 - rho * rho);
    return -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(1.0 - rho * rho) - 0.5 * q;
}

MarginalModel standard_normal_su() {
    return MarginalModel::johnson({JohnsonVariant::SU, 0.0, 1.0, 0.0, 1.0});
}

VineModel gaussian_pair_model(double rho) {
    // SU(0, 1, 0, 1) margins: z = asinh(x).
    auto s = dvine_structure({0, 1});
    return make_vine_model(std::move(s), {{{Family::Gaussian, Rotation::Deg0, {rho}}}},
                           {standard_normal_su(), standard_normal_su()});
}

}  // namespace

TEST_CASE("max spanning tree on tabulated tau weights picks the star on variable 2") {
    const double w[4][4] = {{1.0, 0.25, 0.03, 0.25},
                            {0.25, 1.0, 0.49, 0.61},
                            {0.03, 0.49, 1.0, 0.33},
                            {0.25, 0.61, 0.33, 1.0}};
    std::vector<WeightedEdge> cands;
    for (const auto& e : first_tree_edges(4)) cands.push_back({e, w[e.a][e.b]});
    auto tree = max_spanning_tree(4, cands);
    std::sort(tree.begin(), tree.end(), [](auto& x, auto& y) { return x.label < y.label; });
    REQUIRE(tree.size() == 3);
    CHECK(tree[0].label == EdgeLabel{0, 1, {}});
    CHECK(tree[1].label == EdgeLabel{1, 2, {}});
    CHECK(tree[2].label == EdgeLabel{1, 3, {}});
    double total = 0.0;
    for (const auto& e : tree) total += w[e.a][e.b];
    CHECK(total == doctest::Approx(1.35).epsilon(1e-12));
}

TEST_CASE("max spanning tree edge cases") {
    const auto two = first_tree_edges(2);
    auto t = max_spanning_tree(2, {{two[0], 0.1}});
    REQUIRE(t.size() == 1);
    CHECK(t[0].label == EdgeLabel{0, 1, {}});

    std::vector<WeightedEdge> tri;
    for (const auto& e : first_tree_edges(3)) tri.push_back({e, 0.5});
    auto tt = max_spanning_tree(3, tri);
    std::sort(tt.begin(), tt.end(), [](auto& x, auto& y) { return x.label < y.label; });
    CHECK(tt[0].label == EdgeLabel{0, 1, {}});
    CHECK(tt[1].label == EdgeLabel{0, 2, {}});

    const auto four = first_tree_edges(4);
    std::vector<WeightedEdge> split{{four[0], 0.3}, {four[5], 0.2}};  // (1,2), (3,4)
    CHECK_THROWS_AS(max_spanning_tree(4, split), StructureError);
    CHECK(max_spanning_tree(1, {}).empty());
}

TEST_CASE("allowed edges follow proximity and labeling") {
    const VineTree path{{{0, 1, {}}, 0, 1}, {{1, 2, {}}, 1, 2}};
    auto c = allowed_edges(path);
    REQUIRE(c.size() == 1);
    CHECK(c[0].label == EdgeLabel{0, 2, {1}});

    const VineTree star{{{0, 1, {}}, 0, 1}, {{1, 2, {}}, 1, 2}, {{1, 3, {}}, 1, 3}};
    c = allowed_edges(star);
    REQUIRE(c.size() == 3);
    CHECK(c[0].label == EdgeLabel{0, 2, {1}});
    CHECK(c[1].label == EdgeLabel{0, 3, {1}});
    CHECK(c[2].label == EdgeLabel{2, 3, {1}});
    CHECK(format_label(c[2].label) == "3,4|2");

    const VineTree apart{{{0, 1, {}}, 0, 1}, {{2, 3, {}}, 2, 3}};
    CHECK(allowed_edges(apart).empty());
}

TEST_CASE("structure validation and builders") {
    const auto d = dvine_structure({0, 1, 2, 3});
    CHECK_NOTHROW(validate_structure(d));
    CHECK(d.trees[2][0].label == EdgeLabel{0, 3, {1, 2}});
    CHECK(format_label(d.trees[2][0].label) == "1,4|2,3");

    const auto c = cvine_structure({1, 0, 2, 3});
    CHECK(c.trees[0][0].label == EdgeLabel{0, 1, {}});
    CHECK(c.trees[1][0].label == EdgeLabel{0, 2, {1}});
    CHECK(c.trees[2][0].label == EdgeLabel{2, 3, {0, 1}});

    auto bad = d;
    bad.trees[1][0].label.cond = {2};
    CHECK_THROWS_AS(validate_structure(bad), StructureError);
    auto missing = d;
    missing.trees.pop_back();
    CHECK_THROWS_AS(validate_structure(missing), StructureError);
    CHECK_NOTHROW(validate_structure(missing, false));
    auto cyc = d;
    cyc.trees[0][2] = {{0, 2, {}}, 0, 2};  // 1-2, 2-3, 1-3
    CHECK_THROWS_AS(validate_structure(cyc), StructureError);
    CHECK_THROWS_AS(dvine_structure({0, 0, 1}), StructureError);
}

TEST_CASE("structure classification") {
    CHECK(classify_structure(cvine_structure({1, 0, 2, 3})) == StructureClass::CVine);
    CHECK(classify_structure(dvine_structure({0, 1, 2, 3})) == StructureClass::DVine);
    CHECK(classify_structure(dvine_structure({2, 0, 1})) == StructureClass::CVine);
    CHECK(classify_structure(cvine_structure({2, 0, 1})) == StructureClass::CVine);

    // Tree 1: 1-2, 2-3, 3-4, 3-5 is neither a path nor a star.
    VineStructure g;
    g.dim = 5;
    g.trees.push_back({{{0, 1, {}}, 0, 1}, {{1, 2, {}}, 1, 2}, {{2, 3, {}}, 2, 3}, {{2, 4, {}}, 2, 4}});
    auto t2 = allowed_edges(g.trees[0]);
    // keep (1,3|2), (2,4|3), (4,5|3)
    g.trees.push_back({t2[0], t2[1], t2[3]});
    auto t3 = allowed_edges(g.trees[1]);
    REQUIRE(t3.size() == 2);
    g.trees.push_back(t3);
    g.trees.push_back(allowed_edges(g.trees[2]));
    CHECK_NOTHROW(validate_structure(g));
    CHECK(classify_structure(g) == StructureClass::General);
    CHECK(g.trees[3][0].label == EdgeLabel{0, 4, {1, 2, 3}});
}

TEST_CASE("vine density equals the explicit six-factor product") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.001, 0.999);
    for (int rep = 0; rep < 5; ++rep) {
        const DVine4 c{random_spec(rng), random_spec(rng), random_spec(rng),
                       random_spec(rng), random_spec(rng), random_spec(rng)};
        const auto model = dvine4_model(c);
        for (int k = 0; k < 200; ++k) {
            const std::array<double, 4> u{unif(rng), unif(rng), unif(rng), unif(rng)};
            const double direct = dvine4_density(c, u);
            const double vine = std::exp(vine_log_density(model, std::span<const double>(u)));
            CHECK(std::fabs(vine - direct) <= 1e-12 * direct);
        }
    }
}

TEST_CASE("conditional uniforms") {
    const auto model = independence_model(4);
    const auto u = uniform_matrix(50, 4, 3);
    auto [a, b] = conditional_uniforms(model, u, 1, 1);
    CHECK(a == col(u, 1));
    CHECK(b == col(u, 2));
    auto [x, y] = conditional_uniforms(model, u, 3, 0);
    CHECK(x == col(u, 0));
    CHECK(y == col(u, 3));

    auto partial = model;
    partial.pair_copulas.pop_back();
    partial.pair_copulas.pop_back();
    CHECK_THROWS_AS(conditional_uniforms(partial, u, 3, 0), MissingAncestor);
    CHECK_NOTHROW(conditional_uniforms(partial, u, 2, 0));
}

TEST_CASE("conditional uniforms match a quadrature chain") {
    using C = Conditioning;
    const DVine4 c{{Family::Gaussian, Rotation::Deg0, {0.5}},
                   {Family::Clayton, Rotation::Deg0, {2.0}},
                   {Family::Gumbel, Rotation::Deg0, {1.5}},
                   {Family::Frank, Rotation::Deg0, {3.0}},
                   {Family::Joe, Rotation::Deg90, {1.6}},
                   {Family::Gaussian, Rotation::Deg0, {0.2}}};
    const auto model = dvine4_model(c);
    Eigen::MatrixXd u(3, 4);
    u << 0.2, 0.7, 0.4, 0.9, 0.55, 0.35, 0.8, 0.15, 0.9, 0.6, 0.3, 0.5;
    auto [v1, v4] = conditional_uniforms(model, u, 3, 0);
    for (int r = 0; r < 3; ++r) {
        const double u1_2 = h_quad(c.c12, C::Second, u(r, 1), u(r, 0));
        const double u3_2 = h_quad(c.c23, C::First, u(r, 1), u(r, 2));
        const double u2_3 = h_quad(c.c23, C::Second, u(r, 2), u(r, 1));
        const double u4_3 = h_quad(c.c34, C::First, u(r, 2), u(r, 3));
        CHECK(std::fabs(v1[r] - h_quad(c.c13_2, C::Second, u3_2, u1_2)) <= 1e-8);
        CHECK(std::fabs(v4[r] - h_quad(c.c24_3, C::First, u2_3, u4_3)) <= 1e-8);
    }
}

TEST_CASE("vine log density special cases") {
    const auto model = independence_model(4);
    const auto u = uniform_matrix(20, 4, 5);
    CHECK(vine_log_density(model, u).cwiseAbs().maxCoeff() == 0.0);

    const PairCopulaSpec cl{Family::Clayton, Rotation::Deg180, {2.5}};
    const auto pair = make_vine_model(dvine_structure({0, 1}), {{cl}});
    for (int r = 0; r < 20; ++r) {
        const std::array<double, 2> p{u(r, 0), u(r, 1)};
        CHECK(vine_log_density(pair, std::span<const double>(p)) == bicop_log_pdf(cl, p[0], p[1]));
    }

    // 2D normalization by quadrature.
    const auto gm = make_vine_model(dvine_structure({0, 1}), {{{Family::Gumbel, Rotation::Deg0, {2.0}}}});
    const double mass = ts::integrate2d(
        [&](double a, double b) {
            const std::array<double, 2> p{a, b};
            return std::exp(vine_log_density(gm, std::span<const double>(p)));
        },
        0.0, 1.0, 0.0, 1.0, 1e-8, 12);
    CHECK(std::fabs(mass - 1.0) <= 1e-4);
}

TEST_CASE("joint log density") {
    const double rho = 0.6;
    const auto model = gaussian_pair_model(rho);
    for (double a : {-2.0, -0.7, 0.0, 0.9, 2.5}) {
        for (double b : {-1.5, -0.2, 0.4, 1.1, 3.0}) {
            // x = sinh(z) has density phi(asinh x) / sqrt(1 + x^2)
            const double xa = std::sinh(a), xb = std::sinh(b);
            const double expected = bvn_log_density(a, b, rho) - 0.5 * std::log1p(xa * xa) -
                                    0.5 * std::log1p(xb * xb);
            const std::array<double, 2> x{xa, xb};
            CHECK(std::fabs(joint_log_density(model, std::span<const double>(x)) - expected) <= 1e-6);
        }
    }

    auto im = independence_model(3);
    im.margins = {standard_normal_su(), standard_normal_su(), standard_normal_su()};
    const std::array<double, 3> x{0.3, -1.2, 2.0};
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) sum += im.margins[k].log_pdf(x[k]);
    CHECK(joint_log_density(im, std::span<const double>(x)) == sum);

    auto bounded = independence_model(2);
    bounded.margins = {MarginalModel::johnson({JohnsonVariant::SB, 0.0, 1.0, 0.0, 1.0}),
                       standard_normal_su()};
    const std::array<double, 2> outside{1.5, 0.0};
    CHECK(joint_log_density(bounded, std::span<const double>(outside)) ==
          -std::numeric_limits<double>::infinity());

    const auto pseudo = independence_model(2);
    const std::array<double, 2> p{0.1, 0.2};
    CHECK_THROWS_AS(joint_log_density(pseudo, std::span<const double>(p)), MarginsAbsent);
}

TEST_CASE("log-likelihood and information criteria") {
    const auto model = independence_model(3);
    const auto u = uniform_matrix(100, 3, 9);
    const auto s = score(model, u);
    CHECK(s.loglik == 0.0);
    CHECK(s.aic == 0.0);
    CHECK(s.n_params == 0);
    CHECK(aic(100.0, 1) == -198.0);
    CHECK(bic(100.0, 1, 100) == doctest::Approx(std::log(100.0) - 200.0).epsilon(1e-15));
    CHECK(bic(100.0, 1, 100) == doctest::Approx(-195.3948).epsilon(1e-6));

    const PairCopulaSpec g{Family::Gaussian, Rotation::Deg0, {0.4}};
    const auto pm = make_vine_model(dvine_structure({0, 1}), {{g}});
    const auto u2 = uniform_matrix(100, 2, 10);
    const auto s2 = score(pm, u2);
    const double ll = bicop_loglik(g, col(u2, 0), col(u2, 1));
    CHECK(s2.loglik == doctest::Approx(ll).epsilon(1e-13));
    CHECK(s2.aic == doctest::Approx(2.0 - 2.0 * ll).epsilon(1e-13));
    CHECK(s2.bic == doctest::Approx(std::log(100.0) - 2.0 * ll).epsilon(1e-13));
    CHECK_THROWS_AS(vine_loglik(pm, Eigen::MatrixXd(0, 2)), InvalidParameter);
}

TEST_CASE("simulation from simple models") {
    const auto im = independence_model(4);
    const auto x = simulate(im, 10000, 11);
    for (int a = 0; a < 4; ++a) {
        for (int b = a + 1; b < 4; ++b) CHECK(std::fabs(kendall_tau(col(x, a), col(x, b))) <= 0.02);
    }
    CHECK(simulate(im, 50, 3) == simulate(im, 50, 3));
    CHECK(simulate(im, 50, 3) != simulate(im, 50, 4));
    CHECK(simulate(im, 0, 1).rows() == 0);

    const PairCopulaSpec cl{Family::Clayton, Rotation::Deg0, {5.0}};
    const auto cm = make_vine_model(dvine_structure({0, 1}), {{cl}});
    const auto y = simulate(cm, 100000, 12);
    CHECK(std::fabs(kendall_tau(col(y, 0), col(y, 1)) - param_to_tau(cl)) <= 0.01);
    CHECK(param_to_tau(cl) == doctest::Approx(5.0 / 7.0).epsilon(1e-9));
}

TEST_CASE("three-dimensional C-vine sampling consistency") {
    const PairCopulaSpec a{Family::Gumbel, Rotation::Deg0, {2.0}};
    const PairCopulaSpec b{Family::Clayton, Rotation::Deg90, {1.5}};
    const PairCopulaSpec c{Family::Frank, Rotation::Deg0, {4.0}};
    const auto model = make_vine_model(cvine_structure({1, 0, 2}), {{a, b}, {c}});
    const auto x = simulate(model, 50000, 21);
    CHECK(std::fabs(kendall_tau(col(x, 0), col(x, 1)) - param_to_tau(a)) <= 0.02);
    CHECK(std::fabs(kendall_tau(col(x, 1), col(x, 2)) - param_to_tau(b)) <= 0.02);
    const auto refit = fit_vine(x, {});
    REQUIRE(refit.structure.trees[1][0].label == EdgeLabel{0, 2, {1}});
    CHECK(std::fabs(refit.pair_copulas[1][0].tau - param_to_tau(c)) <= 0.05);
}

TEST_CASE("simulation from a general regular vine") {
    VineStructure g;
    g.dim = 5;
    g.trees.push_back({{{0, 1, {}}, 0, 1}, {{1, 2, {}}, 1, 2}, {{2, 3, {}}, 2, 3}, {{2, 4, {}}, 2, 4}});
    auto t2 = allowed_edges(g.trees[0]);
    g.trees.push_back({t2[0], t2[1], t2[3]});
    g.trees.push_back(allowed_edges(g.trees[1]));
    g.trees.push_back(allowed_edges(g.trees[2]));
    std::mt19937_64 rng(5);
    std::vector<std::vector<PairCopulaSpec>> cops;
    for (const auto& tree : g.trees) {
        std::vector<PairCopulaSpec> level;
        for (std::size_t k = 0; k < tree.size(); ++k) level.push_back(random_spec(rng));
        cops.push_back(level);
    }
    const auto model = make_vine_model(g, cops);
    const auto order = sampling_order(model.structure);
    CHECK(order.size() == 5);
    CHECK(order.back() == 4);

    const auto x = simulate(model, 20000, 8);
    for (std::size_t l = 1; l <= 4; ++l) {
        for (std::size_t k = 0; k < g.trees[l - 1].size(); ++k) {
            auto [p, q] = conditional_uniforms(model, x, l, k);
            CAPTURE(l);
            CAPTURE(k);
            CHECK(std::fabs(kendall_tau(p, q) - param_to_tau(cops[l - 1][k])) <= 0.03);
        }
    }
}

TEST_CASE("simulate with margins returns data-space draws") {
    const auto model = gaussian_pair_model(0.6);
    const auto x = simulate(model, 20000, 2);
    double mean = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) mean += std::asinh(x(r, 0));
    mean /= static_cast<double>(x.rows());
    CHECK(std::fabs(mean) <= 0.05);
    CHECK(std::fabs(kendall_tau(col(x, 0), col(x, 1)) - 2.0 / std::numbers::pi * std::asin(0.6)) <= 0.02);
}

TEST_CASE("fit_vine basics") {
    const auto u = uniform_matrix(500, 2, 4);
    VineFitOptions opt;
    const auto m = fit_vine(u, opt);
    const auto direct = select_family(col(u, 0), col(u, 1), opt.candidates, opt.criterion);
    REQUIRE(m.pair_copulas.size() == 1);
    CHECK(m.pair_copulas[0][0].copula.spec == direct.spec);
    CHECK(m.pair_copulas[0][0].copula.loglik == direct.loglik);

    CHECK_THROWS_AS(fit_vine(uniform_matrix(29, 3, 1)), InvalidParameter);
    CHECK_THROWS_AS(fit_vine(uniform_matrix(50, 1, 1)), InvalidParameter);
    auto bad = uniform_matrix(50, 3, 1);
    bad(3, 1) = 1.0;
    CHECK_THROWS_AS(fit_vine(bad), InvalidParameter);
}

TEST_CASE("fit_vine on independent columns selects Independence") {
    int all_indep = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        VineFitOptions opt;
        opt.criterion = Criterion::Bic;
        const auto m = fit_vine(uniform_matrix(5000, 4, seed), opt);
        bool ok = true;
        for (const auto& tree : m.pair_copulas) {
            for (const auto& e : tree) ok = ok && e.copula.spec.family == Family::Independence;
        }
        all_indep += ok ? 1 : 0;
        CHECK_NOTHROW(validate_structure(m.structure));
    }
    CHECK(all_indep >= 4);
}

TEST_CASE("fit_vine recovers a C-vine") {
    const auto truth = make_vine_model(
        cvine_structure({1, 0, 2, 3}),
        {{{Family::Gaussian, Rotation::Deg0, {0.6}}, {Family::Clayton, Rotation::Deg0, {2.0}},
          {Family::Gumbel, Rotation::Deg0, {1.5}}},
         {{Family::Frank, Rotation::Deg0, {1.0}}, {Family::Gaussian, Rotation::Deg0, {0.1}}},
         {indep()}});
    const auto x = simulate(truth, 5000, 1);
    const auto m = fit_vine(x);
    CHECK(labels_of(m.structure.trees[0]) == labels_of(truth.structure.trees[0]));
    CHECK(classify_structure(m.structure) == StructureClass::CVine);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(std::fabs(m.pair_copulas[0][k].tau - truth.pair_copulas[0][k].tau) <= 0.03);
    }
    CHECK(m.n_obs == 5000);
    const auto ts_ = training_score(m);
    CHECK(ts_.loglik == doctest::Approx(vine_loglik(m, x)).epsilon(1e-8));
}

TEST_CASE("truncation and fallback") {
    const auto truth = make_vine_model(
        dvine_structure({0, 1, 2}),
        {{{Family::Gaussian, Rotation::Deg0, {0.7}}, {Family::Gaussian, Rotation::Deg0, {0.7}}},
         {{Family::Gaussian, Rotation::Deg0, {0.5}}}});
    const auto x = simulate(truth, 2000, 3);
    VineFitOptions opt;
    opt.trunc_level = 1;
    const auto m = fit_vine(x, opt);
    CHECK(m.pair_copulas[0][0].copula.spec.family != Family::Independence);
    CHECK(m.pair_copulas[1][0].copula.spec.family == Family::Independence);
    CHECK(std::fabs(m.pair_copulas[1][0].tau) > 0.2);

    VineFitOptions none;
    none.candidates.clear();
    const auto f = fit_vine(x, none);
    for (const auto& tree : f.pair_copulas) {
        for (const auto& e : tree) {
            CHECK(e.copula.spec.family == Family::Independence);
            CHECK_FALSE(e.warning.empty());
        }
    }
}

TEST_CASE("density slices") {
    auto im = independence_model(3);
    im.margins = {standard_normal_su(), standard_normal_su(),
                  MarginalModel::johnson({JohnsonVariant::SB, 0.5, 1.2, -1.0, 3.0})};
    SliceSpec spec;
    spec.var_i = 0;
    spec.var_j = 2;
    spec.x_grid = margin_grid(im.margins[0], 7);
    spec.y_grid = margin_grid(im.margins[2], 5);
    const auto g = density_slice(im, spec);
    REQUIRE(g.rows() == 7);
    REQUIRE(g.cols() == 5);
    const double c = im.margins[1].pdf(im.margins[1].quantile(0.5));
    for (Eigen::Index a = 0; a < 7; ++a) {
        for (Eigen::Index b = 0; b < 5; ++b) {
            const double expected = im.margins[0].pdf(spec.x_grid[a]) * im.margins[2].pdf(spec.y_grid[b]) * c;
            CHECK(std::fabs(g(a, b) - expected) <= 1e-10 * expected);
            CHECK(std::fabs(g(a, b) * g(0, 0) - g(a, 0) * g(0, b)) <= 1e-10 * g(a, b) * g(0, 0));
        }
    }
    spec.var_j = 0;
    CHECK_THROWS_AS(density_slice(im, spec), UnknownVariable);
    spec.var_j = 3;
    CHECK_THROWS_AS(density_slice(im, spec), UnknownVariable);
    spec.var_j = 2;
    CHECK_THROWS_AS(density_slice(independence_model(3), spec), MarginsAbsent);

    // Box mass of the Gaussian-copula slice against the bivariate normal law.
    const double rho = 0.6;
    const auto gm = gaussian_pair_model(rho);
    const int m = 400;
    const double lo = std::sinh(-1.0), hi = std::sinh(1.5);
    SliceSpec s2;
    for (int k = 0; k <= m; ++k) {
        const double x = lo + (hi - lo) * k / m;
        s2.x_grid.push_back(x);
        s2.y_grid.push_back(x);
    }
    const auto dens = density_slice(gm, s2);
    for (int a = 0; a <= m; ++a) {
        const std::array<double, 2> p{s2.x_grid[a], s2.y_grid[m - a]};
        CHECK(dens(a, m - a) == doctest::Approx(std::exp(joint_log_density(gm, std::span<const double>(p)))).epsilon(1e-14));
    }
    auto simpson = [&](int k) { return k == 0 || k == m ? 1.0 : (k % 2 ? 4.0 : 2.0); };
    double box = 0.0;
    for (int a = 0; a <= m; ++a) {
        for (int b = 0; b <= m; ++b) box += simpson(a) * simpson(b) * dens(a, b);
    }
    const double hstep = (hi - lo) / m;
    box *= hstep * hstep / 9.0;
    const double oracle = ts::integrate2d(
        [&](double za, double zb) { return std::exp(bvn_log_density(za, zb, rho)); }, -1.0, 1.5,
        -1.0, 1.5, 1e-10, 15);
    CHECK(std::fabs(box - oracle) <= 1e-4);
}

TEST_CASE("edge report") {
    const auto im = independence_model(4);
    const auto rows = report(im);
    CHECK(rows.size() == 6);
    for (const auto& r : rows) {
        CHECK(r.family == "Independence");
        CHECK(r.ltd == 0.0);
        CHECK(r.utd == 0.0);
    }
    CHECK(rows[0].edge == "1,2");
    CHECK(rows[3].edge == "1,3|2");
    CHECK(rows[5].edge == "1,4|2,3");

    const PairCopulaSpec cl{Family::Clayton, Rotation::Deg0, {5.0}};
    const auto x = simulate(make_vine_model(dvine_structure({0, 1}), {{cl}}), 3000, 17);
    const auto fit = fit_vine(x);
    const auto r = report(fit);
    REQUIRE(r.size() == 1);
    CHECK(r[0].family == "Clayton");
    CHECK(r[0].rotation == 0);
    CHECK(r[0].ltd == doctest::Approx(0.87).epsilon(0.02));
    CHECK(r[0].utd == 0.0);
    CHECK(r[0].tau == kendall_tau(col(x, 0), col(x, 1)));

    std::ostringstream csv;
    write_report_csv(csv, r);
    const std::string text = csv.str();
    CHECK(text.rfind("tree,edge,family,rotation,par1,par2,tau,ltd,utd\n", 0) == 0);
    CHECK(text.find(",NA,") != std::string::npos);

    std::ostringstream summary;
    write_tree_summary(summary, im);
    CHECK(summary.str().find("Tree 3") != std::string::npos);
    CHECK(summary.str().find("D-vine") != std::string::npos);
}

TEST_CASE("pseudo-observation fits are invariant under monotone transforms") {
    const auto truth = make_vine_model(
        cvine_structure({2, 0, 1}),
        {{{Family::Joe, Rotation::Deg0, {1.8}}, {Family::Gaussian, Rotation::Deg0, {-0.4}}},
         {{Family::Clayton, Rotation::Deg0, {0.8}}}});
    const auto x = simulate(truth, 800, 6);
    Eigen::MatrixXd y = x;
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        y(r, 0) = std::log(x(r, 0) / (1.0 - x(r, 0)));
        y(r, 1) = std::exp(5.0 * x(r, 1));
        y(r, 2) = std::pow(x(r, 2), 3.0) - 7.0;
    }
    const auto a = fit_vine(pseudo_observations(x));
    const auto b = fit_vine(pseudo_observations(y));
    for (std::size_t l = 0; l < a.structure.trees.size(); ++l) {
        CHECK(a.structure.trees[l] == b.structure.trees[l]);
        for (std::size_t k = 0; k < a.pair_copulas[l].size(); ++k) {
            CHECK(a.pair_copulas[l][k].copula.spec == b.pair_copulas[l][k].copula.spec);
        }
    }
}
