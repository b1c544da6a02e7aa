#include "vinecop/vine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include <fmt/format.h>

#include "vinecop/dependence.hpp"
#include "vinecop/errors.hpp"
#include "vinecop/numeric.hpp"

namespace vinecop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::size_t> full_set(const EdgeLabel& l) {
    std::vector<std::size_t> s = l.cond;
    s.push_back(l.i);
    s.push_back(l.j);
    std::sort(s.begin(), s.end());
    return s;
}

// Label of the edge joining two edges of the previous tree.
EdgeLabel join_label(const EdgeLabel& a, const EdgeLabel& b) {
    const auto sa = full_set(a);
    const auto sb = full_set(b);
    std::vector<std::size_t> common;
    std::vector<std::size_t> diff;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
    std::set_symmetric_difference(sa.begin(), sa.end(), sb.begin(), sb.end(),
                                  std::back_inserter(diff));
    if (diff.size() != 2) throw StructureError("joined edges do not differ in exactly two indices");
    return {diff[0], diff[1], std::move(common)};
}

std::size_t shared_nodes(const VineEdge& a, const VineEdge& b) {
    std::size_t k = 0;
    if (a.a == b.a || a.a == b.b) ++k;
    if (a.b == b.a || a.b == b.b) ++k;
    return k;
}

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    bool unite(std::size_t x, std::size_t y) {
        x = find(x);
        y = find(y);
        if (x == y) return false;
        parent[x] = y;
        return true;
    }
};

// Copula inputs and h-function outputs of one edge over all rows.
struct Variates {
    std::vector<double> u1, u2;  // u_{i|D}, u_{j|D}
    std::vector<double> h1, h2;  // u_{i|D u j}, u_{j|D u i}
};

std::vector<double> column_of(const Eigen::MatrixXd& u, std::size_t k) {
    std::vector<double> out(static_cast<std::size_t>(u.rows()));
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = clamp_uniform(u(r, k));
    return out;
}

const std::vector<double>& output_for(const VineEdge& node, const Variates& v, std::size_t var) {
    if (var == node.label.i) return v.h1;
    if (var == node.label.j) return v.h2;
    throw StructureError("variable is not in the conditioned set of the joined edge");
}

void edge_inputs(const Eigen::MatrixXd& u, const VineEdge& e, const VineTree* prev_tree,
                 const std::vector<Variates>* prev, Variates& out) {
    if (prev_tree == nullptr) {
        out.u1 = column_of(u, e.label.i);
        out.u2 = column_of(u, e.label.j);
        return;
    }
    const VineEdge& na = (*prev_tree)[e.a];
    const VineEdge& nb = (*prev_tree)[e.b];
    const auto sa = full_set(na.label);
    const bool i_in_a = std::binary_search(sa.begin(), sa.end(), e.label.i);
    const VineEdge& ni = i_in_a ? na : nb;
    const VineEdge& nj = i_in_a ? nb : na;
    const Variates& vi = (*prev)[i_in_a ? e.a : e.b];
    const Variates& vj = (*prev)[i_in_a ? e.b : e.a];
    out.u1 = output_for(ni, vi, e.label.i);
    out.u2 = output_for(nj, vj, e.label.j);
}

void edge_outputs(const PairCopulaSpec& spec, Variates& v) {
    const std::size_t n = v.u1.size();
    v.h1.resize(n);
    v.h2.resize(n);
    if (spec.family == Family::Independence) {
        v.h1 = v.u1;
        v.h2 = v.u2;
        return;
    }
    for (std::size_t r = 0; r < n; ++r) {
        v.h1[r] = clamp_uniform(hfunc(spec, Conditioning::Second, v.u2[r], v.u1[r]));
        v.h2[r] = clamp_uniform(hfunc(spec, Conditioning::First, v.u1[r], v.u2[r]));
    }
}

void require_fitted_levels(const VineModel& model, std::size_t levels) {
    if (model.pair_copulas.size() < levels) {
        throw MissingAncestor(fmt::format("tree {} has no fitted pair-copulas", model.pair_copulas.size() + 1));
    }
    for (std::size_t l = 0; l < levels; ++l) {
        if (l >= model.structure.trees.size() ||
            model.pair_copulas[l].size() != model.structure.trees[l].size()) {
            throw MissingAncestor(fmt::format("tree {} is not completely fitted", l + 1));
        }
    }
}

void check_uniform_matrix(const VineModel& model, const Eigen::MatrixXd& u) {
    if (static_cast<std::size_t>(u.cols()) != model.dim()) {
        throw LengthMismatch(fmt::format("expected {} columns, got {}", model.dim(), u.cols()));
    }
}

// Propagates through trees 1..levels, filling inputs of every edge and the
// outputs of every edge but the ones on the last level.
std::vector<std::vector<Variates>> propagate(const VineModel& model, const Eigen::MatrixXd& u,
                                             std::size_t levels) {
    std::vector<std::vector<Variates>> all(levels);
    for (std::size_t l = 0; l < levels; ++l) {
        const VineTree& tree = model.structure.trees[l];
        const VineTree* prev_tree = l == 0 ? nullptr : &model.structure.trees[l - 1];
        const std::vector<Variates>* prev = l == 0 ? nullptr : &all[l - 1];
        all[l].resize(tree.size());
        for (std::size_t k = 0; k < tree.size(); ++k) {
            edge_inputs(u, tree[k], prev_tree, prev, all[l][k]);
            if (l + 1 < levels) edge_outputs(model.pair_copulas[l][k].copula.spec, all[l][k]);
        }
        if (l > 0) all[l - 1].clear();  // lower levels are no longer needed
    }
    return all;
}

// Portable draw in (0, 1) from 53 random bits.
double draw_open_unit(std::mt19937_64& rng) {
    for (;;) {
        const double v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        if (v > 0.0) return v;
    }
}

struct EdgeRef {
    std::size_t level;  // 0-based
    std::size_t index;
};

struct Peeling {
    std::vector<std::size_t> order;
    std::vector<std::vector<EdgeRef>> chains;  // chains[k][l]: tree-(l+1) edge of order[k]
};

Peeling peel(const VineStructure& s) {
    validate_structure(s);
    const std::size_t d = s.dim;
    std::vector<std::vector<bool>> removed(s.trees.size());
    for (std::size_t l = 0; l < s.trees.size(); ++l) removed[l].assign(s.trees[l].size(), false);
    std::vector<bool> active(d, true);
    Peeling out;
    std::vector<std::size_t> reversed;
    std::vector<std::vector<EdgeRef>> reversed_chains;
    for (std::size_t m = d; m >= 2; --m) {
        const std::size_t top = m - 2;
        std::optional<std::size_t> top_edge;
        for (std::size_t k = 0; k < s.trees[top].size(); ++k) {
            if (removed[top][k]) continue;
            if (top_edge) throw StructureError("vine cannot be peeled: top tree has several edges");
            top_edge = k;
        }
        if (!top_edge) throw StructureError("vine cannot be peeled: top tree is empty");
        const std::size_t x = s.trees[top][*top_edge].label.j;
        std::vector<EdgeRef> chain;
        for (std::size_t l = 0; l <= top; ++l) {
            std::optional<std::size_t> hit;
            for (std::size_t k = 0; k < s.trees[l].size(); ++k) {
                if (removed[l][k]) continue;
                const EdgeLabel& lab = s.trees[l][k].label;
                if (lab.i == x || lab.j == x) {
                    if (hit) throw StructureError("vine cannot be peeled: variable repeats in a tree");
                    hit = k;
                }
            }
            if (!hit) throw StructureError("vine cannot be peeled: variable missing from a tree");
            removed[l][*hit] = true;
            chain.push_back({l, *hit});
        }
        for (std::size_t l = 0; l < s.trees.size(); ++l) {
            for (std::size_t k = 0; k < s.trees[l].size(); ++k) {
                if (removed[l][k]) continue;
                const auto& c = s.trees[l][k].label.cond;
                if (std::find(c.begin(), c.end(), x) != c.end()) {
                    throw StructureError("vine cannot be peeled: variable left in a conditioning set");
                }
            }
        }
        active[x] = false;
        reversed.push_back(x);
        reversed_chains.push_back(std::move(chain));
    }
    for (std::size_t v = 0; v < d; ++v) {
        if (active[v]) {
            out.order.push_back(v);
            out.chains.emplace_back();
        }
    }
    for (std::size_t k = reversed.size(); k-- > 0;) {
        out.order.push_back(reversed[k]);
        out.chains.push_back(std::move(reversed_chains[k]));
    }
    return out;
}

using VariateKey = std::pair<std::size_t, std::vector<std::size_t>>;

std::vector<std::size_t> with(std::vector<std::size_t> set, std::size_t v) {
    set.insert(std::upper_bound(set.begin(), set.end(), v), v);
    return set;
}

Eigen::VectorXd margin_log_density_rows(const VineModel& model, const Eigen::MatrixXd& x,
                                        Eigen::MatrixXd& u) {
    const Eigen::Index n = x.rows();
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
    u.resize(n, x.cols());
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index k = 0; k < x.cols(); ++k) {
            const MarginalModel& m = model.margins[static_cast<std::size_t>(k)];
            acc(r) += m.log_pdf(x(r, k));
            u(r, k) = m.cdf(x(r, k));
        }
    }
    return acc;
}

Eigen::VectorXd joint_log_density_rows(const VineModel& model, const Eigen::MatrixXd& x) {
    if (!model.has_margins()) throw MarginsAbsent("model has pseudo-observation margins only");
    check_uniform_matrix(model, x);
    Eigen::MatrixXd u;
    Eigen::VectorXd out = margin_log_density_rows(model, x, u);
    const Eigen::VectorXd cop = vine_log_density(model, u);
    for (Eigen::Index r = 0; r < out.size(); ++r) {
        out(r) = std::isfinite(out(r)) ? out(r) + cop(r) : -kInf;
    }
    return out;
}

std::string format_number(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

std::string format_label(const EdgeLabel& label) {
    std::string s = fmt::format("{},{}", label.i + 1, label.j + 1);
    for (std::size_t k = 0; k < label.cond.size(); ++k) {
        s += fmt::format("{}{}", k == 0 ? "|" : ",", label.cond[k] + 1);
    }
    return s;
}

void validate_structure(const VineStructure& s, bool complete) {
    const std::size_t d = s.dim;
    if (d < 2) throw StructureError("a vine needs at least two variables");
    if (!s.labels.empty() && s.labels.size() != d) {
        throw StructureError(fmt::format("{} labels for {} variables", s.labels.size(), d));
    }
    if (s.trees.size() > d - 1 || (complete && s.trees.size() != d - 1)) {
        throw StructureError(fmt::format("expected {} trees, got {}", d - 1, s.trees.size()));
    }
    for (std::size_t l = 0; l < s.trees.size(); ++l) {
        const VineTree& tree = s.trees[l];
        const std::size_t nodes = d - l;
        if (tree.size() != nodes - 1) {
            throw StructureError(fmt::format("tree {} has {} edges, expected {}", l + 1, tree.size(), nodes - 1));
        }
        UnionFind uf(nodes);
        for (const VineEdge& e : tree) {
            if (e.a >= nodes || e.b >= nodes || e.a == e.b) {
                throw StructureError(fmt::format("tree {} has an invalid edge", l + 1));
            }
            EdgeLabel expected;
            if (l == 0) {
                expected = {std::min(e.a, e.b), std::max(e.a, e.b), {}};
            } else {
                const VineEdge& na = s.trees[l - 1][e.a];
                const VineEdge& nb = s.trees[l - 1][e.b];
                if (shared_nodes(na, nb) != 1) {
                    throw StructureError(fmt::format("tree {} edge {} violates the proximity condition",
                                                     l + 1, format_label(e.label)));
                }
                expected = join_label(na.label, nb.label);
            }
            if (e.label != expected) {
                throw StructureError(fmt::format("tree {} edge {} should be labeled {}", l + 1,
                                                 format_label(e.label), format_label(expected)));
            }
            if (!uf.unite(e.a, e.b)) throw StructureError(fmt::format("tree {} has a cycle", l + 1));
        }
    }
}

std::vector<VineEdge> first_tree_edges(std::size_t dim) {
    std::vector<VineEdge> out;
    for (std::size_t a = 0; a < dim; ++a) {
        for (std::size_t b = a + 1; b < dim; ++b) out.push_back({{a, b, {}}, a, b});
    }
    return out;
}

std::vector<VineEdge> allowed_edges(const VineTree& previous) {
    std::vector<VineEdge> out;
    for (std::size_t p = 0; p < previous.size(); ++p) {
        for (std::size_t q = p + 1; q < previous.size(); ++q) {
            if (shared_nodes(previous[p], previous[q]) != 1) continue;
            out.push_back({join_label(previous[p].label, previous[q].label), p, q});
        }
    }
    return out;
}

VineTree max_spanning_tree(std::size_t n_nodes, const std::vector<WeightedEdge>& candidates) {
    if (n_nodes == 0) throw StructureError("spanning tree over an empty node set");
    for (const auto& c : candidates) {
        if (c.edge.a >= n_nodes || c.edge.b >= n_nodes || c.edge.a == c.edge.b) {
            throw StructureError("candidate edge refers to an unknown node");
        }
    }
    std::vector<bool> in_tree(n_nodes, false);
    in_tree[0] = true;
    VineTree out;
    for (std::size_t step = 1; step < n_nodes; ++step) {
        const WeightedEdge* best = nullptr;
        for (const auto& c : candidates) {
            if (in_tree[c.edge.a] == in_tree[c.edge.b]) continue;
            if (best == nullptr || c.weight > best->weight ||
                (c.weight == best->weight && c.edge.label < best->edge.label)) {
                best = &c;
            }
        }
        if (best == nullptr) throw StructureError("candidate graph is disconnected");
        in_tree[best->edge.a] = true;
        in_tree[best->edge.b] = true;
        out.push_back(best->edge);
    }
    return out;
}

namespace {

VineStructure chain_structure(const std::vector<std::size_t>& order, bool star) {
    const std::size_t d = order.size();
    std::vector<bool> seen(d, false);
    for (std::size_t v : order) {
        if (v >= d || seen[v]) throw StructureError("order must be a permutation of 0..d-1");
        seen[v] = true;
    }
    VineStructure s;
    s.dim = d;
    for (std::size_t k = 0; k < d; ++k) s.labels.push_back(fmt::format("V{}", k + 1));
    VineTree first;
    for (std::size_t k = 0; k + 1 < d; ++k) {
        const std::size_t a = star ? order[0] : order[k];
        const std::size_t b = order[k + 1];
        first.push_back({{std::min(a, b), std::max(a, b), {}}, a, b});
    }
    if (d >= 2) s.trees.push_back(std::move(first));
    for (std::size_t l = 1; l + 1 < d; ++l) {
        const VineTree& prev = s.trees.back();
        VineTree tree;
        for (std::size_t k = 0; k + 1 < prev.size(); ++k) {
            const std::size_t a = star ? 0 : k;
            tree.push_back({join_label(prev[a].label, prev[k + 1].label), a, k + 1});
        }
        s.trees.push_back(std::move(tree));
    }
    validate_structure(s);
    return s;
}

}  // namespace

VineStructure dvine_structure(const std::vector<std::size_t>& order) {
    return chain_structure(order, false);
}

VineStructure cvine_structure(const std::vector<std::size_t>& order) {
    return chain_structure(order, true);
}

VineModel make_vine_model(VineStructure structure,
                          const std::vector<std::vector<PairCopulaSpec>>& copulas,
                          std::vector<MarginalModel> margins) {
    validate_structure(structure);
    if (copulas.size() != structure.trees.size()) {
        throw StructureError(fmt::format("{} copula levels for {} trees", copulas.size(), structure.trees.size()));
    }
    if (!margins.empty() && margins.size() != structure.dim) {
        throw LengthMismatch(fmt::format("{} margins for {} variables", margins.size(), structure.dim));
    }
    VineModel model;
    for (std::size_t l = 0; l < copulas.size(); ++l) {
        if (copulas[l].size() != structure.trees[l].size()) {
            throw StructureError(fmt::format("tree {} needs {} copulas", l + 1, structure.trees[l].size()));
        }
        std::vector<EdgeFit> fits;
        for (const PairCopulaSpec& spec : copulas[l]) {
            validate(spec);
            EdgeFit fit;
            fit.copula.spec = spec;
            fit.copula.tau = param_to_tau(spec);
            const TailDependence td = tail_dependence(spec);
            fit.copula.lambda_lower = td.lower;
            fit.copula.lambda_upper = td.upper;
            fit.tau = fit.copula.tau;
            fits.push_back(std::move(fit));
        }
        model.pair_copulas.push_back(std::move(fits));
    }
    model.structure = std::move(structure);
    model.margins = std::move(margins);
    return model;
}

std::string structure_class_name(StructureClass c) {
    switch (c) {
        case StructureClass::CVine: return "C-vine";
        case StructureClass::DVine: return "D-vine";
        case StructureClass::General: return "R-vine";
    }
    return "R-vine";
}

StructureClass classify_structure(const VineStructure& s) {
    validate_structure(s);
    bool c_vine = true;
    bool d_vine = true;
    for (std::size_t l = 0; l < s.trees.size(); ++l) {
        std::vector<std::size_t> degree(s.dim - l, 0);
        for (const auto& e : s.trees[l]) {
            ++degree[e.a];
            ++degree[e.b];
        }
        const std::size_t max_degree = *std::max_element(degree.begin(), degree.end());
        if (max_degree != s.trees[l].size()) c_vine = false;
        if (max_degree > 2) d_vine = false;
    }
    if (c_vine) return StructureClass::CVine;
    return d_vine ? StructureClass::DVine : StructureClass::General;
}

VineModel fit_vine(const Eigen::MatrixXd& u, const VineFitOptions& options) {
    const std::size_t d = static_cast<std::size_t>(u.cols());
    const std::size_t n = static_cast<std::size_t>(u.rows());
    if (d < 2) throw InvalidParameter("a vine needs at least two columns");
    if (n < 30) throw InvalidParameter("at least 30 observations are required to fit a vine");
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
        for (Eigen::Index k = 0; k < u.cols(); ++k) {
            if (!(u(r, k) > 0.0 && u(r, k) < 1.0)) {
                throw InvalidParameter("vine input must lie strictly inside (0, 1)");
            }
        }
    }
    if (!options.labels.empty() && options.labels.size() != d) {
        throw LengthMismatch(fmt::format("{} labels for {} columns", options.labels.size(), d));
    }

    VineModel model;
    model.structure.dim = d;
    model.structure.labels = options.labels;
    if (model.structure.labels.empty()) {
        for (std::size_t k = 0; k < d; ++k) model.structure.labels.push_back(fmt::format("V{}", k + 1));
    }
    model.n_obs = n;

    std::vector<Variates> prev;
    for (std::size_t l = 0; l + 1 < d; ++l) {
        const VineTree* prev_tree = l == 0 ? nullptr : &model.structure.trees[l - 1];
        const std::vector<VineEdge> cands = l == 0 ? first_tree_edges(d) : allowed_edges(*prev_tree);
        std::vector<Variates> cand_data(cands.size());
        std::vector<WeightedEdge> weighted;
        std::map<EdgeLabel, std::size_t> by_label;
        std::vector<double> taus(cands.size());
        for (std::size_t c = 0; c < cands.size(); ++c) {
            edge_inputs(u, cands[c], prev_tree, l == 0 ? nullptr : &prev, cand_data[c]);
            taus[c] = kendall_tau(cand_data[c].u1, cand_data[c].u2);
            weighted.push_back({cands[c], std::fabs(taus[c])});
            by_label[cands[c].label] = c;
        }
        VineTree tree = max_spanning_tree(d - l, weighted);
        std::sort(tree.begin(), tree.end(),
                  [](const VineEdge& x, const VineEdge& y) { return x.label < y.label; });

        std::vector<EdgeFit> fits;
        std::vector<Variates> next;
        const bool truncated = options.trunc_level && l + 1 > *options.trunc_level;
        for (const VineEdge& e : tree) {
            const std::size_t c = by_label.at(e.label);
            Variates& data = cand_data[c];
            EdgeFit fit;
            fit.tau = taus[c];
            const PairCopulaSpec indep{Family::Independence, Rotation::Deg0, {}};
            if (truncated) {
                fit.copula = make_fitted(indep, 0.0, n);
            } else {
                try {
                    fit.copula = select_family(data.u1, data.u2, options.candidates, options.criterion);
                } catch (const Error& err) {
                    fit.copula = make_fitted(indep, 0.0, n);
                    fit.warning = fmt::format("fit failed ({}); Independence used", err.what());
                }
            }
            if (l + 2 < d) edge_outputs(fit.copula.spec, data);
            fits.push_back(std::move(fit));
            next.push_back(std::move(data));
        }
        model.structure.trees.push_back(std::move(tree));
        model.pair_copulas.push_back(std::move(fits));
        prev = std::move(next);
    }
    return model;
}

std::pair<std::vector<double>, std::vector<double>> conditional_uniforms(
    const VineModel& model, const Eigen::MatrixXd& u, std::size_t level, std::size_t index) {
    check_uniform_matrix(model, u);
    if (level == 0 || level > model.structure.trees.size() ||
        index >= model.structure.trees[level - 1].size()) {
        throw StructureError(fmt::format("no edge {} in tree {}", index, level));
    }
    validate_structure(model.structure, false);
    require_fitted_levels(model, level - 1);
    auto all = propagate(model, u, level);
    Variates& v = all[level - 1][index];
    return {std::move(v.u1), std::move(v.u2)};
}

Eigen::VectorXd vine_log_density(const VineModel& model, const Eigen::MatrixXd& u) {
    check_uniform_matrix(model, u);
    const std::size_t levels = model.structure.trees.size();
    require_fitted_levels(model, levels);
    const Eigen::Index n = u.rows();
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
    std::vector<Variates> prev;
    for (std::size_t l = 0; l < levels; ++l) {
        const VineTree& tree = model.structure.trees[l];
        const VineTree* prev_tree = l == 0 ? nullptr : &model.structure.trees[l - 1];
        std::vector<Variates> cur(tree.size());
        for (std::size_t k = 0; k < tree.size(); ++k) {
            edge_inputs(u, tree[k], prev_tree, l == 0 ? nullptr : &prev, cur[k]);
            const PairCopulaSpec& spec = model.pair_copulas[l][k].copula.spec;
            if (spec.family != Family::Independence) {
                for (Eigen::Index r = 0; r < n; ++r) {
                    acc(r) += bicop_log_pdf(spec, cur[k].u1[r], cur[k].u2[r]);
                }
            }
            if (l + 1 < levels) edge_outputs(spec, cur[k]);
        }
        prev = std::move(cur);
    }
    return acc;
}

double vine_log_density(const VineModel& model, std::span<const double> u) {
    Eigen::MatrixXd row(1, static_cast<Eigen::Index>(u.size()));
    for (std::size_t k = 0; k < u.size(); ++k) row(0, static_cast<Eigen::Index>(k)) = u[k];
    return vine_log_density(model, row)(0);
}

double joint_log_density(const VineModel& model, std::span<const double> x) {
    Eigen::MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t k = 0; k < x.size(); ++k) row(0, static_cast<Eigen::Index>(k)) = x[k];
    return joint_log_density_rows(model, row)(0);
}

std::size_t parameter_count(const VineModel& model) {
    std::size_t np = 0;
    for (const auto& tree : model.pair_copulas) {
        for (const auto& e : tree) np += parameter_count(e.copula.spec.family);
    }
    return np;
}

double vine_loglik(const VineModel& model, const Eigen::MatrixXd& data) {
    if (data.rows() == 0) throw InvalidParameter("log-likelihood of an empty data set");
    const Eigen::VectorXd ll =
        model.has_margins() ? joint_log_density_rows(model, data) : vine_log_density(model, data);
    return ll.sum();
}

ModelScore score(const VineModel& model, const Eigen::MatrixXd& data) {
    ModelScore s;
    s.loglik = vine_loglik(model, data);
    s.n_params = parameter_count(model);
    s.n_obs = static_cast<std::size_t>(data.rows());
    s.aic = aic(s.loglik, s.n_params);
    s.bic = bic(s.loglik, s.n_params, s.n_obs);
    return s;
}

ModelScore training_score(const VineModel& model) {
    ModelScore s;
    for (const auto& tree : model.pair_copulas) {
        for (const auto& e : tree) s.loglik += e.copula.loglik;
    }
    s.n_params = parameter_count(model);
    s.n_obs = model.n_obs;
    s.aic = aic(s.loglik, s.n_params);
    s.bic = bic(s.loglik, s.n_params, s.n_obs);
    return s;
}

std::vector<std::size_t> sampling_order(const VineStructure& structure) {
    return peel(structure).order;
}

Eigen::MatrixXd simulate(const VineModel& model, std::size_t n, std::uint64_t seed) {
    require_fitted_levels(model, model.structure.trees.size());
    const Peeling p = peel(model.structure);
    const std::size_t d = model.dim();
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index k = 0; k < w.cols(); ++k) w(r, k) = draw_open_unit(rng);
    }

    std::map<VariateKey, std::vector<double>> known;
    auto lookup = [&](std::size_t var, const std::vector<std::size_t>& cond) -> const std::vector<double>& {
        auto it = known.find({var, cond});
        if (it == known.end()) throw StructureError("sampling order misses a conditional variate");
        return it->second;
    };
    for (std::size_t k = 0; k < d; ++k) {
        const std::size_t x = p.order[k];
        const auto& chain = p.chains[k];
        std::vector<double> v(n);
        for (std::size_t r = 0; r < n; ++r) v[r] = clamp_uniform(w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)));
        for (std::size_t l = chain.size(); l-- > 0;) {
            const VineEdge& e = model.structure.trees[chain[l].level][chain[l].index];
            const PairCopulaSpec& spec = model.pair_copulas[chain[l].level][chain[l].index].copula.spec;
            const std::size_t y = e.label.i == x ? e.label.j : e.label.i;
            known[{x, with(e.label.cond, y)}] = v;
            const std::vector<double>& uy = lookup(y, e.label.cond);
            const Conditioning which = x == e.label.i ? Conditioning::Second : Conditioning::First;
            if (spec.family != Family::Independence) {
                for (std::size_t r = 0; r < n; ++r) v[r] = clamp_uniform(hinv(spec, which, uy[r], v[r]));
            }
            known[{x, e.label.cond}] = v;
        }
        if (chain.empty()) known[{x, {}}] = v;
        for (const EdgeRef& ref : chain) {
            const VineEdge& e = model.structure.trees[ref.level][ref.index];
            const PairCopulaSpec& spec = model.pair_copulas[ref.level][ref.index].copula.spec;
            const std::size_t y = e.label.i == x ? e.label.j : e.label.i;
            const std::vector<double>& ux = lookup(x, e.label.cond);
            const std::vector<double>& uy = lookup(y, e.label.cond);
            std::vector<double> out(n);
            const Conditioning which = y == e.label.i ? Conditioning::Second : Conditioning::First;
            for (std::size_t r = 0; r < n; ++r) {
                out[r] = spec.family == Family::Independence
                             ? uy[r]
                             : clamp_uniform(hfunc(spec, which, ux[r], uy[r]));
            }
            known[{y, with(e.label.cond, x)}] = std::move(out);
        }
    }

    Eigen::MatrixXd u(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) {
        const auto& col = lookup(k, {});
        for (std::size_t r = 0; r < n; ++r) u(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = col[r];
    }
    if (model.has_margins()) return inverse_pit(u, model.margins);
    return u;
}

std::vector<double> margin_grid(const MarginalModel& margin, std::size_t points) {
    if (points < 2) throw InvalidParameter("a grid needs at least two points");
    const double lo = margin.quantile(0.005);
    const double hi = margin.quantile(0.995);
    std::vector<double> out(points);
    for (std::size_t k = 0; k < points; ++k) {
        out[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
    }
    return out;
}

Eigen::MatrixXd density_slice(const VineModel& model, const SliceSpec& spec) {
    const std::size_t d = model.dim();
    if (spec.var_i >= d || spec.var_j >= d) throw UnknownVariable("slice variable index out of range");
    if (spec.var_i == spec.var_j) throw UnknownVariable("slice variables must differ");
    if (!model.has_margins()) throw MarginsAbsent("density slices need parametric margins");
    std::vector<double> point(d);
    for (std::size_t k = 0; k < d; ++k) point[k] = model.margins[k].quantile(0.5);
    for (const auto& [var, value] : spec.fixed) {
        if (var >= d) throw UnknownVariable("fixed variable index out of range");
        point[var] = value;
    }
    const auto nx = static_cast<Eigen::Index>(spec.x_grid.size());
    const auto ny = static_cast<Eigen::Index>(spec.y_grid.size());
    Eigen::MatrixXd rows(nx * ny, static_cast<Eigen::Index>(d));
    for (Eigen::Index a = 0; a < nx; ++a) {
        for (Eigen::Index b = 0; b < ny; ++b) {
            const Eigen::Index r = a * ny + b;
            for (std::size_t k = 0; k < d; ++k) rows(r, static_cast<Eigen::Index>(k)) = point[k];
            rows(r, static_cast<Eigen::Index>(spec.var_i)) = spec.x_grid[static_cast<std::size_t>(a)];
            rows(r, static_cast<Eigen::Index>(spec.var_j)) = spec.y_grid[static_cast<std::size_t>(b)];
        }
    }
    const Eigen::VectorXd ll = rows.rows() > 0 ? joint_log_density_rows(model, rows) : Eigen::VectorXd();
    Eigen::MatrixXd out(nx, ny);
    for (Eigen::Index a = 0; a < nx; ++a) {
        for (Eigen::Index b = 0; b < ny; ++b) out(a, b) = std::exp(ll(a * ny + b));
    }
    return out;
}

std::vector<EdgeReport> report(const VineModel& model) {
    require_fitted_levels(model, model.structure.trees.size());
    std::vector<EdgeReport> out;
    for (std::size_t l = 0; l < model.structure.trees.size(); ++l) {
        std::vector<std::size_t> idx(model.structure.trees[l].size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
            return model.structure.trees[l][x].label < model.structure.trees[l][y].label;
        });
        for (std::size_t k : idx) {
            const EdgeFit& fit = model.pair_copulas[l][k];
            const PairCopulaSpec& spec = fit.copula.spec;
            const TailDependence td = tail_dependence(spec);
            EdgeReport row;
            row.tree = l + 1;
            row.edge = format_label(model.structure.trees[l][k].label);
            row.family = std::string(family_name(spec.family));
            row.rotation = degrees(spec.rotation);
            row.par1 = spec.theta.empty() ? 0.0 : spec.theta[0];
            if (spec.theta.size() > 1) row.par2 = spec.theta[1];
            row.tau = fit.tau;
            row.ltd = td.lower;
            row.utd = td.upper;
            row.warning = fit.warning;
            out.push_back(std::move(row));
        }
    }
    return out;
}

void write_report_csv(std::ostream& out, const std::vector<EdgeReport>& rows) {
    out << "tree,edge,family,rotation,par1,par2,tau,ltd,utd\n";
    for (const auto& r : rows) {
        out << r.tree << ",\"" << r.edge << "\"," << r.family << ',' << r.rotation << ','
            << format_number(r.par1) << ',' << (r.par2 ? format_number(*r.par2) : "NA") << ','
            << format_number(r.tau) << ',' << format_number(r.ltd) << ',' << format_number(r.utd)
            << '\n';
    }
}

void write_tree_summary(std::ostream& out, const VineModel& model) {
    const auto rows = report(model);
    out << structure_class_name(classify_structure(model.structure)) << " on "
        << model.dim() << " variables:";
    for (std::size_t k = 0; k < model.structure.labels.size(); ++k) {
        out << ' ' << k + 1 << '=' << model.structure.labels[k];
    }
    out << '\n';
    std::size_t current = 0;
    for (const auto& r : rows) {
        if (r.tree != current) {
            current = r.tree;
            out << "Tree " << current << '\n';
        }
        std::string family = r.family;
        if (r.rotation != 0) family += fmt::format("_{}", r.rotation);
        out << fmt::format("  {:<12} {:<14} {} = {:.4f}", r.edge, family,
                           r.tree == 1 ? "tau" : "partial tau", r.tau);
        if (!r.warning.empty()) out << "  [" << r.warning << ']';
        out << '\n';
    }
}

}  // namespace vinecop
