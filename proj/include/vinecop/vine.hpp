#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "vinecop/bicop.hpp"
#include "vinecop/marginals.hpp"

namespace vinecop {

// Edge label (i, j | D) over 0-based variable indices; i < j, D sorted.
struct EdgeLabel {
    std::size_t i = 0;
    std::size_t j = 0;
    std::vector<std::size_t> cond;

    friend bool operator==(const EdgeLabel&, const EdgeLabel&) = default;
    friend auto operator<=>(const EdgeLabel&, const EdgeLabel&) = default;
};

// "i,j|D" with 1-based indices; tree-1 labels have no bar.
std::string format_label(const EdgeLabel& label);

// An edge of tree l joins nodes a and b of that tree: variables for l = 1,
// edges of tree l-1 (by position) otherwise.
struct VineEdge {
    EdgeLabel label;
    std::size_t a = 0;
    std::size_t b = 0;

    friend bool operator==(const VineEdge&, const VineEdge&) = default;
};

using VineTree = std::vector<VineEdge>;

struct VineStructure {
    std::size_t dim = 0;
    std::vector<std::string> labels;
    std::vector<VineTree> trees;  // trees[l - 1] is tree l
};

// Throws StructureError unless the trees form a regular vine whose labels
// follow the proximity and labeling rules. A prefix of the d - 1 trees is
// accepted when `complete` is false.
void validate_structure(const VineStructure& structure, bool complete = true);

struct WeightedEdge {
    VineEdge edge;
    double weight = 0.0;
};

// Pairs of previous-tree edges sharing exactly one node, labeled (i, j | D).
std::vector<VineEdge> allowed_edges(const VineTree& previous);

// Every pair of variables.
std::vector<VineEdge> first_tree_edges(std::size_t dim);

// Prim's algorithm: spanning tree of maximal total weight over nodes 0..n_nodes-1.
// Ties prefer the lexicographically smaller (min, max, D) label.
// Throws StructureError when the candidate graph is disconnected.
VineTree max_spanning_tree(std::size_t n_nodes, const std::vector<WeightedEdge>& candidates);

// Path order[0] - order[1] - ... in every tree.
VineStructure dvine_structure(const std::vector<std::size_t>& order);

// Tree l is a star around order[l - 1].
VineStructure cvine_structure(const std::vector<std::size_t>& order);

enum class StructureClass { CVine, DVine, General };
std::string structure_class_name(StructureClass c);
StructureClass classify_structure(const VineStructure& structure);

struct EdgeFit {
    FittedPairCopula copula;
    double tau = 0.0;  // empirical tau of the training inputs of this edge
    std::string warning;
};

struct VineModel {
    VineStructure structure;
    std::vector<std::vector<EdgeFit>> pair_copulas;  // parallel to structure.trees
    std::vector<MarginalModel> margins;               // empty: pseudo-observations
    std::size_t n_obs = 0;

    std::size_t dim() const { return structure.dim; }
    bool has_margins() const { return !margins.empty(); }
};

// Model with given copulas, listed tree by tree in structure order. Edge tau
// is the copula's theoretical tau; log-likelihoods are zero.
VineModel make_vine_model(VineStructure structure,
                          const std::vector<std::vector<PairCopulaSpec>>& copulas,
                          std::vector<MarginalModel> margins = {});

struct VineFitOptions {
    std::vector<Candidate> candidates = full_candidate_set();
    Criterion criterion = Criterion::Aic;
    std::optional<std::size_t> trunc_level;  // trees deeper than this are Independence
    std::vector<std::string> labels;
};

// Greedy level-by-level structure selection and pair-copula fitting.
// Requires d >= 2, n >= 30 and entries in (0, 1).
VineModel fit_vine(const Eigen::MatrixXd& u, const VineFitOptions& options = {});

// Copula inputs (u_{i|D}, u_{j|D}) of edge `index` in tree `level` (1-based).
// Throws MissingAncestor when a lower tree has no fitted copulas.
std::pair<std::vector<double>, std::vector<double>> conditional_uniforms(
    const VineModel& model, const Eigen::MatrixXd& u, std::size_t level, std::size_t index);

double vine_log_density(const VineModel& model, std::span<const double> u);
Eigen::VectorXd vine_log_density(const VineModel& model, const Eigen::MatrixXd& u);

// Copula log-density at the PIT of x plus the margin log-densities.
// Returns -inf outside a margin's support. Throws MarginsAbsent.
double joint_log_density(const VineModel& model, std::span<const double> x);

std::size_t parameter_count(const VineModel& model);

struct ModelScore {
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    std::size_t n_params = 0;
    std::size_t n_obs = 0;
};

// Rows are data-space points for models with margins, uniforms otherwise.
double vine_loglik(const VineModel& model, const Eigen::MatrixXd& data);
ModelScore score(const VineModel& model, const Eigen::MatrixXd& data);

// Sum of the stored per-edge training log-likelihoods.
ModelScore training_score(const VineModel& model);

// Sampling order of the inverse Rosenblatt transform (first sampled first).
std::vector<std::size_t> sampling_order(const VineStructure& structure);

// n draws; data space when margins are present, uniforms otherwise.
Eigen::MatrixXd simulate(const VineModel& model, std::size_t n, std::uint64_t seed);

struct SliceSpec {
    std::size_t var_i = 0;
    std::size_t var_j = 1;
    std::vector<double> x_grid;
    std::vector<double> y_grid;
    // Values of the remaining variables; missing ones are fixed at the margin median.
    std::map<std::size_t, double> fixed;
};

// Density over x_grid (rows) by y_grid (columns).
Eigen::MatrixXd density_slice(const VineModel& model, const SliceSpec& spec);

// Evenly spaced points between the 0.005 and 0.995 quantiles of a margin.
std::vector<double> margin_grid(const MarginalModel& margin, std::size_t points);

struct EdgeReport {
    std::size_t tree = 0;
    std::string edge;
    std::string family;
    int rotation = 0;
    double par1 = 0.0;
    std::optional<double> par2;
    double tau = 0.0;
    double ltd = 0.0;
    double utd = 0.0;
    std::string warning;
};

std::vector<EdgeReport> report(const VineModel& model);

// CSV with header tree,edge,family,rotation,par1,par2,tau,ltd,utd.
void write_report_csv(std::ostream& out, const std::vector<EdgeReport>& rows);

// Indented per-tree listing of edges with their tau values.
void write_tree_summary(std::ostream& out, const VineModel& model);

}  // namespace vinecop
