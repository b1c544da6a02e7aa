#include "vinecop/serialize.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "vinecop/errors.hpp"

namespace vinecop {

namespace {

using Json = nlohmann::ordered_json;

constexpr const char* kPseudo = "pseudo-observations";

std::vector<std::size_t> full_set(const EdgeLabel& l) {
    std::vector<std::size_t> s = l.cond;
    s.push_back(l.i);
    s.push_back(l.j);
    std::sort(s.begin(), s.end());
    return s;
}

Json margin_to_json(const MarginalModel& m) {
    Json out;
    switch (m.kind()) {
        case MarginalModel::Kind::Gld: {
            const GldParams& p = m.gld_params();
            out["kind"] = "gld";
            out["params"] = {p.lambda1, p.lambda2, p.lambda3, p.lambda4};
            break;
        }
        case MarginalModel::Kind::Johnson: {
            const JohnsonParams& p = m.johnson_params();
            out["kind"] = "johnson";
            out["variant"] = johnson_variant_name(p.variant);
            out["params"] = {p.gamma, p.eta, p.epsilon, p.lambda};
            break;
        }
        case MarginalModel::Kind::Empirical:
            out["kind"] = "empirical";
            out["sample"] = m.empirical_margin().sorted_sample();
            break;
    }
    return out;
}

std::vector<double> number_array(const Json& j, std::size_t expected, const char* what) {
    if (!j.is_array()) throw MalformedDocument(fmt::format("{} must be an array", what));
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) throw MalformedDocument(fmt::format("{} must hold numbers", what));
        out.push_back(v.get<double>());
    }
    if (expected != 0 && out.size() != expected) {
        throw MalformedDocument(fmt::format("{} must hold {} numbers", what, expected));
    }
    return out;
}

MarginalModel margin_from_json(const Json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gld") {
        const auto p = number_array(j.at("params"), 4, "gld params");
        const GldParams g{p[0], p[1], p[2], p[3]};
        if (!gld_is_valid(g)) throw MalformedDocument("gld margin parameters are not valid");
        return MarginalModel::gld(g);
    }
    if (kind == "johnson") {
        const auto p = number_array(j.at("params"), 4, "johnson params");
        const JohnsonParams jp{johnson_variant_from_name(j.at("variant").get<std::string>()), p[0],
                               p[1], p[2], p[3]};
        if (!johnson_is_valid(jp)) throw MalformedDocument("johnson margin parameters are not valid");
        return MarginalModel::johnson(jp);
    }
    if (kind == "empirical") {
        const auto s = number_array(j.at("sample"), 0, "empirical sample");
        return MarginalModel::empirical(s);
    }
    throw MalformedDocument(fmt::format("unknown margin kind '{}'", kind));
}

std::size_t index_from_json(const Json& j, std::size_t d, const char* what) {
    if (!j.is_number_integer()) throw MalformedDocument(fmt::format("{} must be an integer", what));
    const long long v = j.get<long long>();
    if (v < 1 || static_cast<std::size_t>(v) > d) {
        throw MalformedDocument(fmt::format("{} = {} is not a variable index", what, v));
    }
    return static_cast<std::size_t>(v - 1);
}

VineModel parse_model(const Json& doc) {
    if (!doc.is_object()) throw MalformedDocument("model document must be a JSON object");
    if (!doc.contains("version") || !doc["version"].is_number_integer()) {
        throw MalformedDocument("model document has no integer version");
    }
    const int version = doc["version"].get<int>();
    if (version != kModelSchemaVersion) {
        throw SchemaVersionError(fmt::format("unsupported model schema version {} (expected {})",
                                             version, kModelSchemaVersion));
    }

    VineModel model;
    model.structure.labels = doc.at("labels").get<std::vector<std::string>>();
    const std::size_t d = model.structure.labels.size();
    if (d < 2) throw MalformedDocument("a model needs at least two variables");
    model.structure.dim = d;
    model.n_obs = doc.at("n_obs").get<std::size_t>();

    const Json& trees = doc.at("trees");
    if (!trees.is_array() || trees.size() != d - 1) {
        throw MalformedDocument(fmt::format("expected {} tree levels", d - 1));
    }
    for (std::size_t l = 0; l < trees.size(); ++l) {
        const Json& t = trees[l];
        if (t.at("level").get<std::size_t>() != l + 1) {
            throw MalformedDocument(fmt::format("tree level {} is missing or out of order", l + 1));
        }
        const Json& edges = t.at("edges");
        if (!edges.is_array() || edges.size() != d - l - 1) {
            throw MalformedDocument(fmt::format("tree {} must have {} edges", l + 1, d - l - 1));
        }
        std::map<std::vector<std::size_t>, std::size_t> prev_sets;
        if (l > 0) {
            const auto& prev = model.structure.trees[l - 1];
            for (std::size_t k = 0; k < prev.size(); ++k) prev_sets[full_set(prev[k].label)] = k;
        }
        VineTree tree;
        std::vector<EdgeFit> fits;
        for (const Json& e : edges) {
            EdgeLabel label;
            label.i = index_from_json(e.at("i"), d, "i");
            label.j = index_from_json(e.at("j"), d, "j");
            for (const Json& c : e.at("D")) label.cond.push_back(index_from_json(c, d, "D"));
            std::sort(label.cond.begin(), label.cond.end());
            if (label.i >= label.j) throw MalformedDocument("edge indices must satisfy i < j");
            if (label.cond.size() != l) {
                throw MalformedDocument(fmt::format("tree {} edges need {} conditioning indices", l + 1, l));
            }
            VineEdge edge{label, label.i, label.j};
            if (l > 0) {
                auto set = full_set(label);
                auto without = [&](std::size_t v) {
                    std::vector<std::size_t> s;
                    std::copy_if(set.begin(), set.end(), std::back_inserter(s),
                                 [&](std::size_t x) { return x != v; });
                    return s;
                };
                const auto ia = prev_sets.find(without(label.j));
                const auto ib = prev_sets.find(without(label.i));
                if (ia == prev_sets.end() || ib == prev_sets.end()) {
                    throw MalformedDocument(fmt::format("edge {} does not join two edges of tree {}",
                                                        format_label(label), l));
                }
                edge.a = ia->second;
                edge.b = ib->second;
            }
            tree.push_back(std::move(edge));

            const Family family = family_from_tag(e.at("family").get<std::string>());
            const Rotation rotation = rotation_from_degrees(e.at("rotation").get<int>());
            const auto params = number_array(e.at("params"), 0, "params");
            const PairCopulaSpec spec = make_spec(family, rotation, params);
            EdgeFit fit;
            fit.copula = make_fitted(spec, e.at("loglik").get<double>(), model.n_obs);
            fit.tau = e.at("tau").get<double>();
            if (e.contains("warning")) fit.warning = e["warning"].get<std::string>();
            fits.push_back(std::move(fit));
        }
        model.structure.trees.push_back(std::move(tree));
        model.pair_copulas.push_back(std::move(fits));
    }
    validate_structure(model.structure);

    const Json& margins = doc.at("margins");
    if (margins.is_string()) {
        if (margins.get<std::string>() != kPseudo) throw MalformedDocument("unknown margins marker");
    } else if (margins.is_array()) {
        if (margins.size() != d) throw MalformedDocument(fmt::format("expected {} margins", d));
        for (const Json& m : margins) model.margins.push_back(margin_from_json(m));
    } else {
        throw MalformedDocument("margins must be a marker string or an array");
    }
    return model;
}

}  // namespace

std::string serialize_model(const VineModel& model) {
    validate_structure(model.structure);
    Json doc;
    doc["version"] = kModelSchemaVersion;
    doc["labels"] = model.structure.labels;
    doc["n_obs"] = model.n_obs;
    doc["structure"] = structure_class_name(classify_structure(model.structure));
    if (model.n_obs > 0 && model.pair_copulas.size() == model.structure.trees.size()) {
        const ModelScore s = training_score(model);
        doc["copula_loglik"] = s.loglik;
        doc["copula_aic"] = s.aic;
        doc["copula_bic"] = s.bic;
    }
    Json trees = Json::array();
    for (std::size_t l = 0; l < model.structure.trees.size(); ++l) {
        Json edges = Json::array();
        for (std::size_t k = 0; k < model.structure.trees[l].size(); ++k) {
            const EdgeLabel& lab = model.structure.trees[l][k].label;
            const EdgeFit& fit = model.pair_copulas.at(l).at(k);
            const PairCopulaSpec& spec = fit.copula.spec;
            const TailDependence td = tail_dependence(spec);
            Json e;
            e["i"] = lab.i + 1;
            e["j"] = lab.j + 1;
            Json cond = Json::array();
            for (std::size_t c : lab.cond) cond.push_back(c + 1);
            e["D"] = cond;
            e["family"] = family_tag(spec.family);
            e["rotation"] = degrees(spec.rotation);
            e["params"] = spec.theta;
            e["tau"] = fit.tau;
            e["ltd"] = td.lower;
            e["utd"] = td.upper;
            e["loglik"] = fit.copula.loglik;
            if (!fit.warning.empty()) e["warning"] = fit.warning;
            edges.push_back(std::move(e));
        }
        trees.push_back(Json{{"level", l + 1}, {"edges", std::move(edges)}});
    }
    doc["trees"] = std::move(trees);
    if (model.has_margins()) {
        Json margins = Json::array();
        for (const auto& m : model.margins) margins.push_back(margin_to_json(m));
        doc["margins"] = std::move(margins);
    } else {
        doc["margins"] = kPseudo;
    }
    return doc.dump(2) + "\n";
}

VineModel deserialize_model(std::string_view document) {
    Json doc;
    try {
        doc = Json::parse(document.begin(), document.end());
    } catch (const nlohmann::json::exception& e) {
        throw MalformedDocument(fmt::format("model document is not valid JSON: {}", e.what()));
    }
    try {
        return parse_model(doc);
    } catch (const MalformedDocument&) {
        throw;
    } catch (const SchemaVersionError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedDocument(fmt::format("model document: {}", e.what()));
    } catch (const Error& e) {
        throw MalformedDocument(fmt::format("model document: {}", e.what()));
    } catch (const std::exception& e) {
        throw MalformedDocument(fmt::format("model document: {}", e.what()));
    }
}

void save_model(const VineModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    out << serialize_model(model);
    if (!out) throw Error(fmt::format("failed writing {}", path.string()));
}

VineModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedDocument(fmt::format("cannot read {}", path.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_model(buf.str());
}

}  // namespace vinecop
