#include "vinecop/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "vinecop/dependence.hpp"
#include "vinecop/errors.hpp"
#include "vinecop/marginals.hpp"
#include "vinecop/numeric.hpp"
#include "vinecop/serialize.hpp"
#include "vinecop/vine.hpp"

namespace vinecop::cli {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

// Comma split honoring double-quoted fields.
std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (c == '"') {
            if (quoted && k + 1 < line.size() && line[k + 1] == '"') {
                cur += '"';
                ++k;
            } else {
                quoted = !quoted;
            }
        } else if (c == ',' && !quoted) {
            out.emplace_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.emplace_back(trim(cur));
    return out;
}

std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void write_matrix_csv(std::ostream& out, const std::vector<std::string>& labels, const Eigen::MatrixXd& m) {
    for (std::size_t k = 0; k < labels.size(); ++k) out << (k ? "," : "") << csv_field(labels[k]);
    out << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index k = 0; k < m.cols(); ++k) out << (k ? "," : "") << num(m(r, k));
        out << '\n';
    }
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(fmt::format("cannot write {}", path.string()));
    return f;
}

// Runs `body` with either the named file or `fallback` as sink.
template <class F>
void with_sink(const std::optional<fs::path>& path, std::ostream& fallback, F body) {
    if (!path) {
        body(fallback);
        return;
    }
    auto f = open_output(*path);
    body(f);
    if (!f) throw Error(fmt::format("failed writing {}", path->string()));
}

void log_dropped(const Dataset& ds, std::ostream& log) {
    if (ds.dropped_rows > 0) {
        log << fmt::format("{}: dropped {} row(s) with missing or non-numeric cells\n", ds.source,
                           ds.dropped_rows);
    }
}

std::optional<std::size_t> find_label(const std::vector<std::string>& labels, const std::string& name) {
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k] == name) return k;
    }
    return std::nullopt;
}

void write_margins_csv(std::ostream& out, const std::vector<std::string>& labels,
                       const std::vector<MarginalModel>& margins, const Eigen::MatrixXd& u) {
    out << "column,kind,variant,p1,p2,p3,p4,ad_statistic,ad_5pct_pass\n";
    for (std::size_t k = 0; k < labels.size(); ++k) {
        std::vector<double> col(u.col(static_cast<Eigen::Index>(k)).data(),
                                u.col(static_cast<Eigen::Index>(k)).data() + u.rows());
        const double ad = anderson_darling_uniform(col);
        out << csv_field(labels[k]) << ',';
        if (margins.empty()) {
            out << "pseudo-observations,NA,NA,NA,NA,NA";
        } else {
            const MarginalModel& m = margins[k];
            switch (m.kind()) {
                case MarginalModel::Kind::Gld: {
                    const auto& p = m.gld_params();
                    out << "gld,NA," << num(p.lambda1) << ',' << num(p.lambda2) << ','
                        << num(p.lambda3) << ',' << num(p.lambda4);
                    break;
                }
                case MarginalModel::Kind::Johnson: {
                    const auto& p = m.johnson_params();
                    out << "johnson," << johnson_variant_name(p.variant) << ',' << num(p.gamma) << ','
                        << num(p.eta) << ',' << num(p.epsilon) << ',' << num(p.lambda);
                    break;
                }
                case MarginalModel::Kind::Empirical:
                    out << "empirical,NA,NA,NA,NA,NA";
                    break;
            }
        }
        out << ',' << num(ad) << ',' << (ad <= kAndersonDarling5pct ? "true" : "false") << '\n';
    }
}

void write_report_files(const VineModel& model, const fs::path& dir) {
    fs::create_directories(dir);
    {
        auto f = open_output(dir / "report.csv");
        write_report_csv(f, report(model));
    }
    auto f = open_output(dir / "trees.txt");
    write_tree_summary(f, model);
}

// Loads a model file, mapping document problems to exit code 2.
std::optional<VineModel> load_or_log(const fs::path& path, std::ostream& log) {
    try {
        return load_model(path);
    } catch (const MalformedDocument& e) {
        log << "error: " << e.what() << '\n';
    } catch (const SchemaVersionError& e) {
        log << "error: " << e.what() << '\n';
    }
    return std::nullopt;
}

template <class F>
int guarded(std::ostream& log, F body) {
    try {
        return body();
    } catch (const MalformedInput& e) {
        log << "error: " << e.what() << '\n';
        return kMalformedInput;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kFailure;
    }
}

}  // namespace

Dataset parse_dataset(std::istream& in, std::string source) {
    Dataset ds;
    ds.source = std::move(source);
    std::string line;
    bool have_header = false;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_csv(line);
        if (!have_header) {
            std::map<std::string, int> seen;
            for (const auto& f : fields) {
                if (f.empty()) throw MalformedInput(ds.source + ": empty column name in header");
                if (seen[f]++) throw MalformedInput(ds.source + ": duplicate column name '" + f + "'");
            }
            ds.labels = std::move(fields);
            have_header = true;
            continue;
        }
        std::vector<double> row;
        bool ok = fields.size() == ds.labels.size();
        for (std::size_t k = 0; ok && k < fields.size(); ++k) {
            const auto v = parse_number(fields[k]);
            if (!v) ok = false;
            else row.push_back(*v);
        }
        if (ok) rows.push_back(std::move(row));
        else ++ds.dropped_rows;
    }
    if (!have_header) throw MalformedInput(ds.source + ": no header row");
    ds.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ds.labels.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t k = 0; k < rows[r].size(); ++k) {
            ds.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
        }
    }
    return ds;
}

Dataset read_dataset(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedInput(fmt::format("cannot read {}", path.string()));
    return parse_dataset(in, path.string());
}

MarginMode margin_mode_from_name(std::string_view name) {
    if (name == "gld") return MarginMode::Gld;
    if (name == "johnson") return MarginMode::Johnson;
    if (name == "pseudo") return MarginMode::Pseudo;
    throw InvalidParameter(fmt::format("unknown margin mode '{}'", name));
}

std::string_view margin_mode_name(MarginMode mode) {
    switch (mode) {
        case MarginMode::Gld: return "gld";
        case MarginMode::Johnson: return "johnson";
        case MarginMode::Pseudo: return "pseudo";
    }
    return "gld";
}

std::vector<Candidate> parse_families(std::string_view list) {
    std::vector<Candidate> out;
    auto add = [&](Candidate c) {
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    };
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto comma = list.find(',', start);
        const auto item = trim(list.substr(start, comma == std::string_view::npos ? list.npos : comma - start));
        start = comma == std::string_view::npos ? list.size() + 1 : comma + 1;
        if (item.empty()) continue;
        const auto us = item.find('_');
        const Family f = family_from_tag(item.substr(0, us));
        if (us != std::string_view::npos) {
            int deg = 0;
            const auto tail = item.substr(us + 1);
            const auto [p, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), deg);
            if (ec != std::errc() || p != tail.data() + tail.size()) {
                throw InvalidParameter(fmt::format("bad rotation in '{}'", item));
            }
            const Rotation r = rotation_from_degrees(deg);
            if (r != Rotation::Deg0 && !is_rotatable(f)) {
                throw InvalidParameter(fmt::format("{} has no rotated variants", family_name(f)));
            }
            add({f, r});
        } else if (is_rotatable(f)) {
            for (int deg : {0, 90, 180, 270}) add({f, rotation_from_degrees(deg)});
        } else {
            add({f, Rotation::Deg0});
        }
    }
    if (out.empty()) throw InvalidParameter("family list is empty");
    return out;
}

int cmd_tau(const fs::path& input, const std::optional<fs::path>& output, std::ostream& out,
            std::ostream& log) {
    return guarded(log, [&] {
        const Dataset ds = read_dataset(input);
        log_dropped(ds, log);
        if (ds.labels.size() < 2) {
            log << "error: at least two columns are required\n";
            return static_cast<int>(kArity);
        }
        if (ds.values.rows() < 2) throw MalformedInput(ds.source + ": fewer than two complete rows");
        const TauMatrix tau = tau_matrix(ds.values, ds.labels);
        with_sink(output, out, [&](std::ostream& sink) { write_tau_csv(sink, tau); });
        return static_cast<int>(kOk);
    });
}

int cmd_fit(const fs::path& input, const RunConfig& config, std::ostream& log) {
    return guarded(log, [&] {
        const Dataset ds = read_dataset(input);
        log_dropped(ds, log);
        const std::size_t d = ds.labels.size();
        if (d < 2) {
            log << "error: at least two columns are required\n";
            return static_cast<int>(kArity);
        }
        if (ds.values.rows() < 30) {
            throw MalformedInput(fmt::format("{}: {} complete rows, at least 30 are required",
                                             ds.source, ds.values.rows()));
        }

        std::vector<MarginalModel> margins;
        Eigen::MatrixXd u;
        if (config.margins == MarginMode::Pseudo) {
            u = pseudo_observations(ds.values);
        } else {
            for (std::size_t k = 0; k < d; ++k) {
                const auto c = ds.values.col(static_cast<Eigen::Index>(k));
                const std::vector<double> column(c.data(), c.data() + c.size());
                try {
                    margins.push_back(config.margins == MarginMode::Gld
                                          ? MarginalModel::gld(gld_fit_starship(column))
                                          : MarginalModel::johnson(johnson_fit(column)));
                } catch (const Error& e) {
                    log << fmt::format("error: {} margin fit failed for column '{}': {}\n",
                                       margin_mode_name(config.margins), ds.labels[k], e.what());
                    return static_cast<int>(kMarginFailure);
                }
            }
            u = pit(ds.values, margins);
        }

        VineFitOptions opt;
        opt.candidates = config.candidates;
        opt.criterion = config.criterion;
        opt.trunc_level = config.trunc_level;
        opt.labels = ds.labels;
        VineModel model = fit_vine(u, opt);
        model.margins = std::move(margins);

        fs::create_directories(config.output_dir);
        save_model(model, config.output_dir / "model.json");
        write_report_files(model, config.output_dir);
        {
            auto f = open_output(config.output_dir / "margins.csv");
            write_margins_csv(f, ds.labels, model.margins, u);
        }

        const ModelScore s = training_score(model);
        log << fmt::format("fitted {} on {} rows x {} columns ({} margins)\n",
                           structure_class_name(classify_structure(model.structure)),
                           ds.values.rows(), d, margin_mode_name(config.margins));
        log << fmt::format("copula loglik {:.6f}, aic {:.6f}, bic {:.6f}, {} parameters\n", s.loglik,
                           s.aic, s.bic, s.n_params);
        for (const auto& row : report(model)) {
            if (!row.warning.empty()) log << fmt::format("warning: edge {}: {}\n", row.edge, row.warning);
        }
        return static_cast<int>(kOk);
    });
}

int cmd_simulate(const fs::path& model_file, std::size_t n, std::uint64_t seed,
                 const std::optional<fs::path>& output, std::ostream& out, std::ostream& log) {
    return guarded(log, [&] {
        const auto model = load_or_log(model_file, log);
        if (!model) return static_cast<int>(kMalformedInput);
        const Eigen::MatrixXd x = simulate(*model, n, seed);
        with_sink(output, out, [&](std::ostream& sink) { write_matrix_csv(sink, model->structure.labels, x); });
        return static_cast<int>(kOk);
    });
}

int cmd_slice(const fs::path& model_file, const SliceRequest& request,
              const std::optional<fs::path>& output, std::ostream& out, std::ostream& log) {
    return guarded(log, [&] {
        const auto model = load_or_log(model_file, log);
        if (!model) return static_cast<int>(kMalformedInput);
        const auto& labels = model->structure.labels;
        const auto i = find_label(labels, request.var_i);
        const auto j = find_label(labels, request.var_j);
        if (!i || !j) {
            log << fmt::format("error: unknown variable '{}'\n", !i ? request.var_i : request.var_j);
            return static_cast<int>(kBadVariable);
        }
        if (*i == *j) {
            log << "error: slice variables must differ\n";
            return static_cast<int>(kBadVariable);
        }
        SliceSpec spec;
        spec.var_i = *i;
        spec.var_j = *j;
        for (const auto& item : request.fix_at) {
            const auto eq = item.find('=');
            const auto name = eq == std::string::npos ? item : item.substr(0, eq);
            const auto var = find_label(labels, std::string(trim(name)));
            if (!var) {
                log << fmt::format("error: unknown variable '{}'\n", name);
                return static_cast<int>(kBadVariable);
            }
            const auto value = eq == std::string::npos ? std::nullopt : parse_number(item.substr(eq + 1));
            if (!value) throw MalformedInput(fmt::format("--fix-at '{}' is not name=number", item));
            spec.fixed[*var] = *value;
        }
        if (!model->has_margins()) {
            log << "error: model has pseudo-observation margins; no data-space density\n";
            return static_cast<int>(kUnsupportedMode);
        }
        if (request.grid < 2) throw InvalidParameter("--grid needs at least 2 points");
        spec.x_grid = margin_grid(model->margins[*i], request.grid);
        spec.y_grid = margin_grid(model->margins[*j], request.grid);
        const Eigen::MatrixXd dens = density_slice(*model, spec);
        with_sink(output, out, [&](std::ostream& sink) {
            sink << "x,y,density\n";
            for (std::size_t a = 0; a < spec.x_grid.size(); ++a) {
                for (std::size_t b = 0; b < spec.y_grid.size(); ++b) {
                    sink << num(spec.x_grid[a]) << ',' << num(spec.y_grid[b]) << ','
                         << num(dens(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))) << '\n';
                }
            }
        });
        return static_cast<int>(kOk);
    });
}

int cmd_report(const fs::path& model_file, const fs::path& output_dir, std::ostream& out,
               std::ostream& log) {
    return guarded(log, [&] {
        const auto model = load_or_log(model_file, log);
        if (!model) return static_cast<int>(kMalformedInput);
        write_report_files(*model, output_dir);
        write_tree_summary(out, *model);
        return static_cast<int>(kOk);
    });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Vine copula modeling of multivariate column data"};
    app.require_subcommand(1);

    std::string input, model_file, output, output_dir = ".", margins = "gld", criterion = "aic";
    std::string families;
    std::uint64_t seed = 42;
    std::optional<std::size_t> trunc_level;
    std::size_t n = 0;
    SliceRequest slice;

    auto* tau = app.add_subcommand("tau", "Sample Kendall's tau matrix");
    tau->add_option("--input", input, "CSV file with header row")->required();
    tau->add_option("--output", output, "Output CSV (default: standard output)");

    auto* fit = app.add_subcommand("fit", "Fit margins and a vine copula");
    fit->add_option("--input", input, "CSV file with header row")->required();
    fit->add_option("--output-dir", output_dir, "Directory for model and reports");
    fit->add_option("--margins", margins, "gld, johnson or pseudo")
        ->check(CLI::IsMember({"gld", "johnson", "pseudo"}));
    fit->add_option("--criterion", criterion, "aic or bic")->check(CLI::IsMember({"aic", "bic"}));
    fit->add_option("--seed", seed, "Random seed");
    fit->add_option("--trunc-level", trunc_level, "Trees deeper than this are Independence");
    fit->add_option("--families", families, "Comma list of candidate families");

    auto* sim = app.add_subcommand("simulate", "Draw from a fitted model");
    sim->add_option("--model", model_file, "Model JSON file")->required();
    sim->add_option("--n", n, "Number of draws")->required();
    sim->add_option("--seed", seed, "Random seed");
    sim->add_option("--output", output, "Output CSV (default: standard output)");

    auto* sl = app.add_subcommand("slice", "Two-dimensional density slice");
    sl->add_option("--model", model_file, "Model JSON file")->required();
    sl->add_option("--var-i", slice.var_i, "First variable label")->required();
    sl->add_option("--var-j", slice.var_j, "Second variable label")->required();
    sl->add_option("--grid", slice.grid, "Points per axis");
    sl->add_option("--fix-at", slice.fix_at, "label=value for a remaining variable (default: median)");
    sl->add_option("--output", output, "Output CSV (default: standard output)");

    auto* rep = app.add_subcommand("report", "Edge report and tree listing");
    rep->add_option("--model", model_file, "Model JSON file")->required();
    rep->add_option("--output-dir", output_dir, "Directory for report files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? static_cast<int>(kOk) : static_cast<int>(kFailure);
    }

    const std::optional<fs::path> out_path =
        output.empty() ? std::nullopt : std::optional<fs::path>(output);
    if (*tau) return cmd_tau(input, out_path, out, err);
    if (*fit) {
        RunConfig cfg;
        cfg.margins = margin_mode_from_name(margins);
        cfg.criterion = criterion == "bic" ? Criterion::Bic : Criterion::Aic;
        cfg.seed = seed;
        cfg.trunc_level = trunc_level;
        cfg.output_dir = output_dir;
        if (!families.empty()) {
            try {
                cfg.candidates = parse_families(families);
            } catch (const Error& e) {
                err << "error: --families: " << e.what() << '\n';
                return kFailure;
            }
        }
        return cmd_fit(input, cfg, err);
    }
    if (*sim) return cmd_simulate(model_file, n, seed, out_path, out, err);
    if (*sl) return cmd_slice(model_file, slice, out_path, out, err);
    return cmd_report(model_file, output_dir, out, err);
}

}  // namespace vinecop::cli
