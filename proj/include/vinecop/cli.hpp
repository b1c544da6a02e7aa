#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "vinecop/bicop.hpp"

namespace vinecop::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,  // usage errors and unexpected failures
    kMalformedInput = 2,
    kArity = 3,
    kMarginFailure = 4,
    kBadVariable = 5,
    kUnsupportedMode = 6,
};

struct Dataset {
    std::vector<std::string> labels;
    Eigen::MatrixXd values;
    std::string source;
    std::size_t dropped_rows = 0;
};

// CSV with a header row. Rows with missing, non-numeric or non-finite cells
// are dropped and counted. Throws MalformedInput.
Dataset parse_dataset(std::istream& in, std::string source);
Dataset read_dataset(const std::filesystem::path& path);

enum class MarginMode { Gld, Johnson, Pseudo };

MarginMode margin_mode_from_name(std::string_view name);  // throws InvalidParameter
std::string_view margin_mode_name(MarginMode mode);

// Comma list of family tags; a bare rotatable family expands to all four
// rotations, "clayton_90" selects one. Throws InvalidParameter.
std::vector<Candidate> parse_families(std::string_view list);

struct RunConfig {
    MarginMode margins = MarginMode::Gld;
    Criterion criterion = Criterion::Aic;
    std::vector<Candidate> candidates = full_candidate_set();
    std::uint64_t seed = 42;
    std::optional<std::size_t> trunc_level;
    std::filesystem::path output_dir = ".";
};

// Each command logs to `log` and returns an exit code. A missing output path
// means standard output (`out`).
int cmd_tau(const std::filesystem::path& input, const std::optional<std::filesystem::path>& output,
            std::ostream& out, std::ostream& log);

// Writes model.json, report.csv, trees.txt and margins.csv into output_dir.
int cmd_fit(const std::filesystem::path& input, const RunConfig& config, std::ostream& log);

int cmd_simulate(const std::filesystem::path& model_file, std::size_t n, std::uint64_t seed,
                 const std::optional<std::filesystem::path>& output, std::ostream& out,
                 std::ostream& log);

struct SliceRequest {
    std::string var_i;
    std::string var_j;
    std::size_t grid = 50;
    std::vector<std::string> fix_at;  // "label=value"
};

// CSV with columns x,y,density, x varying slowest.
int cmd_slice(const std::filesystem::path& model_file, const SliceRequest& request,
              const std::optional<std::filesystem::path>& output, std::ostream& out,
              std::ostream& log);

// Writes report.csv and trees.txt into output_dir and prints the tree listing.
int cmd_report(const std::filesystem::path& model_file, const std::filesystem::path& output_dir,
               std::ostream& out, std::ostream& log);

// Full command line: subcommands tau, fit, simulate, slice, report.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vinecop::cli
