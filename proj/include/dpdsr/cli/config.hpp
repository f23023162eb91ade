#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dpdsr/attractors/attractors.hpp"
#include "dpdsr/evaluation/evaluation.hpp"
#include "dpdsr/training/sweep.hpp"

namespace dpdsr::cli {

/// Bad invocation or configuration; maps to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Everything a command can be configured with. Serialized flat, one
/// key = value per line, into every output directory.
struct RunConfig {
    std::string dataset = "doublewell";
    std::filesystem::path data_dir;  // empty: <output root>/data
    std::uint64_t data_seed = 0;
    double data_scale = 1.0;  // fraction of the full simulated series
    std::string rnn_scaling = "g2/n";  // or g/n2
    training::TrainingConfig train;
    training::SweepGrid grid;
    std::size_t workers = 1;
    evaluation::EvaluationOptions eval;
    std::size_t attractor_points = 100;
    attractors::AttractorOptions attractor;
    std::size_t trajectory_points = 1000;  // written per attractor
    double tauopt_clamp = 200.0;
    std::size_t plot_points = 1000;
    std::size_t log_every = 100;
};

using Assignment = std::pair<std::string, std::string>;

/// Parses `key = value` lines; '#' starts a comment. Malformed lines are
/// reported together.
std::vector<Assignment> parse_config_text(std::string_view text, std::string_view origin = "config");
std::vector<Assignment> read_config_file(const std::filesystem::path& path);

/// `key=value` as given on the command line.
Assignment parse_assignment(std::string_view text);

/// Applies assignments in order. Unknown keys and unparsable values are
/// collected and thrown as one UsageError.
void apply_assignments(RunConfig& config, const std::vector<Assignment>& assignments);

/// Every key, in the order to_text writes them.
std::vector<std::string> config_keys();

/// Full round-trip text form of the resolved configuration.
std::string to_text(const RunConfig& config);

/// Cross-field checks (training, sweep grid, dataset name).
void validate(const RunConfig& config);

}  // namespace dpdsr::cli
