#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dpdsr/cli/config.hpp"

namespace dpdsr::cli {

/// DPDSR_OUTPUT_ROOT if set, else ./dpdsr_runs.
std::filesystem::path default_output_root();

/// Defaults, then the run.conf stored next to an earlier run (if any), the
/// config file (if any) and the command-line assignments, in that order.
RunConfig resolve_config(const std::optional<std::filesystem::path>& inherited,
                         const std::optional<std::filesystem::path>& config_file,
                         const std::vector<Assignment>& overrides);

/// run.conf of the run that owns a checkpoint or sweep directory, if present.
std::optional<std::filesystem::path> inherited_config(const std::filesystem::path& dir);

/// Refuses a non-empty directory unless overwrite is set, in which case it
/// is cleared.
void prepare_output(const std::filesystem::path& dir, bool overwrite);

/// Reads <data_dir>/<dataset>_{train,test}; synthetic datasets are generated
/// on first use.
dynsys::DatasetPair load_data(const RunConfig& config, std::ostream& log);

struct GenerateRequest {
    std::string name;
    std::uint64_t seed = 0;
    double scale = 1.0;
    std::string rnn_scaling = "g2/n";
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> input;  // raw recording for neuron/ecg
    bool overwrite = false;
};

void cmd_generate(const GenerateRequest& request, std::ostream& log);
void cmd_train(const RunConfig& config, const std::filesystem::path& out, bool overwrite, std::ostream& log);
void cmd_sweep(const RunConfig& config, const std::filesystem::path& out, bool overwrite, std::ostream& log);
void cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint, const std::filesystem::path& out,
              bool overwrite, std::ostream& log);
void cmd_attractors(const RunConfig& config, const std::filesystem::path& checkpoint, const std::filesystem::path& out,
                    bool overwrite, std::ostream& log);
void cmd_tauopt(const RunConfig& config, const std::filesystem::path& sweep_dir, const std::filesystem::path& out,
                bool overwrite, std::ostream& log);

}  // namespace dpdsr::cli
