#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dpdsr/evaluation/evaluation.hpp"
#include "dpdsr/training/trainer.hpp"

namespace dpdsr::training {

/// Hyperparameter axes. Only the axes of the swept variant are used:
/// DPDSR/SPDSR tau x log_sigma_eta2, DKF log_sigma_eta2 x log_sigma_eps2,
/// AR-LSTM gamma x t_pred.
struct SweepGrid {
    std::vector<double> tau{1, 10, 20, 40, 60, 80, 100, 200};
    std::vector<double> log_sigma_eta2{-4, -2, 0};
    std::vector<double> log_sigma_eps2{-8, -6, -4, -2};
    std::vector<double> gamma{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<double> t_pred{20, 50, 100, 200};
    std::size_t seeds = 4;

    /// (axis name, values) in nesting order for the variant.
    std::vector<std::pair<std::string, std::vector<double>>> axes(models::Variant variant) const;
    std::size_t cell_count(models::Variant variant) const;
    void validate(models::Variant variant) const;
};

struct SweepCell {
    std::vector<std::pair<std::string, double>> values;
    std::string name;  // e.g. tau80_eta-2
};

std::vector<SweepCell> sweep_cells(const SweepGrid& grid, models::Variant variant);

/// Base config with a cell's axis values written in.
TrainingConfig apply_cell(const TrainingConfig& base, const SweepCell& cell);

struct CheckpointScore {
    std::size_t iteration = 0;
    evaluation::EvaluationReport report;
};

struct SweepRun {
    std::size_t cell = 0;
    std::size_t seed_index = 0;
    std::uint64_t seed = 0;
    std::filesystem::path run_dir;
    bool failed = false;
    std::string failure;
    std::vector<CheckpointScore> checkpoints;
    std::optional<std::size_t> best;  // index into checkpoints

    /// Best checkpoint score; +inf for a failed or unscored run.
    double score() const;
};

struct SweepResult {
    models::Variant variant = models::Variant::dpdsr;
    std::vector<SweepCell> cells;
    std::vector<SweepRun> runs;
    std::vector<double> cell_scores;  // mean run score per cell
    std::size_t selected_cell = 0;
    std::size_t selected_run = 0;  // index into runs

    nlohmann::json selection_json() const;
};

struct SweepOptions {
    std::size_t workers = 1;
    evaluation::EvaluationOptions evaluation;
    std::function<void(const SweepRun&)> on_run_done;
};

/// Trains every cell x seed under out_dir/runs/<cell>_seed<k>, scores every
/// checkpoint on the test split, selects the cell with the lowest mean score
/// and, within it, the run and checkpoint with the lowest score. Writes
/// sweep_results.csv and selection.json. Throws if every run failed.
SweepResult sweep(const SweepGrid& grid, const TrainingConfig& base, const dynsys::DatasetPair& data,
                  const std::filesystem::path& out_dir, const SweepOptions& options = {});

/// One row per (run, checkpoint); a failed run has a single row with score inf.
std::string sweep_csv(const SweepResult& result);

}  // namespace dpdsr::training
