#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "dpdsr/training/loss.hpp"

namespace dpdsr::training {

struct TrainingConfig {
    models::ModelConfig model;
    LossConfig loss;
    std::size_t chunk_length = 300;
    std::size_t batch_size = 16;
    std::size_t iterations = 30000;       // before the scale factor
    std::size_t checkpoint_every = 5000;  // before the scale factor
    double scale = 1.0;                   // desk-scale factor
    double learning_rate = 1e-3;
    double lr_decay = 0.3;  // applied at 1/3 and 2/3 of the run
    double clip_norm = 100.0;
    std::uint64_t seed = 0;

    std::size_t total_iterations() const;
    std::size_t checkpoint_interval() const;
    /// Learning rate in effect at 0-based iteration i.
    double learning_rate_at(std::size_t i) const;
    /// 1-based iterations at which a checkpoint is written.
    std::vector<std::size_t> checkpoint_iterations() const;
    void validate() const;

    nlohmann::json to_json() const;
    static TrainingConfig from_json(const nlohmann::json& j);
};

struct TraceRow {
    std::size_t iteration = 0;  // 1-based
    std::vector<std::pair<std::string, double>> components;
    double grad_norm = 0.0;
    double learning_rate = 0.0;
    double causal_loss = 0.0;
};

struct TrainResult {
    bool failed = false;
    std::string failure;
    std::size_t iterations_done = 0;
    std::vector<std::filesystem::path> checkpoints;
    std::vector<TraceRow> trace;
    double final_loss = 0.0;
};

using ProgressFn = std::function<void(const TraceRow&)>;

/// Runs the optimization and writes into run_dir: config.json,
/// checkpoints/ckpt_<iter>/, loss_trace.csv, and failure.json if the run is
/// abandoned after two consecutive non-finite losses.
TrainResult train(const TrainingConfig& config, const dynsys::TimeSeriesDataset& data,
                  const std::filesystem::path& run_dir, const ProgressFn& progress = {});

/// Loss trace as CSV text (iter, total, components..., grad_norm, lr, causal_loss).
std::string trace_csv(const std::vector<TraceRow>& trace);

std::filesystem::path checkpoint_dir(const std::filesystem::path& run_dir, std::size_t iteration);

}  // namespace dpdsr::training
