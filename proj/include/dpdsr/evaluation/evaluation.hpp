#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpdsr/dynsys/dataset.hpp"
#include "dpdsr/evaluation/metrics.hpp"
#include "dpdsr/models/model.hpp"

namespace dpdsr::evaluation {

struct PredictionOptions {
    std::size_t horizon = 20;
    std::size_t warmup = 256;
    std::size_t noise_draws = 20;
    std::size_t chunks = 2000;
    std::size_t batch = 250;  // chunks pushed through the encoder at once
    std::uint64_t seed = 0;
};

/// Mean over chunks and noise draws of (1/n) sum_i ||x_{k+i} - x~_{k+i}||,
/// starting from the causal state estimate after k observations.
double prediction_error(const models::Model& model, const dynsys::TimeSeriesDataset& data,
                        const PredictionOptions& options = {});

struct KlUsageOptions {
    std::size_t chunks = 64;
    std::size_t length = 300;
    std::size_t trim = 50;
    std::size_t mc_samples = 4;
    std::uint64_t seed = 0;
};

/// Average KL between the noise posterior and the prior over sampled chunks.
/// Exactly 0 for models without a noise posterior (SPDSR, AR-LSTM); the DKF
/// reports its transition KL.
double kl_usage(const models::Model& model, const dynsys::TimeSeriesDataset& data, const KlUsageOptions& options = {});

/// Free-running observations (time-major, length x d_x) started from a
/// random point of the embedded training trajectory. Noise is drawn from the
/// prior for stochastic models.
std::vector<double> generate_long(const models::Model& model, const dynsys::TimeSeriesDataset& train,
                                  std::size_t length = 40000, std::uint64_t seed = 0,
                                  std::size_t embed_window = 1000);

struct EvaluationOptions {
    std::size_t generation_length = 40000;
    PredictionOptions prediction;
    SpectralOptions spectral;
    KlUsageOptions kl;
    double peak_height = 2.0;
    double peak_prominence = 1.0;
    std::optional<ScoreWeights> weights;  // default: by dataset name
    std::uint64_t seed = 0;
};

struct EvaluationReport {
    std::string dataset;
    std::string model;
    std::optional<std::size_t> checkpoint;
    std::size_t generation_length = 0;
    double D_d = 0.0;
    double D_s = 0.0;
    double PE = 0.0;
    std::optional<double> D_isi;
    double KL_eps = 0.0;
    double score = 0.0;
    ScoreWeights weights{};
    bool spectral_shortened = false;
    bool diverged = false;  // generation left the finite range; score is +inf

    Measures measures() const { return {D_d, D_s, PE, D_isi}; }
    nlohmann::json to_json() const;
    static EvaluationReport from_json(const nlohmann::json& j);
};

/// Generates from the model and compares with held-out data. Channel-wise
/// distances are averaged over channels; D_ISI uses the first channel.
EvaluationReport evaluate(const models::Model& model, const dynsys::TimeSeriesDataset& train,
                          const dynsys::TimeSeriesDataset& test, const std::string& model_id,
                          const EvaluationOptions& options = {}, std::vector<double>* generated = nullptr);

std::string report_csv_header();
std::string report_csv_row(const EvaluationReport& report);
std::string reports_csv(const std::vector<EvaluationReport>& reports);

}  // namespace dpdsr::evaluation
