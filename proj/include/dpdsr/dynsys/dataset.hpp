#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpdsr/dynsys/rng.hpp"
#include "dpdsr/dynsys/systems.hpp"
#include "json.hpp"

namespace dpdsr::dynsys {

enum class Split { train, test, full };
std::string to_string(Split split);
Split parse_split(std::string_view text);

/// Per-channel statistics of the raw series, recorded before normalizing.
struct Normalization {
    std::vector<double> mean;
    std::vector<double> std;
};

/// Time-major observations: observations[t*channels + c].
struct TimeSeriesDataset {
    std::string name;
    double dt = 1.0;
    std::size_t length = 0;
    std::size_t channels = 1;
    std::vector<double> observations;
    Split split = Split::full;
    Normalization normalization;
    std::uint64_t seed = 0;
    nlohmann::json generator_params = nlohmann::json::object();

    double at(std::size_t t, std::size_t c = 0) const { return observations[t * channels + c]; }
    std::vector<double> channel(std::size_t c = 0) const;
};

struct DatasetPair {
    TimeSeriesDataset train;
    TimeSeriesDataset test;
};

/// Standardize each channel in place with population statistics. A channel
/// whose spread is zero (or lost in rounding) is rejected.
Normalization normalize_in_place(std::vector<double>& data, std::size_t channels, std::string_view name);

/// Normalize the whole series, then cut it into equal train/test halves.
DatasetPair normalize_and_split(std::string name, double dt, std::vector<double> data, std::size_t channels,
                                std::uint64_t seed, nlohmann::json params);

struct GenerateOptions {
    /// Shortens the simulated duration; dynamics parameters are untouched.
    double scale = 1.0;
    ConnectivityScaling rnn_scaling = ConnectivityScaling::g_squared_over_n;
};

const std::vector<std::string>& synthetic_dataset_names();

/// lorenz | cell | doublewell | rnn
DatasetPair generate_dataset(std::string_view name, std::uint64_t seed, const GenerateOptions& options = {});

enum class ExternalKind { neuron, ecg };
ExternalKind parse_external_kind(std::string_view text);

/// neuron: 5 kHz voltage trace, edges trimmed and smoothed (dt in ms).
/// ecg: train and test recordings concatenated, decimated by 4 (dt in s).
DatasetPair preprocess_external(std::span<const double> raw, ExternalKind kind);

/// Gaussian filter truncated at +-truncate*sigma with half-sample
/// symmetric reflection at the edges.
std::vector<double> gaussian_smooth(std::span<const double> x, double sigma, double truncate = 4.0);

/// Random windows, data[(b*length + t)*channels + c].
struct Batch {
    std::size_t count = 0;
    std::size_t length = 0;
    std::size_t channels = 0;
    std::vector<double> data;
    std::vector<std::size_t> starts;
};

Batch chunk(const TimeSeriesDataset& dataset, std::size_t length, std::size_t count, Rng& rng);
Batch chunk(const TimeSeriesDataset& dataset, std::size_t length, std::size_t count, std::uint64_t seed);

/// <stem>.bin (little-endian f64, time-major) and <stem>.json sidecar.
void write_dataset(const TimeSeriesDataset& dataset, const std::filesystem::path& stem);
TimeSeriesDataset read_dataset(const std::filesystem::path& stem);
void write_dataset_csv(const TimeSeriesDataset& dataset, const std::filesystem::path& path);

/// Writes <dir>/<name>_train.* and <dir>/<name>_test.*, returning the stems.
std::pair<std::filesystem::path, std::filesystem::path> write_dataset_pair(const DatasetPair& pair,
                                                                           const std::filesystem::path& dir);

/// Raw samples from a whitespace/comma separated text file or a .bin payload.
std::vector<double> read_samples(const std::filesystem::path& path);

}  // namespace dpdsr::dynsys
