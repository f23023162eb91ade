#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace dpdsr::evaluation {

/// Earth mover's distance between two empirical 1-D distributions,
/// integral of |F_u - F_v|. Empty input is rejected.
double wasserstein_1d(std::span<const double> u, std::span<const double> v);

struct SpectralOptions {
    std::size_t segment = 4096;
    double smoothing_sigma = 2.0;  // in frequency bins
};

/// One-sided Welch periodogram: Hann window, 50% overlap, per-segment mean
/// removed. Unnormalized.
std::vector<double> welch_psd(std::span<const double> x, std::size_t segment);

/// (1/sqrt 2) * || sqrt(u) - sqrt(v) ||_2 for two distributions.
double hellinger(std::span<const double> u, std::span<const double> v);

struct SpectralResult {
    double distance = 0.0;
    std::size_t segment = 0;
    bool shortened = false;  // a series was shorter than the requested segment
};

/// Hellinger distance of the smoothed, normalized power spectra.
SpectralResult spectral_distance(std::span<const double> a, std::span<const double> b,
                                 const SpectralOptions& options = {});

/// Topographic prominence of each index in `peaks`.
std::vector<double> peak_prominences(std::span<const double> x, std::span<const std::size_t> peaks);

/// Strict interior local maxima with x >= height and prominence >= prominence.
std::vector<std::size_t> find_peaks(std::span<const double> x, double height = 2.0, double prominence = 1.0);

/// Inter-spike intervals from successive peaks.
std::vector<double> inter_spike_intervals(std::span<const double> x, double height = 2.0, double prominence = 1.0);

/// Wasserstein distance between ISI distributions; empty when either series
/// has fewer than two peaks.
std::optional<double> isi_distance(std::span<const double> a, std::span<const double> b, double height = 2.0,
                                   double prominence = 1.0);

struct Bimodality {
    bool bimodal = false;
    std::size_t low_mode = 0, high_mode = 0;  // bin indices
    double trough_ratio = 1.0;                // deepest trough / smaller mode
};

/// Equal-width histogram over [min, max]. Bimodal when two bins, each holding
/// at least `min_mass` of the samples, are separated by a trough below
/// `max_trough` times the smaller of the two; the reported pair maximizes that
/// smaller count. The mass floor keeps sparse tail bins from posing as modes.
Bimodality bimodality(std::span<const double> x, std::size_t bins = 40, double max_trough = 0.6,
                      double min_mass = 0.01);

struct Measures {
    double D_d = 0.0;
    double D_s = 0.0;
    double PE = 0.0;
    std::optional<double> D_isi;
};

/// Weights on (D_d, D_s, PE_20, D_ISI).
using ScoreWeights = std::array<double, 4>;

/// Weights of a named benchmark: lorenz, cell, doublewell, rnn, neuron, ecg.
ScoreWeights score_weights(std::string_view dataset);

/// Weighted sum; a missing D_ISI is allowed only under a zero weight.
double score(const Measures& measures, const ScoreWeights& weights);

}  // namespace dpdsr::evaluation
