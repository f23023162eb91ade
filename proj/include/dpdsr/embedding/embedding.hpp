#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dpdsr::embedding {

struct EmbeddingSpec {
    std::size_t delay = 1;
    std::size_t dimension = 1;
};

/// Equiprobable-bin mutual information (nats) between two equally long
/// samples. Each marginal is binned by rank, so every bin holds N/bins
/// points up to rounding; tied values always share a bin.
double mutual_information(std::span<const double> a, std::span<const double> b, std::size_t bins);

/// ceil(sqrt(T/5))
std::size_t default_bin_count(std::size_t length);

struct MiDelay {
    std::size_t lag = 1;
    /// No minimum found before max_lag.
    bool flagged = false;
    /// The lag was accepted because MI reached the independence noise floor.
    bool at_noise_floor = false;
    /// mi[k] is the estimate at lag k (mi[0] is the self-information).
    std::vector<double> mi;
    double noise_floor = 0.0;
};

/// First minimum of the self mutual information over lags 1..max_lag.
/// Every lag uses the same T-max_lag pairs so estimates are comparable.
/// A lag is accepted when it is a strict local minimum or when its MI is
/// indistinguishable from that of independent samples.
MiDelay mi_delay(std::span<const double> series, std::size_t max_lag = 100);

/// Rows (x_t, x_{t+delay}, ..., x_{t+(d-1)delay}), row-major.
struct DelayEmbedding {
    std::size_t rows = 0;
    std::size_t dimension = 0;
    std::vector<double> data;

    double at(std::size_t row, std::size_t col) const { return data[row * dimension + col]; }
};

DelayEmbedding delay_embed(std::span<const double> series, const EmbeddingSpec& spec);

}  // namespace dpdsr::embedding
