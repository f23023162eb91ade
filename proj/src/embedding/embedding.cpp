#include "dpdsr/embedding/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dpdsr::embedding {

namespace {

std::vector<std::size_t> rank_bins(std::span<const double> x, std::size_t bins) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    // Values equal up to rounding share the bin of their lowest rank, so a
    // signal with few distinct levels is not split arbitrarily.
    const double tie = 1e-9 * (x[order[n - 1]] - x[order[0]]);
    std::vector<std::size_t> bin(n);
    std::size_t first = 0;
    for (std::size_t r = 0; r < n; ++r) {
        if (r > 0 && x[order[r]] - x[order[r - 1]] > tie) first = r;
        bin[order[r]] = first * bins / n;
    }
    return bin;
}

}  // namespace

std::size_t default_bin_count(std::size_t length) {
    return std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(length) / 5.0))));
}

double mutual_information(std::span<const double> a, std::span<const double> b, std::size_t bins) {
    if (a.size() != b.size()) throw std::invalid_argument("mutual_information: samples differ in length");
    if (a.empty() || bins == 0) throw std::invalid_argument("mutual_information: empty sample or zero bins");
    const std::size_t n = a.size();
    const auto ba = rank_bins(a, bins);
    const auto bb = rank_bins(b, bins);
    std::vector<std::size_t> joint(bins * bins, 0), ma(bins, 0), mb(bins, 0);
    for (std::size_t i = 0; i < n; ++i) {
        ++joint[ba[i] * bins + bb[i]];
        ++ma[ba[i]];
        ++mb[bb[i]];
    }
    const double N = static_cast<double>(n);
    double mi = 0.0;
    for (std::size_t i = 0; i < bins; ++i) {
        for (std::size_t j = 0; j < bins; ++j) {
            const std::size_t c = joint[i * bins + j];
            if (c == 0) continue;
            const double p = static_cast<double>(c) / N;
            mi += p * std::log(static_cast<double>(c) * N / (static_cast<double>(ma[i]) * static_cast<double>(mb[j])));
        }
    }
    return mi;
}

MiDelay mi_delay(std::span<const double> series, std::size_t max_lag) {
    if (max_lag < 1) throw std::invalid_argument("mi_delay: max_lag must be at least 1");
    if (series.size() < 2 * max_lag) {
        throw std::invalid_argument("mi_delay: series of length " + std::to_string(series.size()) +
                                    " is shorter than 2*max_lag=" + std::to_string(2 * max_lag));
    }
    const std::size_t pairs = series.size() - max_lag;
    const std::size_t bins = default_bin_count(series.size());
    MiDelay out;
    out.mi.resize(max_lag + 1);
    for (std::size_t lag = 0; lag <= max_lag; ++lag) {
        out.mi[lag] = mutual_information(series.subspan(0, pairs), series.subspan(lag, pairs), bins);
    }
    // Plug-in MI of independent samples is ~chi2((B-1)^2)/(2N); allow four
    // standard deviations above its mean.
    const double k = static_cast<double>(bins - 1);
    out.noise_floor = (k * k + 4.0 * std::sqrt(2.0) * k) / (2.0 * static_cast<double>(pairs));
    for (std::size_t lag = 1; lag < max_lag; ++lag) {
        if (out.mi[lag] <= out.noise_floor) {
            out.lag = lag;
            out.at_noise_floor = true;
            return out;
        }
        if (out.mi[lag - 1] > out.mi[lag] && out.mi[lag] < out.mi[lag + 1]) {
            out.lag = lag;
            return out;
        }
    }
    out.lag = max_lag;
    out.flagged = true;
    return out;
}

DelayEmbedding delay_embed(std::span<const double> series, const EmbeddingSpec& spec) {
    if (spec.delay < 1 || spec.dimension < 1) throw std::invalid_argument("delay_embed: delay and dimension must be >= 1");
    const std::size_t span = (spec.dimension - 1) * spec.delay;
    if (series.size() <= span) {
        throw std::invalid_argument("delay_embed: series of length " + std::to_string(series.size()) +
                                    " too short for one row");
    }
    DelayEmbedding out;
    out.rows = series.size() - span;
    out.dimension = spec.dimension;
    out.data.resize(out.rows * out.dimension);
    for (std::size_t t = 0; t < out.rows; ++t) {
        for (std::size_t j = 0; j < spec.dimension; ++j) out.data[t * spec.dimension + j] = series[t + j * spec.delay];
    }
    return out;
}

}  // namespace dpdsr::embedding
