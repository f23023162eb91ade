#include "dpdsr/evaluation/metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "dpdsr/dynsys/dataset.hpp"

namespace dpdsr::evaluation {

double wasserstein_1d(std::span<const double> u, std::span<const double> v) {
    if (u.empty() || v.empty()) throw std::invalid_argument("wasserstein_1d: empty sample set");
    std::vector<double> a(u.begin(), u.end()), b(v.begin(), v.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());

    // Sweep the merged support; between consecutive points both CDFs are flat.
    std::size_t i = 0, j = 0;
    double x = std::min(a[0], b[0]);
    double total = 0.0;
    while (i < a.size() || j < b.size()) {
        const double next = j == b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
        total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - x);
        x = next;
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
    }
    return total;
}

namespace {

// FFTW planning is not thread-safe; execution on private buffers is.
std::mutex g_fftw_planner;

struct RealFft {
    explicit RealFft(std::size_t n) : n(n) {
        in = fftw_alloc_real(n);
        out = fftw_alloc_complex(n / 2 + 1);
        std::lock_guard lock(g_fftw_planner);
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    }
    ~RealFft() {
        {
            std::lock_guard lock(g_fftw_planner);
            fftw_destroy_plan(plan);
        }
        fftw_free(in);
        fftw_free(out);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    std::size_t n;
    double* in;
    fftw_complex* out;
    fftw_plan plan;
};

}  // namespace

std::vector<double> welch_psd(std::span<const double> x, std::size_t segment) {
    if (segment < 2 || segment > x.size()) {
        throw std::invalid_argument("welch_psd: segment length " + std::to_string(segment) + " does not fit a series of " +
                                    std::to_string(x.size()) + " samples");
    }
    const std::size_t step = std::max<std::size_t>(1, segment / 2);
    const std::size_t bins = segment / 2 + 1;
    std::vector<double> window(segment);
    for (std::size_t k = 0; k < segment; ++k) {
        window[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(segment));
    }

    RealFft fft(segment);
    std::vector<double> psd(bins, 0.0);
    std::size_t count = 0;
    for (std::size_t start = 0; start + segment <= x.size(); start += step, ++count) {
        double mean = 0.0;
        for (std::size_t k = 0; k < segment; ++k) mean += x[start + k];
        mean /= static_cast<double>(segment);
        for (std::size_t k = 0; k < segment; ++k) fft.in[k] = (x[start + k] - mean) * window[k];
        fftw_execute(fft.plan);
        for (std::size_t f = 0; f < bins; ++f) psd[f] += fft.out[f][0] * fft.out[f][0] + fft.out[f][1] * fft.out[f][1];
    }
    // one-sided: fold negative frequencies, except DC and (even length) Nyquist
    const std::size_t last = segment % 2 == 0 ? bins - 1 : bins;
    for (std::size_t f = 1; f < last; ++f) psd[f] *= 2.0;
    for (auto& p : psd) p /= static_cast<double>(count);
    return psd;
}

double hellinger(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw std::invalid_argument("hellinger: distributions have different supports");
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = std::sqrt(std::max(u[i], 0.0)) - std::sqrt(std::max(v[i], 0.0));
        s += d * d;
    }
    return std::min(1.0, std::sqrt(0.5 * s));
}

SpectralResult spectral_distance(std::span<const double> a, std::span<const double> b, const SpectralOptions& options) {
    const std::size_t shortest = std::min(a.size(), b.size());
    if (shortest < 2) throw std::invalid_argument("spectral_distance: series need at least two samples");
    SpectralResult out;
    out.segment = options.segment;
    if (shortest < options.segment) {
        out.segment = std::size_t{1} << static_cast<unsigned>(std::floor(std::log2(static_cast<double>(shortest))));
        out.shortened = true;
    }
    auto spectrum = [&](std::span<const double> x) {
        auto p = dynsys::gaussian_smooth(welch_psd(x, out.segment), options.smoothing_sigma);
        double total = 0.0;
        for (double q : p) total += q;
        if (total > 0.0)
            for (auto& q : p) q /= total;
        return std::make_pair(p, total > 0.0);
    };
    const auto [pa, a_has_power] = spectrum(a);
    const auto [pb, b_has_power] = spectrum(b);
    // A constant series has no spectrum to compare: identical if both are
    // flat, maximally different otherwise.
    if (!a_has_power || !b_has_power) {
        out.distance = a_has_power == b_has_power ? 0.0 : 1.0;
        return out;
    }
    out.distance = hellinger(pa, pb);
    return out;
}

std::vector<double> peak_prominences(std::span<const double> x, std::span<const std::size_t> peaks) {
    std::vector<double> out;
    out.reserve(peaks.size());
    for (std::size_t p : peaks) {
        if (p >= x.size()) throw std::out_of_range("peak_prominences: peak index outside the series");
        const double h = x[p];
        double left = h;
        for (std::size_t j = p + 1; j-- > 0 && x[j] <= h;) left = std::min(left, x[j]);
        double right = h;
        for (std::size_t j = p; j < x.size() && x[j] <= h; ++j) right = std::min(right, x[j]);
        out.push_back(h - std::max(left, right));
    }
    return out;
}

std::vector<std::size_t> find_peaks(std::span<const double> x, double height, double prominence) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
        if (x[i] > x[i - 1] && x[i] > x[i + 1] && x[i] >= height) candidates.push_back(i);
    }
    const auto prom = peak_prominences(x, candidates);
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        if (prom[k] >= prominence) out.push_back(candidates[k]);
    }
    return out;
}

std::vector<double> inter_spike_intervals(std::span<const double> x, double height, double prominence) {
    const auto peaks = find_peaks(x, height, prominence);
    std::vector<double> out;
    for (std::size_t k = 1; k < peaks.size(); ++k) out.push_back(static_cast<double>(peaks[k] - peaks[k - 1]));
    return out;
}

std::optional<double> isi_distance(std::span<const double> a, std::span<const double> b, double height,
                                   double prominence) {
    const auto ia = inter_spike_intervals(a, height, prominence);
    const auto ib = inter_spike_intervals(b, height, prominence);
    if (ia.empty() || ib.empty()) return std::nullopt;
    return wasserstein_1d(ia, ib);
}

Bimodality bimodality(std::span<const double> x, std::size_t bins, double max_trough, double min_mass) {
    if (x.empty() || bins < 3) throw std::invalid_argument("bimodality: need data and at least three bins");
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    std::vector<double> count(bins, 0.0);
    const double width = (*hi - *lo) / static_cast<double>(bins);
    for (double v : x) {
        const auto b = width > 0.0 ? static_cast<std::size_t>((v - *lo) / width) : 0;
        count[std::min(b, bins - 1)] += 1.0;
    }
    Bimodality out;
    double best = 0.0;
    const double floor = std::max(1.0, min_mass * static_cast<double>(x.size()));
    for (std::size_t i = 0; i < bins; ++i) {
        double trough = count[i];  // minimum strictly between i and j
        for (std::size_t j = i + 2; j < bins; ++j) {
            trough = j == i + 2 ? count[i + 1] : std::min(trough, count[j - 1]);
            const double smaller = std::min(count[i], count[j]);
            if (smaller >= floor && trough < max_trough * smaller && smaller > best) {
                best = smaller;
                out = {true, i, j, trough / smaller};
            }
        }
    }
    return out;
}

ScoreWeights score_weights(std::string_view dataset) {
    if (dataset == "lorenz" || dataset == "cell") return {1.0, 1.0, 1.0, 0.0};
    if (dataset == "doublewell" || dataset == "rnn" || dataset == "neuron") return {1.0, 1.0, 0.2, 0.0};
    if (dataset == "ecg") return {1.0, 1.0, 1.0, 0.05};
    throw std::invalid_argument("score_weights: no weights for dataset '" + std::string(dataset) + "'");
}

double score(const Measures& m, const ScoreWeights& w) {
    if (!m.D_isi && w[3] != 0.0) {
        throw std::invalid_argument("score: D_ISI is missing but carries weight " + std::to_string(w[3]));
    }
    double s = w[0] * m.D_d + w[1] * m.D_s + w[2] * m.PE;
    if (w[3] != 0.0) s += w[3] * *m.D_isi;
    return s;
}

}  // namespace dpdsr::evaluation
