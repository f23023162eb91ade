#include "dpdsr/dynsys/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dpdsr/io/binary.hpp"

namespace dpdsr::dynsys {

std::string to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::test: return "test";
        case Split::full: return "full";
    }
    return "full";
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::train;
    if (text == "test") return Split::test;
    if (text == "full") return Split::full;
    throw std::invalid_argument("unknown split '" + std::string(text) + "'");
}

std::vector<double> TimeSeriesDataset::channel(std::size_t c) const {
    std::vector<double> out(length);
    for (std::size_t t = 0; t < length; ++t) out[t] = observations[t * channels + c];
    return out;
}

Normalization normalize_in_place(std::vector<double>& data, std::size_t channels, std::string_view name) {
    if (channels == 0 || data.empty() || data.size() % channels != 0) {
        throw std::invalid_argument(std::string(name) + ": malformed series for normalization");
    }
    const std::size_t T = data.size() / channels;
    Normalization norm;
    norm.mean.assign(channels, 0.0);
    norm.std.assign(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        double mean = 0.0;
        for (std::size_t t = 0; t < T; ++t) mean += data[t * channels + c];
        mean /= static_cast<double>(T);
        double var = 0.0, scale = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            const double d = data[t * channels + c] - mean;
            var += d * d;
            scale = std::max(scale, std::fabs(data[t * channels + c]));
        }
        const double sd = std::sqrt(var / static_cast<double>(T));
        if (!(sd > 1e-9 * scale) || !std::isfinite(sd)) {
            std::ostringstream msg;
            msg << name << ": channel " << c << " has zero variance (std=" << sd << ", mean=" << mean
                << "); cannot normalize";
            throw std::invalid_argument(msg.str());
        }
        norm.mean[c] = mean;
        norm.std[c] = sd;
        for (std::size_t t = 0; t < T; ++t) data[t * channels + c] = (data[t * channels + c] - mean) / sd;
    }
    return norm;
}

DatasetPair normalize_and_split(std::string name, double dt, std::vector<double> data, std::size_t channels,
                                std::uint64_t seed, nlohmann::json params) {
    std::size_t T = data.size() / channels;
    if (T % 2 == 1) {
        --T;
        data.resize(T * channels);
    }
    if (T < 2) throw std::invalid_argument(name + ": series too short to split");
    const Normalization norm = normalize_in_place(data, channels, name);
    const std::size_t half = T / 2;
    DatasetPair pair;
    for (Split split : {Split::train, Split::test}) {
        TimeSeriesDataset& ds = split == Split::train ? pair.train : pair.test;
        ds.name = name;
        ds.dt = dt;
        ds.length = half;
        ds.channels = channels;
        ds.split = split;
        ds.normalization = norm;
        ds.seed = seed;
        ds.generator_params = params;
        const std::size_t offset = split == Split::train ? 0 : half * channels;
        ds.observations.assign(data.begin() + static_cast<std::ptrdiff_t>(offset),
                               data.begin() + static_cast<std::ptrdiff_t>(offset + half * channels));
    }
    return pair;
}

const std::vector<std::string>& synthetic_dataset_names() {
    static const std::vector<std::string> names{"lorenz", "cell", "doublewell", "rnn"};
    return names;
}

namespace {

constexpr double kWarmupFraction = 0.05;

struct Schedule {
    std::size_t samples;  // kept after warmup, even
    std::size_t warmup;   // discarded samples
};

Schedule schedule(double duration, double sample_dt, double scale, const std::string& name) {
    if (!(scale > 0.0)) throw std::invalid_argument(name + ": scale must be positive");
    auto n = static_cast<std::size_t>(std::llround(duration * scale / sample_dt));
    n -= n % 2;
    if (n < 4) throw std::invalid_argument(name + ": scale too small, fewer than 4 samples");
    return {n, static_cast<std::size_t>(std::llround(kWarmupFraction * static_cast<double>(n)))};
}

std::vector<double> sample_ode(const OdeSpec& spec, std::span<const double> y0, double sample_dt,
                               const Schedule& s, const Rk45Options& options,
                               const std::function<double(std::span<const double>)>& observe) {
    std::vector<double> out;
    out.reserve(s.samples);
    std::size_t k = 0;
    const double t_end = static_cast<double>(s.warmup + s.samples - 1) * sample_dt;
    integrate_rk45(
        spec, y0, 0.0, t_end, sample_dt,
        [&](double, std::span<const double> y) {
            if (k++ >= s.warmup && out.size() < s.samples) out.push_back(observe(y));
        },
        options);
    return out;
}

nlohmann::json base_params(const nlohmann::json& system, double scale, std::size_t warmup) {
    nlohmann::json p = system;
    p["scale"] = scale;
    p["warmup_samples"] = warmup;
    return p;
}

}  // namespace

DatasetPair generate_dataset(std::string_view name, std::uint64_t seed, const GenerateOptions& options) {
    const std::string id(name);
    if (id == "lorenz") {
        const double dt = 0.05;
        const Schedule s = schedule(10000.0, dt, options.scale, id);
        const OdeSpec spec = lorenz();
        const std::vector<double> y0{1.0, 1.0, 1.0};
        auto x = sample_ode(spec, y0, dt, s, {}, [](std::span<const double> y) { return y[0]; });
        auto params = base_params(spec.params, options.scale, s.warmup);
        params["initial_state"] = y0;
        params["observed"] = "x";
        return normalize_and_split(id, dt, std::move(x), 1, seed, params);
    }
    if (id == "cell") {
        const double dt = 5.0;
        const Schedule s = schedule(800000.0, dt, options.scale, id);
        const OdeSpec spec = cell_cycle();
        // The two oscillators are identical, so a symmetric start never leaves
        // the synchronized manifold (where the flow settles on a fixed point).
        const std::vector<double> y0{0.5, 0.5, 0.5, 0.501, 0.5, 0.5};
        Rk45Options opt;
        opt.max_step = 0.04;
        auto x = sample_ode(spec, y0, dt, s, opt, [](std::span<const double> y) { return y[0]; });
        auto params = base_params(spec.params, options.scale, s.warmup);
        params["initial_state"] = y0;
        params["max_step"] = opt.max_step;
        params["observed"] = "C1";
        return normalize_and_split(id, dt, std::move(x), 1, seed, params);
    }
    if (id == "doublewell") {
        const double step = 0.2;
        const std::size_t downsample = 10;
        const double dt = step * static_cast<double>(downsample);
        const Schedule s = schedule(400000.0, dt, options.scale, id);
        const SdeSpec spec = double_well();
        const std::vector<double> z0(spec.dimension, 1.0);
        Rng rng = make_rng(seed, "doublewell-noise");
        std::vector<double> x;
        x.reserve(s.samples);
        std::size_t k = 0;
        const double t_end = static_cast<double>(s.warmup + s.samples - 1) * dt;
        integrate_euler_maruyama(
            spec, z0, step, t_end, rng,
            [&](double, std::span<const double> z) {
                if (k++ >= s.warmup && x.size() < s.samples) x.push_back(z.back());
            },
            downsample);
        auto params = base_params(spec.params, options.scale, s.warmup);
        params["step"] = step;
        params["downsample"] = downsample;
        params["initial_state"] = z0;
        params["observed"] = "z5";
        return normalize_and_split(id, dt, std::move(x), 1, seed, params);
    }
    if (id == "rnn") {
        const double dt = 0.5;
        const Schedule s = schedule(100000.0, dt, options.scale, id);
        ChaoticRnnParams p;
        p.scaling = options.rnn_scaling;
        const ChaoticRnn rnn = chaotic_rnn(p, seed);
        Rng rng = make_rng(seed, "rnn-initial");
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<double> h0(p.n);
        for (auto& v : h0) v = normal(rng);
        auto x = sample_ode(rnn.spec, h0, dt, s, {}, [](std::span<const double> h) { return std::tanh(h[0]); });
        auto params = base_params(rnn.spec.params, options.scale, s.warmup);
        params["observed"] = "tanh(h1)";
        return normalize_and_split(id, dt, std::move(x), 1, seed, params);
    }
    throw std::invalid_argument("unknown dataset '" + id + "' (expected lorenz, cell, doublewell or rnn)");
}

ExternalKind parse_external_kind(std::string_view text) {
    if (text == "neuron") return ExternalKind::neuron;
    if (text == "ecg") return ExternalKind::ecg;
    throw std::invalid_argument("unknown external kind '" + std::string(text) + "' (expected neuron or ecg)");
}

DatasetPair preprocess_external(std::span<const double> raw, ExternalKind kind) {
    if (kind == ExternalKind::neuron) {
        constexpr std::size_t head = 600, tail = 1200;
        constexpr double sample_ms = 0.2;  // 5 kHz
        constexpr double sigma_ms = 0.2;
        if (raw.size() <= head + tail + 1) {
            throw std::invalid_argument("neuron: input of " + std::to_string(raw.size()) +
                                        " samples is shorter than the discard window");
        }
        auto trimmed = raw.subspan(head, raw.size() - head - tail);
        auto smooth = gaussian_smooth(trimmed, sigma_ms / sample_ms);
        nlohmann::json params{{"discard_head", head},
                              {"discard_tail", tail},
                              {"sampling_rate_hz", 5000},
                              {"smoothing_sigma_ms", sigma_ms}};
        return normalize_and_split("neuron", sample_ms, std::move(smooth), 1, 0, params);
    }
    constexpr std::size_t factor = 4;
    if (raw.size() < 2 * factor) throw std::invalid_argument("ecg: input too short to downsample");
    std::vector<double> x;
    x.reserve(raw.size() / factor + 1);
    for (std::size_t i = 0; i < raw.size(); i += factor) x.push_back(raw[i]);
    nlohmann::json params{{"downsample", factor}, {"sampling_rate_hz", 175}};
    return normalize_and_split("ecg", 1.0 / 175.0, std::move(x), 1, 0, params);
}

std::vector<double> gaussian_smooth(std::span<const double> x, double sigma, double truncate) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_smooth: sigma must be positive");
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    if (n == 0) return {};
    const auto radius = static_cast<std::ptrdiff_t>(truncate * sigma + 0.5);
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (std::ptrdiff_t j = -radius; j <= radius; ++j) {
        const double w = std::exp(-0.5 * static_cast<double>(j * j) / (sigma * sigma));
        kernel[static_cast<std::size_t>(j + radius)] = w;
        total += w;
    }
    for (auto& w : kernel) w /= total;

    auto reflect = [n](std::ptrdiff_t i) {
        const std::ptrdiff_t period = 2 * n;
        std::ptrdiff_t m = ((i % period) + period) % period;
        return m < n ? m : period - 1 - m;
    };
    std::vector<double> out(x.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::ptrdiff_t j = -radius; j <= radius; ++j) {
            acc += kernel[static_cast<std::size_t>(j + radius)] * x[static_cast<std::size_t>(reflect(i + j))];
        }
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

Batch chunk(const TimeSeriesDataset& dataset, std::size_t length, std::size_t count, Rng& rng) {
    if (length == 0 || count == 0) throw std::invalid_argument("chunk: length and count must be positive");
    if (length > dataset.length) {
        throw std::invalid_argument("chunk: window of " + std::to_string(length) + " exceeds series length " +
                                    std::to_string(dataset.length));
    }
    Batch batch;
    batch.count = count;
    batch.length = length;
    batch.channels = dataset.channels;
    batch.data.resize(count * length * dataset.channels);
    std::uniform_int_distribution<std::size_t> start_dist(0, dataset.length - length);
    for (std::size_t b = 0; b < count; ++b) {
        const std::size_t start = start_dist(rng);
        batch.starts.push_back(start);
        std::copy_n(dataset.observations.begin() + static_cast<std::ptrdiff_t>(start * dataset.channels),
                    length * dataset.channels,
                    batch.data.begin() + static_cast<std::ptrdiff_t>(b * length * dataset.channels));
    }
    return batch;
}

Batch chunk(const TimeSeriesDataset& dataset, std::size_t length, std::size_t count, std::uint64_t seed) {
    Rng rng = make_rng(seed, "chunk");
    return chunk(dataset, length, count, rng);
}

void write_dataset(const TimeSeriesDataset& dataset, const std::filesystem::path& stem) {
    if (dataset.observations.size() != dataset.length * dataset.channels) {
        throw std::invalid_argument("write_dataset: observation count does not match shape");
    }
    std::ostringstream bin;
    io::write_f64(bin, dataset.observations);
    auto bin_path = stem;
    bin_path += ".bin";
    io::atomic_write(bin_path, bin.str());

    nlohmann::json meta{{"name", dataset.name},
                        {"dt", dataset.dt},
                        {"shape", {dataset.length, dataset.channels}},
                        {"split", to_string(dataset.split)},
                        {"normalization", {{"mean", dataset.normalization.mean}, {"std", dataset.normalization.std}}},
                        {"seed", dataset.seed},
                        {"generator_params", dataset.generator_params}};
    auto json_path = stem;
    json_path += ".json";
    io::atomic_write(json_path, meta.dump(2) + "\n");
}

TimeSeriesDataset read_dataset(const std::filesystem::path& stem) {
    auto json_path = stem;
    json_path += ".json";
    auto bin_path = stem;
    bin_path += ".bin";
    const auto meta = nlohmann::json::parse(io::read_file(json_path));
    TimeSeriesDataset ds;
    ds.name = meta.at("name").get<std::string>();
    ds.dt = meta.at("dt").get<double>();
    const auto shape = meta.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw std::runtime_error(json_path.string() + ": shape must have two extents");
    ds.length = shape[0];
    ds.channels = shape[1];
    ds.split = parse_split(meta.at("split").get<std::string>());
    ds.normalization.mean = meta.at("normalization").at("mean").get<std::vector<double>>();
    ds.normalization.std = meta.at("normalization").at("std").get<std::vector<double>>();
    ds.seed = meta.value("seed", std::uint64_t{0});
    ds.generator_params = meta.value("generator_params", nlohmann::json::object());
    std::ifstream in(bin_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + bin_path.string());
    ds.observations = io::read_f64(in, ds.length * ds.channels);
    return ds;
}

void write_dataset_csv(const TimeSeriesDataset& dataset, const std::filesystem::path& path) {
    std::ostringstream out;
    out.precision(17);
    out << "t";
    for (std::size_t c = 0; c < dataset.channels; ++c) out << ",x" << c;
    out << "\n";
    for (std::size_t t = 0; t < dataset.length; ++t) {
        out << static_cast<double>(t) * dataset.dt;
        for (std::size_t c = 0; c < dataset.channels; ++c) out << "," << dataset.at(t, c);
        out << "\n";
    }
    io::atomic_write(path, out.str());
}

std::pair<std::filesystem::path, std::filesystem::path> write_dataset_pair(const DatasetPair& pair,
                                                                           const std::filesystem::path& dir) {
    const auto train = dir / (pair.train.name + "_train");
    const auto test = dir / (pair.test.name + "_test");
    write_dataset(pair.train, train);
    write_dataset(pair.test, test);
    return {train, test};
}

std::vector<double> read_samples(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    if (path.extension() == ".bin") {
        if (bytes.size() % sizeof(double) != 0) throw std::runtime_error(path.string() + ": truncated f64 payload");
        std::istringstream in(bytes);
        return io::read_f64(in, bytes.size() / sizeof(double));
    }
    std::vector<double> out;
    std::string token;
    std::size_t line_no = 1;
    auto flush = [&] {
        if (token.empty()) return;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != token.size()) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": not a number: '" + token + "'");
        }
        out.push_back(v);
        token.clear();
    };
    for (char ch : bytes) {
        if (ch == ',' || ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n' || ch == ';') {
            flush();
            if (ch == '\n') ++line_no;
        } else {
            token.push_back(ch);
        }
    }
    flush();
    return out;
}

}  // namespace dpdsr::dynsys
