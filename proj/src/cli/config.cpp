#include "dpdsr/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <sstream>

#include "dpdsr/io/binary.hpp"

namespace dpdsr::cli {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_value(std::string_view text);

template <>
std::size_t parse_value<std::size_t>(std::string_view text) {
    std::size_t v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size() || text.empty())
        throw std::invalid_argument("expected a non-negative integer, got '" + std::string(text) + "'");
    return v;
}

template <>
double parse_value<double>(std::string_view text) {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size() || text.empty())
        throw std::invalid_argument("expected a number, got '" + std::string(text) + "'");
    return v;
}

template <>
std::string parse_value<std::string>(std::string_view text) {
    return std::string(text);
}

template <>
std::filesystem::path parse_value<std::filesystem::path>(std::string_view text) {
    return std::filesystem::path(std::string(text));
}

template <>
std::vector<double> parse_value<std::vector<double>>(std::string_view text) {
    std::vector<double> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        out.push_back(parse_value<double>(trim(text.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    if (out.empty()) throw std::invalid_argument("expected a comma-separated list of numbers");
    return out;
}

std::string format_value(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}
std::string format_value(std::size_t v) { return std::to_string(v); }
std::string format_value(const std::string& v) { return v; }
std::string format_value(const std::filesystem::path& v) { return v.string(); }
std::string format_value(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_value(v[i]);
    return out;
}

struct Key {
    std::string name;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

template <class Access>
Key field(std::string name, Access access) {
    using T = std::remove_cvref_t<decltype(access(std::declval<RunConfig&>()))>;
    return {std::move(name),
            [access](const RunConfig& c) { return format_value(static_cast<const T&>(access(const_cast<RunConfig&>(c)))); },
            [access](RunConfig& c, std::string_view v) { access(c) = parse_value<T>(v); }};
}

#define DPDSR_FIELD(key, member) field(key, [](RunConfig& c) -> auto& { return c.member; })

const std::vector<Key>& keys() {
    static const std::vector<Key> table = [] {
        std::vector<Key> k{
            DPDSR_FIELD("dataset", dataset),
            DPDSR_FIELD("data_dir", data_dir),
            field("data_seed", [](RunConfig& c) -> auto& { return c.data_seed; }),
            DPDSR_FIELD("data_scale", data_scale),
            DPDSR_FIELD("rnn_scaling", rnn_scaling),
            Key{"variant", [](const RunConfig& c) { return models::to_string(c.train.model.variant); },
                [](RunConfig& c, std::string_view v) { c.train.model.variant = models::parse_variant(std::string(v)); }},
            DPDSR_FIELD("d_z", train.model.d_z),
            DPDSR_FIELD("d_zhat", train.model.d_zhat),
            DPDSR_FIELD("d_eps", train.model.d_eps),
            DPDSR_FIELD("hidden", train.model.hidden),
            DPDSR_FIELD("g_hidden", train.model.g_hidden),
            DPDSR_FIELD("noise_gain", train.model.noise_gain),
            DPDSR_FIELD("log_sigma_eps2", train.model.log_sigma_eps2),
            DPDSR_FIELD("ar_hidden", train.model.ar_hidden),
            DPDSR_FIELD("ar_init_hidden", train.model.ar_init_hidden),
            DPDSR_FIELD("encoder_channels", train.model.encoder.channels),
            DPDSR_FIELD("encoder_kernel", train.model.encoder.kernel),
            DPDSR_FIELD("encoder_layers", train.model.encoder.layers),
            DPDSR_FIELD("encoder_lstm_hidden", train.model.encoder.lstm_hidden),
            DPDSR_FIELD("tau", train.loss.tau),
            DPDSR_FIELD("log_sigma_eta2", train.loss.log_sigma_eta2),
            DPDSR_FIELD("alpha_g", train.loss.alpha_g),
            DPDSR_FIELD("alpha_zhat", train.loss.alpha_zhat),
            DPDSR_FIELD("trim", train.loss.trim),
            DPDSR_FIELD("mc_samples", train.loss.mc_samples),
            DPDSR_FIELD("gamma", train.loss.gamma),
            DPDSR_FIELD("t_pred", train.loss.t_pred),
            DPDSR_FIELD("chunk_length", train.chunk_length),
            DPDSR_FIELD("batch_size", train.batch_size),
            DPDSR_FIELD("iterations", train.iterations),
            DPDSR_FIELD("checkpoint_every", train.checkpoint_every),
            DPDSR_FIELD("scale", train.scale),
            DPDSR_FIELD("learning_rate", train.learning_rate),
            DPDSR_FIELD("lr_decay", train.lr_decay),
            DPDSR_FIELD("clip_norm", train.clip_norm),
            field("seed", [](RunConfig& c) -> auto& { return c.train.seed; }),
            DPDSR_FIELD("log_every", log_every),
            DPDSR_FIELD("grid_tau", grid.tau),
            DPDSR_FIELD("grid_log_sigma_eta2", grid.log_sigma_eta2),
            DPDSR_FIELD("grid_log_sigma_eps2", grid.log_sigma_eps2),
            DPDSR_FIELD("grid_gamma", grid.gamma),
            DPDSR_FIELD("grid_t_pred", grid.t_pred),
            DPDSR_FIELD("grid_seeds", grid.seeds),
            DPDSR_FIELD("workers", workers),
            DPDSR_FIELD("eval_generation_length", eval.generation_length),
            DPDSR_FIELD("eval_pe_horizon", eval.prediction.horizon),
            DPDSR_FIELD("eval_pe_warmup", eval.prediction.warmup),
            DPDSR_FIELD("eval_pe_noise_draws", eval.prediction.noise_draws),
            DPDSR_FIELD("eval_pe_chunks", eval.prediction.chunks),
            DPDSR_FIELD("eval_pe_batch", eval.prediction.batch),
            DPDSR_FIELD("eval_spectral_segment", eval.spectral.segment),
            DPDSR_FIELD("eval_spectral_smoothing", eval.spectral.smoothing_sigma),
            DPDSR_FIELD("eval_kl_chunks", eval.kl.chunks),
            DPDSR_FIELD("eval_kl_length", eval.kl.length),
            DPDSR_FIELD("eval_kl_trim", eval.kl.trim),
            DPDSR_FIELD("eval_kl_mc_samples", eval.kl.mc_samples),
            DPDSR_FIELD("eval_peak_height", eval.peak_height),
            DPDSR_FIELD("eval_peak_prominence", eval.peak_prominence),
            Key{"eval_weights",
                [](const RunConfig& c) {
                    return c.eval.weights ? format_value(std::vector<double>(c.eval.weights->begin(), c.eval.weights->end()))
                                          : std::string("auto");
                },
                [](RunConfig& c, std::string_view v) {
                    if (v == "auto") {
                        c.eval.weights.reset();
                        return;
                    }
                    const auto w = parse_value<std::vector<double>>(v);
                    if (w.size() != 4) throw std::invalid_argument("expected 'auto' or four weights");
                    c.eval.weights = evaluation::ScoreWeights{w[0], w[1], w[2], w[3]};
                }},
            field("eval_seed", [](RunConfig& c) -> auto& { return c.eval.seed; }),
            DPDSR_FIELD("attractor_points", attractor_points),
            DPDSR_FIELD("attractor_warmup", attractor.warmup),
            DPDSR_FIELD("attractor_length", attractor.length),
            DPDSR_FIELD("attractor_quantile", attractor.quantile),
            DPDSR_FIELD("attractor_fixed_point_tol", attractor.fixed_point_tol),
            DPDSR_FIELD("attractor_tol", attractor.tol),
            DPDSR_FIELD("attractor_compare_points", attractor.compare_points),
            DPDSR_FIELD("attractor_trajectory_points", trajectory_points),
            DPDSR_FIELD("lyapunov_steps", attractor.lyapunov.steps),
            DPDSR_FIELD("lyapunov_delta0", attractor.lyapunov.delta0),
            DPDSR_FIELD("lyapunov_burn_in", attractor.lyapunov.burn_in),
            field("lyapunov_seed", [](RunConfig& c) -> auto& { return c.attractor.lyapunov.seed; }),
            DPDSR_FIELD("tauopt_clamp", tauopt_clamp),
            DPDSR_FIELD("plot_points", plot_points),
        };
        return k;
    }();
    return table;
}

}  // namespace

// seeds share the size_t parser
static_assert(std::is_same_v<std::uint64_t, std::size_t>);

std::vector<Assignment> parse_config_text(std::string_view text, std::string_view origin) {
    std::vector<Assignment> out;
    std::vector<std::string> errors;
    std::istringstream in{std::string(text)};
    std::string raw;
    for (std::size_t line_no = 1; std::getline(in, raw); ++line_no) {
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos || trim(line.substr(0, eq)).empty()) {
            errors.push_back(std::string(origin) + ":" + std::to_string(line_no) + ": expected 'key = value'");
            continue;
        }
        out.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
    }
    if (!errors.empty()) {
        std::string msg = "malformed configuration:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw UsageError(msg);
    }
    return out;
}

std::vector<Assignment> read_config_file(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw UsageError("config file not found: " + path.string());
    return parse_config_text(io::read_file(path), path.string());
}

Assignment parse_assignment(std::string_view text) {
    const auto eq = text.find('=');
    if (eq == std::string_view::npos || trim(text.substr(0, eq)).empty())
        throw UsageError("expected key=value, got '" + std::string(text) + "'");
    return {std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1)))};
}

void apply_assignments(RunConfig& config, const std::vector<Assignment>& assignments) {
    std::vector<std::string> unknown, invalid;
    for (const auto& [key, value] : assignments) {
        const auto& table = keys();
        const auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return k.name == key; });
        if (it == table.end()) {
            unknown.push_back(key);
            continue;
        }
        try {
            it->set(config, value);
        } catch (const std::exception& e) {
            invalid.push_back(key + ": " + e.what());
        }
    }
    if (unknown.empty() && invalid.empty()) return;
    std::string msg = "invalid configuration:";
    if (!unknown.empty()) {
        msg += "\n  unknown keys:";
        for (const auto& k : unknown) msg += " " + k;
    }
    for (const auto& i : invalid) msg += "\n  " + i;
    throw UsageError(msg);
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& k : keys()) out.push_back(k.name);
    return out;
}

std::string to_text(const RunConfig& config) {
    std::string out;
    for (const auto& k : keys()) out += k.name + " = " + k.get(config) + "\n";
    return out;
}

void validate(const RunConfig& config) {
    std::vector<std::string> problems;
    auto check = [&](auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            problems.emplace_back(e.what());
        }
    };
    check([&] { config.train.validate(); });
    check([&] { config.grid.validate(config.train.model.variant); });
    if (config.dataset.empty()) problems.emplace_back("dataset must be set");
    if (config.rnn_scaling != "g2/n" && config.rnn_scaling != "g/n2")
        problems.emplace_back("rnn_scaling must be g2/n or g/n2");
    if (!(config.data_scale > 0.0 && config.data_scale <= 1.0)) problems.emplace_back("data_scale must lie in (0, 1]");
    if (config.workers == 0) problems.emplace_back("workers must be at least 1");
    if (config.attractor_points == 0) problems.emplace_back("attractor_points must be at least 1");
    if (!(config.attractor.quantile >= 0.0 && config.attractor.quantile <= 1.0))
        problems.emplace_back("attractor_quantile must lie in [0, 1]");
    if (config.attractor.lyapunov.steps <= config.attractor.lyapunov.burn_in)
        problems.emplace_back("lyapunov_burn_in must be below lyapunov_steps");
    if (!(config.tauopt_clamp > 0.0)) problems.emplace_back("tauopt_clamp must be positive");
    if (problems.empty()) return;
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw UsageError(msg);
}

}  // namespace dpdsr::cli
