#include "dpdsr/evaluation/evaluation.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dpdsr/autodiff/ops.hpp"
#include "dpdsr/training/loss.hpp"

namespace dpdsr::evaluation {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ad::Tensor rows_of(const dynsys::Batch& batch, std::size_t begin, std::size_t end, std::size_t length) {
    const std::size_t c = batch.channels;
    std::vector<double> v;
    v.reserve((end - begin) * length * c);
    for (std::size_t b = begin; b < end; ++b) {
        const auto first = batch.data.begin() + static_cast<std::ptrdiff_t>(b * batch.length * c);
        v.insert(v.end(), first, first + static_cast<std::ptrdiff_t>(length * c));
    }
    return ad::Tensor::from({end - begin, length, c}, std::move(v));
}

std::vector<double> channel_of(std::span<const double> series, std::size_t channels, std::size_t c) {
    std::vector<double> out;
    out.reserve(series.size() / channels);
    for (std::size_t t = 0; t * channels + c < series.size(); ++t) out.push_back(series[t * channels + c]);
    return out;
}

}  // namespace

double prediction_error(const models::Model& model, const dynsys::TimeSeriesDataset& data,
                        const PredictionOptions& options) {
    const std::size_t k = options.warmup, n = options.horizon;
    if (k < 1 || n < 1) throw std::invalid_argument("prediction_error: warmup and horizon must be positive");
    if (options.chunks < 1 || options.batch < 1) throw std::invalid_argument("prediction_error: need at least one chunk");
    if (data.length < k + n) {
        throw std::invalid_argument("prediction_error: chunks of " + std::to_string(k + n) +
                                    " steps do not fit a series of " + std::to_string(data.length));
    }
    ad::NoGradGuard no_grad;
    Rng rng = make_rng(options.seed, "prediction-error");
    const auto batch = dynsys::chunk(data, k + n, options.chunks, rng);
    const std::size_t c = data.channels;
    const std::size_t noise = model.noise_dim();
    const std::size_t draws = noise ? std::max<std::size_t>(1, options.noise_draws) : 1;

    double total = 0.0;
    for (std::size_t b0 = 0; b0 < batch.count; b0 += options.batch) {
        const std::size_t b1 = std::min(batch.count, b0 + options.batch);
        const std::size_t rows = b1 - b0;
        auto z = ad::repeat_rows(model.causal_state(rows_of(batch, b0, b1, k)), draws);
        for (std::size_t i = 0; i < n; ++i) {
            ad::Tensor xi = noise ? models::standard_normal({rows * draws, noise}, rng) : ad::Tensor{};
            z = model.step(z, xi);
            const auto pred = model.observe(z);
            const auto p = pred.data();
            for (std::size_t r = 0; r < rows * draws; ++r) {
                const std::size_t b = b0 + r % rows;
                const double* truth = &batch.data[(b * batch.length + k + i) * c];
                double sq = 0.0;
                for (std::size_t ch = 0; ch < c; ++ch) sq += (truth[ch] - p[r * c + ch]) * (truth[ch] - p[r * c + ch]);
                total += std::sqrt(sq);
            }
        }
    }
    return total / static_cast<double>(n * batch.count * draws);
}

double kl_usage(const models::Model& model, const dynsys::TimeSeriesDataset& data, const KlUsageOptions& options) {
    const auto* dpdsr = dynamic_cast<const models::DpdsrModel*>(&model);
    const auto* dkf = dynamic_cast<const models::DkfModel*>(&model);
    if (!dkf && !(dpdsr && dpdsr->noise_encoder)) return 0.0;

    const std::size_t length = std::min(options.length, data.length);
    if (2 * options.trim >= length) {
        throw std::invalid_argument("kl_usage: trim " + std::to_string(options.trim) + " leaves no steps of a " +
                                    std::to_string(length) + "-step chunk");
    }
    ad::NoGradGuard no_grad;
    Rng rng = make_rng(options.seed, "kl-usage");
    const auto batch = dynsys::chunk(data, length, options.chunks, rng);
    constexpr std::size_t group = 16;
    double total = 0.0;
    for (std::size_t b0 = 0; b0 < batch.count; b0 += group) {
        const std::size_t b1 = std::min(batch.count, b0 + group);
        const auto x = rows_of(batch, b0, b1, length);
        double kl;
        if (dpdsr) {
            const auto zhat = dpdsr->state_encoder(x);
            const auto sample = dpdsr->noise_encoder->sample(x, zhat, std::max<std::size_t>(1, options.mc_samples), rng);
            kl = training::kl_autoregressive(sample, options.trim, length - options.trim).item();
        } else {
            kl = models::dkf_terms(x, dkf->params, 0.0, options.trim, rng).kl.item();
        }
        total += kl * static_cast<double>(b1 - b0);
    }
    return total / static_cast<double>(batch.count);
}

std::vector<double> generate_long(const models::Model& model, const dynsys::TimeSeriesDataset& train,
                                  std::size_t length, std::uint64_t seed, std::size_t embed_window) {
    if (length == 0) return {};
    ad::NoGradGuard no_grad;
    Rng rng = make_rng(seed, "generate-long");
    const std::size_t window = std::min(embed_window, train.length);
    const auto embedded = model.embed(training::batch_tensor(dynsys::chunk(train, window, 1, rng)));
    const std::size_t start = std::uniform_int_distribution<std::size_t>(0, embedded.dim(1) - 1)(rng);
    auto z = ad::select(embedded, 1, start);

    const std::size_t noise = model.noise_dim();
    const std::size_t c = train.channels;
    std::vector<double> out;
    out.reserve(length * c);
    auto record = [&] {
        const auto x = model.observe(z);
        out.insert(out.end(), x.data().begin(), x.data().end());
    };
    record();
    for (std::size_t t = 1; t < length; ++t) {
        z = model.step(z, noise ? models::standard_normal({1, noise}, rng) : ad::Tensor{});
        record();
    }
    return out;
}

EvaluationReport evaluate(const models::Model& model, const dynsys::TimeSeriesDataset& train,
                          const dynsys::TimeSeriesDataset& test, const std::string& model_id,
                          const EvaluationOptions& options, std::vector<double>* generated) {
    if (train.channels != test.channels || train.channels != model.config().d_x) {
        throw std::invalid_argument("evaluate: model, train and test channel counts differ");
    }
    EvaluationReport r;
    r.dataset = test.name;
    r.model = model_id;
    r.generation_length = options.generation_length;
    r.weights = options.weights ? *options.weights : score_weights(test.name);

    const std::size_t c = test.channels;
    auto gen = generate_long(model, train, options.generation_length, derive_seed(options.seed, "generation"));
    for (double v : gen) {
        if (!std::isfinite(v)) {
            r.diverged = true;
            break;
        }
    }

    auto prediction = options.prediction;
    prediction.seed = derive_seed(options.seed, "prediction");
    r.PE = prediction_error(model, test, prediction);
    auto kl = options.kl;
    kl.seed = derive_seed(options.seed, "kl");
    r.KL_eps = kl_usage(model, test, kl);

    if (r.diverged) {
        r.D_d = r.D_s = r.score = kInf;
    } else {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const auto g = channel_of(gen, c, ch);
            const auto t = test.channel(ch);
            r.D_d += wasserstein_1d(g, t) / static_cast<double>(c);
            const auto s = spectral_distance(g, t, options.spectral);
            r.D_s += s.distance / static_cast<double>(c);
            r.spectral_shortened = r.spectral_shortened || s.shortened;
        }
        r.D_isi = isi_distance(channel_of(gen, c, 0), test.channel(0), options.peak_height, options.peak_prominence);
        // A spike-free model cannot be ranked on a benchmark that weights ISIs.
        r.score = !r.D_isi && r.weights[3] != 0.0 ? kInf : score(r.measures(), r.weights);
    }
    if (generated) *generated = std::move(gen);
    return r;
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double number_or_inf(const nlohmann::json& j) { return j.is_null() ? kInf : j.get<double>(); }

std::string csv_number(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

nlohmann::json EvaluationReport::to_json() const {
    nlohmann::json j{{"dataset", dataset},
                     {"model", model},
                     {"checkpoint", checkpoint ? nlohmann::json(*checkpoint) : nlohmann::json(nullptr)},
                     {"generation_length", generation_length},
                     {"D_d", number_or_null(D_d)},
                     {"D_s", number_or_null(D_s)},
                     {"PE_20", number_or_null(PE)},
                     {"D_ISI", D_isi ? nlohmann::json(*D_isi) : nlohmann::json(nullptr)},
                     {"KL_eps", number_or_null(KL_eps)},
                     {"score", number_or_null(score)},
                     {"weights", weights},
                     {"spectral_shortened", spectral_shortened},
                     {"diverged", diverged}};
    return j;
}

EvaluationReport EvaluationReport::from_json(const nlohmann::json& j) {
    EvaluationReport r;
    r.dataset = j.at("dataset").get<std::string>();
    r.model = j.at("model").get<std::string>();
    if (!j.at("checkpoint").is_null()) r.checkpoint = j.at("checkpoint").get<std::size_t>();
    r.generation_length = j.at("generation_length").get<std::size_t>();
    r.D_d = number_or_inf(j.at("D_d"));
    r.D_s = number_or_inf(j.at("D_s"));
    r.PE = number_or_inf(j.at("PE_20"));
    if (!j.at("D_ISI").is_null()) r.D_isi = j.at("D_ISI").get<double>();
    r.KL_eps = number_or_inf(j.at("KL_eps"));
    r.score = number_or_inf(j.at("score"));
    r.weights = j.at("weights").get<ScoreWeights>();
    r.spectral_shortened = j.value("spectral_shortened", false);
    r.diverged = j.value("diverged", false);
    return r;
}

std::string report_csv_header() {
    return "model,checkpoint,dataset,D_d,D_s,PE_20,D_ISI,score,KL_eps,generation_length,diverged";
}

std::string report_csv_row(const EvaluationReport& r) {
    std::ostringstream os;
    os << r.model << ',' << (r.checkpoint ? std::to_string(*r.checkpoint) : "") << ',' << r.dataset << ','
       << csv_number(r.D_d) << ',' << csv_number(r.D_s) << ',' << csv_number(r.PE) << ','
       << (r.D_isi ? csv_number(*r.D_isi) : "") << ',' << csv_number(r.score) << ',' << csv_number(r.KL_eps) << ','
       << r.generation_length << ',' << (r.diverged ? 1 : 0);
    return os.str();
}

std::string reports_csv(const std::vector<EvaluationReport>& reports) {
    std::string out = report_csv_header() + "\n";
    for (const auto& r : reports) out += report_csv_row(r) + "\n";
    return out;
}

}  // namespace dpdsr::evaluation
