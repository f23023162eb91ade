#include "dpdsr/training/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dpdsr/autodiff/optim.hpp"
#include "dpdsr/io/binary.hpp"

namespace dpdsr::training {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t TrainingConfig::total_iterations() const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(iterations) * scale)));
}

std::size_t TrainingConfig::checkpoint_interval() const {
    return std::max<std::size_t>(1,
                                 static_cast<std::size_t>(std::llround(static_cast<double>(checkpoint_every) * scale)));
}

double TrainingConfig::learning_rate_at(std::size_t i) const {
    const double n = static_cast<double>(total_iterations());
    const auto first = static_cast<std::size_t>(std::llround(n / 3.0));
    const auto second = static_cast<std::size_t>(std::llround(2.0 * n / 3.0));
    double lr = learning_rate;
    if (i >= first) lr *= lr_decay;
    if (i >= second) lr *= lr_decay;
    return lr;
}

std::vector<std::size_t> TrainingConfig::checkpoint_iterations() const {
    const std::size_t n = total_iterations(), every = checkpoint_interval();
    std::vector<std::size_t> out;
    for (std::size_t k = every; k <= n; k += every) out.push_back(k);
    if (out.empty() || out.back() != n) out.push_back(n);
    return out;
}

void TrainingConfig::validate() const {
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (chunk_length < 2) throw std::invalid_argument("chunk_length must be at least 2");
    if (!(scale > 0.0)) throw std::invalid_argument("scale must be positive");
    if (iterations == 0) throw std::invalid_argument("iterations must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be positive");
    loss.validate(chunk_length);
}

json TrainingConfig::to_json() const {
    return {{"model", model.to_json()},
            {"loss",
             {{"tau", loss.tau},
              {"log_sigma_eta2", loss.log_sigma_eta2},
              {"log_sigma_zhat2", loss.log_sigma_zhat2()},
              {"alpha_g", loss.alpha_g},
              {"alpha_zhat", loss.alpha_zhat},
              {"trim", loss.trim},
              {"mc_samples", loss.mc_samples},
              {"gamma", loss.gamma},
              {"t_pred", loss.t_pred}}},
            {"chunk_length", chunk_length},
            {"batch_size", batch_size},
            {"iterations", iterations},
            {"checkpoint_every", checkpoint_every},
            {"scale", scale},
            {"total_iterations", total_iterations()},
            {"learning_rate", learning_rate},
            {"lr_decay", lr_decay},
            {"clip_norm", clip_norm},
            {"seed", seed}};
}

TrainingConfig TrainingConfig::from_json(const json& j) {
    TrainingConfig c;
    if (j.contains("model")) c.model = models::ModelConfig::from_json(j.at("model"));
    if (j.contains("loss")) {
        const auto& l = j.at("loss");
        c.loss.tau = l.value("tau", c.loss.tau);
        c.loss.log_sigma_eta2 = l.value("log_sigma_eta2", c.loss.log_sigma_eta2);
        c.loss.alpha_g = l.value("alpha_g", c.loss.alpha_g);
        c.loss.alpha_zhat = l.value("alpha_zhat", c.loss.alpha_zhat);
        c.loss.trim = l.value("trim", c.loss.trim);
        c.loss.mc_samples = l.value("mc_samples", c.loss.mc_samples);
        c.loss.gamma = l.value("gamma", c.loss.gamma);
        c.loss.t_pred = l.value("t_pred", c.loss.t_pred);
    }
    c.chunk_length = j.value("chunk_length", c.chunk_length);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.iterations = j.value("iterations", c.iterations);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.scale = j.value("scale", c.scale);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.seed = j.value("seed", c.seed);
    return c;
}

fs::path checkpoint_dir(const fs::path& run_dir, std::size_t iteration) {
    return run_dir / "checkpoints" / ("ckpt_" + std::to_string(iteration));
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
    static const char* names[] = {"total", "rec_x", "rec_zhat", "kl", "reg_g", "reg_zhat"};
    std::ostringstream out;
    out << std::setprecision(17) << "iter";
    for (const char* n : names) out << ',' << n;
    out << ",grad_norm,lr,causal_loss\n";
    for (const auto& row : trace) {
        out << row.iteration;
        for (const char* n : names) {
            out << ',';
            for (const auto& [key, value] : row.components)
                if (key == n) out << value;
        }
        out << ',' << row.grad_norm << ',' << row.learning_rate << ',' << row.causal_loss << '\n';
    }
    return out.str();
}

TrainResult train(const TrainingConfig& config_in, const dynsys::TimeSeriesDataset& data, const fs::path& run_dir,
                  const ProgressFn& progress) {
    TrainingConfig config = config_in;
    config.model.d_x = data.channels;
    config.validate();
    if (data.length < config.chunk_length)
        throw std::invalid_argument("dataset '" + data.name + "' has " + std::to_string(data.length) +
                                    " samples, fewer than the chunk length " + std::to_string(config.chunk_length));

    fs::create_directories(run_dir / "checkpoints");
    io::atomic_write(run_dir / "config.json", config.to_json().dump(2) + "\n");

    auto model = models::make_model(config.model, config.seed);
    auto params = models::tensors_of(model->parameters());
    auto causal = models::tensors_of(model->causal_parameters());
    auto adam = ad::make_adam_state(params, config.learning_rate);
    auto adam_causal = ad::make_adam_state(causal, config.learning_rate);
    Rng chunk_rng = make_rng(config.seed, "training-chunks");
    Rng loss_rng = make_rng(config.seed, "training-loss");

    const std::size_t n = config.total_iterations();
    const auto saves = config.checkpoint_iterations();
    auto next_save = saves.begin();

    TrainResult result;
    json diagnostics = json::array();
    int consecutive_bad = 0;
    for (std::size_t i = 0; i < n; ++i) {
        TraceRow row;
        row.iteration = i + 1;
        row.learning_rate = config.learning_rate_at(i);
        adam.lr = adam_causal.lr = row.learning_rate;

        const auto x = batch_tensor(dynsys::chunk(data, config.chunk_length, config.batch_size, chunk_rng));
        ad::zero_grad(params);
        LossComponents loss;
        bool finite = true;
        std::string reason;
        try {
            loss = model_loss(*model, x, config.loss, loss_rng);
            row.components = loss.values();
            for (const auto& [name, value] : row.components) finite = finite && std::isfinite(value);
            if (!finite) reason = "non-finite loss";
        } catch (const std::domain_error& e) {
            finite = false;
            reason = e.what();
        }
        if (!finite) {
            json dump = {{"iteration", i + 1}, {"reason", reason}};
            for (const auto& [name, value] : row.components)
                dump[name] = std::isfinite(value) ? json(value) : json(std::to_string(value));
            diagnostics.push_back(dump);
            io::atomic_write(run_dir / "diagnostics.json", diagnostics.dump(2) + "\n");
            result.trace.push_back(row);
            if (++consecutive_bad >= 2) {
                result.failed = true;
                result.failure = "non-finite loss at iterations " + std::to_string(i) + " and " + std::to_string(i + 1);
                io::atomic_write(run_dir / "failure.json", json{{"failed", true}, {"reason", result.failure}}.dump(2));
                break;
            }
            continue;
        }
        consecutive_bad = 0;

        ad::backward(loss.total);
        row.grad_norm = ad::clip_global_norm(params, config.clip_norm);
        ad::adam_step(params, adam);
        loss = {};

        if (!causal.empty()) {
            ad::zero_grad(causal);
            if (auto c = model->causal_loss(x)) {
                row.causal_loss = c->item();
                ad::backward(*c);
                ad::adam_step(causal, adam_causal);
            }
        }

        result.final_loss = row.components.front().second;
        result.iterations_done = i + 1;
        result.trace.push_back(row);
        if (progress) progress(row);

        if (next_save != saves.end() && *next_save == i + 1) {
            const auto dir = checkpoint_dir(run_dir, i + 1);
            models::save_checkpoint(*model, dir, i + 1, config.seed, {{"loss", result.final_loss}});
            result.checkpoints.push_back(dir);
            io::atomic_write(run_dir / "loss_trace.csv", trace_csv(result.trace));
            ++next_save;
        }
    }
    io::atomic_write(run_dir / "loss_trace.csv", trace_csv(result.trace));
    return result;
}

}  // namespace dpdsr::training
