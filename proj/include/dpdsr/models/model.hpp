#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"

#include "dpdsr/models/arlstm.hpp"
#include "dpdsr/models/dkf.hpp"
#include "dpdsr/models/dpdsr.hpp"

namespace dpdsr::models {

enum class Variant { dpdsr, spdsr, dkf, arlstm };
std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

/// Architecture settings for every variant; fields a variant does not use
/// are ignored. For the AR-LSTM, d_z is the initial-condition code size.
struct ModelConfig {
    Variant variant = Variant::dpdsr;
    std::size_t d_x = 1;
    std::size_t d_z = 8;
    std::size_t d_zhat = 0;  // 0 selects d_z - 1
    std::size_t d_eps = 1;
    std::size_t hidden = 256;
    std::size_t g_hidden = 32;
    double noise_gain = 1.0;
    double log_sigma_eps2 = -4.0;
    std::size_t ar_hidden = 32;
    std::size_t ar_init_hidden = 64;
    EncoderConfig encoder;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
    GenerativeConfig generative() const;
};

/// Common view of a trained model as a discrete-time stochastic system
/// z' = step(z, xi), x = observe(z), with xi standard normal.
class Model {
public:
    virtual ~Model() = default;
    virtual const ModelConfig& config() const = 0;
    Variant variant() const { return config().variant; }
    /// Parameters trained by the main objective.
    virtual ParameterList parameters() const = 0;
    /// Parameters of the causal encoder, trained separately.
    virtual ParameterList causal_parameters() const { return {}; }
    ParameterList all_parameters() const;

    virtual std::size_t state_dim() const = 0;
    /// Width of xi; 0 for a deterministic model.
    virtual std::size_t noise_dim() const = 0;
    /// Non-causal state estimates for a window [B,T,d_x] -> [B,T',state_dim],
    /// T' <= T (the AR-LSTM spends a prefix on its initial condition).
    virtual ad::Tensor embed(const ad::Tensor& x) const = 0;
    /// State at the last step of [B,T,d_x] using no later data -> [B,state_dim].
    virtual ad::Tensor causal_state(const ad::Tensor& x) const = 0;
    /// An undefined xi runs the noise-free map.
    virtual ad::Tensor step(const ad::Tensor& z, const ad::Tensor& xi) const = 0;
    virtual ad::Tensor observe(const ad::Tensor& z) const = 0;
    /// Mismatch between causal and non-causal state estimates, for the
    /// causal encoder update. Empty when the model needs no causal encoder.
    virtual std::optional<ad::Tensor> causal_loss(const ad::Tensor& x) const { (void)x; return std::nullopt; }
};

class DpdsrModel final : public Model {
public:
    DpdsrModel(const ModelConfig& config, Rng& rng);
    const ModelConfig& config() const override { return config_; }
    ParameterList parameters() const override;
    ParameterList causal_parameters() const override;
    std::size_t state_dim() const override { return config_.d_z; }
    std::size_t noise_dim() const override { return gen.config.stochastic ? config_.d_eps : 0; }
    ad::Tensor embed(const ad::Tensor& x) const override;
    ad::Tensor causal_state(const ad::Tensor& x) const override;
    ad::Tensor step(const ad::Tensor& z, const ad::Tensor& xi) const override;
    ad::Tensor observe(const ad::Tensor& z) const override { return gen.observe(z); }
    std::optional<ad::Tensor> causal_loss(const ad::Tensor& x) const override;

    GenerativeParams gen;
    StateEncoder state_encoder;
    StateEncoder causal_encoder;
    std::optional<NoiseEncoder> noise_encoder;

private:
    ModelConfig config_;
};

class DkfModel final : public Model {
public:
    DkfModel(const ModelConfig& config, Rng& rng);
    const ModelConfig& config() const override { return config_; }
    ParameterList parameters() const override;
    ParameterList causal_parameters() const override;
    std::size_t state_dim() const override { return config_.d_z; }
    std::size_t noise_dim() const override { return config_.d_z; }
    ad::Tensor embed(const ad::Tensor& x) const override;
    ad::Tensor causal_state(const ad::Tensor& x) const override;
    ad::Tensor step(const ad::Tensor& z, const ad::Tensor& xi) const override;
    ad::Tensor observe(const ad::Tensor& z) const override { return params.observe(z); }
    std::optional<ad::Tensor> causal_loss(const ad::Tensor& x) const override;

    DkfParams params;
    StateEncoder causal_encoder;

private:
    ModelConfig config_;
};

class ArLstmModel final : public Model {
public:
    ArLstmModel(const ModelConfig& config, Rng& rng);
    const ModelConfig& config() const override { return config_; }
    ParameterList parameters() const override;
    std::size_t state_dim() const override { return params.state_dim(); }
    std::size_t noise_dim() const override { return config_.d_x; }
    ad::Tensor embed(const ad::Tensor& x) const override;
    ad::Tensor causal_state(const ad::Tensor& x) const override;
    ad::Tensor step(const ad::Tensor& z, const ad::Tensor& xi) const override { return params.step(z, xi); }
    ad::Tensor observe(const ad::Tensor& z) const override;

    /// Past-window length used to build the initial condition in embed().
    std::size_t warmup(std::size_t length) const;

    ArLstmParams params;

private:
    ModelConfig config_;
};

std::unique_ptr<Model> make_model(const ModelConfig& config, std::uint64_t seed);

struct Checkpoint {
    std::unique_ptr<Model> model;
    std::size_t iteration = 0;
    std::uint64_t seed = 0;
    nlohmann::json extra;
};

/// Writes <dir>/model.json (manifest) and <dir>/model.bin (named tensors).
void save_checkpoint(const Model& model, const std::filesystem::path& dir, std::size_t iteration, std::uint64_t seed,
                     const nlohmann::json& extra = {});
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Copy parameter values (not history) from one model into another of the same shape.
void copy_parameters(const Model& from, Model& to);

}  // namespace dpdsr::models
