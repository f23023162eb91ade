#pragma once

#include "dpdsr/models/dpdsr.hpp"

namespace dpdsr::models {

struct ArLstmConfig {
    std::size_t d_x = 1;
    std::size_t hidden = 32;  // LSTM state
    std::size_t code = 8;     // initial-condition code
    std::size_t init_hidden = 64;
    EncoderConfig encoder;
};

/// Autoregressive LSTM with Gaussian output. Initial (h0, c0, x0) come from
/// a causal conv stack over the past window, read at its last step, mapped
/// to a code and expanded by a ReLU MLP.
struct ArLstmParams {
    ArLstmConfig config;
    ConvStack stack;
    Linear code_head;
    Mlp init;  // code -> [h0; c0; x0]
    ad::LstmParams lstm;
    Linear head;  // -> [mu, logvar]

    static ArLstmParams make(const ArLstmConfig& config, Rng& rng);
    /// State [h; c; x_in] from the past window [B,T_past,d_x].
    ad::Tensor initial_state(const ad::Tensor& past) const;
    /// One generation step; xi undefined gives the mean. Returns the next
    /// state, and the Gaussian parameters of the emitted sample.
    ad::Tensor step(const ad::Tensor& state, const ad::Tensor& xi, ad::Tensor* mu = nullptr,
                    ad::Tensor* logvar = nullptr) const;
    std::size_t state_dim() const { return 2 * config.hidden + config.d_x; }
    void collect(const std::string& prefix, ParameterList& out) const;
};

struct ArLstmRollout {
    std::vector<ad::Tensor> mu;  // T_pred x [B, d_x]
    std::vector<ad::Tensor> logvar;
    std::vector<ad::Tensor> samples;
    std::vector<ad::Tensor> inputs;  // LSTM input at each prediction step
};

/// Predicts x[T_past .. T_past + T_pred). The input after each step is the
/// model's own (detached) sample with probability gamma per sequence, else
/// the data value.
ArLstmRollout arlstm_rollout(const ad::Tensor& x, const ArLstmParams& params, double gamma, std::size_t t_past,
                             std::size_t t_pred, Rng& rng);
ArLstmRollout arlstm_rollout(const ad::Tensor& x, const ArLstmParams& params, double gamma, std::size_t t_past,
                             std::size_t t_pred, std::uint64_t seed);

/// Gaussian NLL of the prediction window, summed over steps, batch mean.
ad::Tensor arlstm_loss(const ad::Tensor& x, const ArLstmRollout& rollout, std::size_t t_past);

}  // namespace dpdsr::models
