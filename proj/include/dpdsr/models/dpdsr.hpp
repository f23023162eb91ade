#pragma once

#include <optional>

#include "dpdsr/models/layers.hpp"

namespace dpdsr::models {

struct GenerativeConfig {
    std::size_t d_x = 1;
    std::size_t d_z = 8;
    std::size_t d_zhat = 0;  // 0 selects d_z - 1
    std::size_t d_eps = 1;
    std::size_t hidden = 256;
    std::size_t g_hidden = 32;
    double noise_gain = 1.0;  // initial value of the nonzero row of B
    bool stochastic = true;   // false: B = 0 and no noise encoder (SPDSR)

    std::size_t zhat_dim() const;
    void validate() const;
};

/// z' = tanh(f(z) + B eps), f(z) = z + W2 relu(W1 z + b1) + b2, x = g(z).
struct GenerativeParams {
    GenerativeConfig config;
    Linear f_hidden;   // W1, b1
    Linear f_output;   // W2, b2
    Mlp g;
    std::optional<Linear> f_init;  // d_zhat -> d_z - d_zhat
    ad::Tensor noise_gain;         // [d_eps], last row of B

    static GenerativeParams make(const GenerativeConfig& config, Rng& rng);
    /// Residual drift f(z), before the tanh.
    ad::Tensor drift(const ad::Tensor& z) const;
    /// B eps as a [N, d_z] tensor.
    ad::Tensor inject(const ad::Tensor& eps) const;
    /// An undefined eps means no noise.
    ad::Tensor evolve(const ad::Tensor& z, const ad::Tensor& eps = {}) const;
    ad::Tensor observe(const ad::Tensor& z) const;
    /// [zhat; f_init(zhat)] for [N, d_zhat] input.
    ad::Tensor complete(const ad::Tensor& zhat) const;
    void collect(const std::string& prefix, ParameterList& out) const;
    /// Weight matrices of g, the target of the sparsity penalty.
    std::vector<ad::Tensor> g_weights() const;
};

ad::Tensor evolve_step(const ad::Tensor& z, const ad::Tensor& eps, const GenerativeParams& params);
ad::Tensor observe(const ad::Tensor& z, const GenerativeParams& params);

struct EncoderConfig {
    std::size_t channels = 24;
    std::size_t kernel = 7;
    std::size_t layers = 7;
    std::size_t lstm_hidden = 32;
};

/// Conv stack plus linear head to d_zhat.
struct StateEncoder {
    ConvStack stack;
    Linear head;

    static StateEncoder make(std::size_t d_x, std::size_t d_out, const EncoderConfig& config, bool causal, Rng& rng);
    bool causal() const { return stack.config.padding == ad::Padding::causal; }
    /// [B,T,d_x] -> [B,T,d_out]
    ad::Tensor operator()(const ad::Tensor& x) const;
    void collect(const std::string& prefix, ParameterList& out) const;
};

ad::Tensor encode_states(const ad::Tensor& x, const StateEncoder& encoder);

/// Posterior draws for R = mc * B sequences; row m*B + b is draw m of item b.
/// Per-step tensors are [R, d_eps].
struct PosteriorSample {
    std::vector<ad::Tensor> eps;
    std::vector<ad::Tensor> mu;
    std::vector<ad::Tensor> logvar;
    std::vector<ad::Tensor> log_q;  // per-step log N(eps_t | mu_t, var_t), [R]

    std::size_t steps() const { return eps.size(); }
    std::size_t rows() const { return eps.empty() ? 0 : eps.front().dim(0); }
    ad::Tensor var(std::size_t t) const { return ad::exp(logvar[t]); }
    /// sum_{t in [begin,end)} log q, [R]
    ad::Tensor logq(std::size_t begin, std::size_t end) const;
    ad::Tensor logq() const { return logq(0, steps()); }
    /// Append eps_t = mu + exp(logvar/2) * xi together with its log-density.
    void append(const ad::Tensor& mu, const ad::Tensor& logvar, const ad::Tensor& xi);
};

/// Conv stack over [x; zhat], then an LSTM fed [feature_t; eps_{t-1}] and a
/// Gaussian head with log-variance clamped to [-10, 10].
struct NoiseEncoder {
    ConvStack stack;
    ad::LstmParams lstm;
    Linear head;  // -> [mu, logvar]
    std::size_t d_eps = 1;

    static NoiseEncoder make(std::size_t d_x, std::size_t d_zhat, std::size_t d_eps, const EncoderConfig& config,
                             Rng& rng);
    PosteriorSample sample(const ad::Tensor& x, const ad::Tensor& zhat, std::size_t mc, Rng& rng) const;
    void collect(const std::string& prefix, ParameterList& out) const;
};

PosteriorSample encode_noise(const ad::Tensor& x, const ad::Tensor& zhat, const NoiseEncoder& encoder,
                             std::uint64_t seed, std::size_t mc = 1);

/// Teacher-forced simulation over zhat [R,T,d_zhat] with optional noise
/// eps (T x [R,d_eps]). Returns T states [R,d_z]. The first d_zhat input
/// components are replaced by zhat_t whenever t mod tau == 0.
std::vector<ad::Tensor> rollout_teacher_forced(const ad::Tensor& zhat, const std::vector<ad::Tensor>& eps,
                                               std::size_t tau, const GenerativeParams& params);

}  // namespace dpdsr::models
