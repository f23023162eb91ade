#pragma once

#include "dpdsr/models/dpdsr.hpp"

namespace dpdsr::models {

struct DkfConfig {
    std::size_t d_x = 1;
    std::size_t d_z = 8;
    std::size_t hidden = 256;
    double log_sigma_eps2 = -4.0;  // initial value, trained
    EncoderConfig encoder;
};

/// Deep Kalman filter: z_{t+1} = f(z_t) + sigma_eps * xi with the residual
/// MLP f and no tanh, a linear observation map and an autoregressive
/// posterior q(z_t | z_{t-1}, x).
struct DkfParams {
    DkfConfig config;
    Linear f_hidden;
    Linear f_output;
    Linear g;
    ad::Tensor log_sigma_eps2;  // [1]
    ConvStack stack;
    ad::LstmParams lstm;  // input [feature_t; z_{t-1}]
    Linear head;          // -> [mu, logvar]

    static DkfParams make(const DkfConfig& config, Rng& rng);
    ad::Tensor drift(const ad::Tensor& z) const;
    ad::Tensor observe(const ad::Tensor& z) const { return g(z); }
    void collect(const std::string& prefix, ParameterList& out) const;
};

struct DkfPosterior {
    std::vector<ad::Tensor> z;  // T x [B, d_z]
    std::vector<ad::Tensor> mu;
    std::vector<ad::Tensor> logvar;
};

/// One posterior path per batch item. `xi` supplies the T standard normal
/// draws ([B,d_z] each); empty means the mean path.
DkfPosterior dkf_posterior(const ad::Tensor& x, const DkfParams& params, const std::vector<ad::Tensor>& xi);

struct DkfTerms {
    ad::Tensor reconstruction;  // -E_q log p(x|z), summed over the window, batch mean
    ad::Tensor kl;              // KL(q || p), same reduction
    ad::Tensor total() const { return ad::add(reconstruction, kl); }
};

/// Negative ELBO over t in [trim, T - trim), one posterior sample per item.
DkfTerms dkf_terms(const ad::Tensor& x, const DkfParams& params, double log_sigma_eta2, std::size_t trim,
                   const std::vector<ad::Tensor>& xi);
DkfTerms dkf_terms(const ad::Tensor& x, const DkfParams& params, double log_sigma_eta2, std::size_t trim, Rng& rng);
ad::Tensor dkf_elbo(const ad::Tensor& x, const DkfParams& params, double log_sigma_eta2, std::uint64_t seed);

/// KL(N(mu_q, e^lq) || N(mu_p, e^lp)) summed over the last axis.
ad::Tensor kl_gaussians_logvar(const ad::Tensor& mu_q, const ad::Tensor& logvar_q, const ad::Tensor& mu_p,
                               const ad::Tensor& logvar_p);

}  // namespace dpdsr::models
