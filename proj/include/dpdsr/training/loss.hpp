#pragma once

#include "dpdsr/dynsys/dataset.hpp"
#include "dpdsr/models/model.hpp"

namespace dpdsr::training {

struct LossConfig {
    std::size_t tau = 20;
    double log_sigma_eta2 = -2.0;
    double alpha_g = 0.3;
    double alpha_zhat = 0.001;
    std::size_t trim = 50;
    std::size_t mc_samples = 4;
    double gamma = 0.0;      // AR-LSTM scheduled sampling probability
    std::size_t t_pred = 50; // AR-LSTM prediction window

    /// The estimated-state variance follows the observation variance.
    double log_sigma_zhat2() const { return log_sigma_eta2 + 2.0; }
    void validate(std::size_t chunk_length) const;
};

struct LossComponents {
    ad::Tensor total;
    ad::Tensor rec_x;
    ad::Tensor rec_zhat;
    ad::Tensor kl;  // undefined for deterministic models
    ad::Tensor reg_g;
    ad::Tensor reg_zhat;

    /// Named scalar values of the defined components, total first.
    std::vector<std::pair<std::string, double>> values() const;
};

/// Turns a chunk batch into a [B,T,d_x] tensor.
ad::Tensor batch_tensor(const dynsys::Batch& batch);

/// Monte Carlo KL(q || N(0, I)) over steps [begin, end): the mean over
/// sample rows of sum_t log q(eps_t) - log N(eps_t; 0, I).
ad::Tensor kl_autoregressive(const models::PosteriorSample& sample, std::size_t begin, std::size_t end);
ad::Tensor kl_autoregressive(const models::PosteriorSample& sample);

/// DPDSR objective on x [B,T,d_x]; SPDSR when the model is deterministic.
/// Likelihood terms cover t in [trim, T - trim), summed over time and
/// averaged over batch items and posterior draws.
LossComponents dpdsr_loss(const models::DpdsrModel& model, const ad::Tensor& x, const LossConfig& config, Rng& rng);
LossComponents dpdsr_loss(const models::DpdsrModel& model, const ad::Tensor& x, const LossConfig& config,
                          std::uint64_t seed);

/// Objective of whichever variant the model is.
LossComponents model_loss(const models::Model& model, const ad::Tensor& x, const LossConfig& config, Rng& rng);

}  // namespace dpdsr::training
