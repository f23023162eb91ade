#include "dpdsr/training/loss.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dpdsr::training {

using models::DpdsrModel;

void LossConfig::validate(std::size_t chunk_length) const {
    if (tau < 1) throw std::invalid_argument("tau must be at least 1");
    if (mc_samples < 1) throw std::invalid_argument("mc_samples must be at least 1");
    if (2 * trim >= chunk_length)
        throw std::invalid_argument("trim a=" + std::to_string(trim) + " must be below half the chunk length " +
                                    std::to_string(chunk_length));
}

std::vector<std::pair<std::string, double>> LossComponents::values() const {
    std::vector<std::pair<std::string, double>> out;
    auto put = [&](const char* name, const ad::Tensor& t) {
        if (t.defined()) out.emplace_back(name, t.item());
    };
    put("total", total);
    put("rec_x", rec_x);
    put("rec_zhat", rec_zhat);
    put("kl", kl);
    put("reg_g", reg_g);
    put("reg_zhat", reg_zhat);
    return out;
}

ad::Tensor batch_tensor(const dynsys::Batch& batch) {
    return ad::Tensor::from({batch.count, batch.length, batch.channels}, batch.data);
}

ad::Tensor kl_autoregressive(const models::PosteriorSample& sample, std::size_t begin, std::size_t end) {
    if (begin >= end || end > sample.steps()) throw std::out_of_range("kl_autoregressive: bad step range");
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    ad::Tensor total;
    for (std::size_t t = begin; t < end; ++t) {
        const auto& e = sample.eps[t];
        // log q - log N(eps; 0, I)
        auto log_p = ad::add_scalar(ad::scale(ad::square(e), -0.5), -half_log_2pi);
        auto step = ad::sub(sample.log_q[t], ad::sum_axis(log_p, 1));
        total = total.defined() ? ad::add(total, step) : step;
    }
    return ad::mean(total);
}

ad::Tensor kl_autoregressive(const models::PosteriorSample& sample) {
    return kl_autoregressive(sample, 0, sample.steps());
}

LossComponents dpdsr_loss(const DpdsrModel& model, const ad::Tensor& x, const LossConfig& config, Rng& rng) {
    if (x.rank() != 3) throw ad::ShapeError("dpdsr_loss: expected [B,T,d_x], got " + ad::to_string(x.shape()));
    const std::size_t steps = x.dim(1);
    config.validate(steps);
    const auto& gen = model.gen;
    const std::size_t dh = gen.config.zhat_dim();
    const bool stochastic = model.noise_encoder.has_value();
    const std::size_t mc = stochastic ? config.mc_samples : 1;

    const auto zhat = model.state_encoder(x);
    models::PosteriorSample sample;
    if (stochastic) sample = model.noise_encoder->sample(x, zhat, mc, rng);
    const auto zhat_rep = ad::repeat_rows(zhat, mc);
    const auto x_rep = ad::repeat_rows(x, mc);
    const auto z = models::rollout_teacher_forced(zhat_rep, sample.eps, config.tau, gen);

    const auto eta = ad::Tensor::scalar(config.log_sigma_eta2);
    const auto eta_zhat = ad::Tensor::scalar(config.log_sigma_zhat2());
    ad::Tensor rec_x, rec_zhat;
    for (std::size_t t = config.trim; t < steps - config.trim; ++t) {
        auto rx = ad::gaussian_nll_logvar(ad::select(x_rep, 1, t), gen.observe(z[t]), eta);
        auto rz = ad::gaussian_nll_logvar(ad::select(zhat_rep, 1, t), ad::slice(z[t], 1, 0, dh), eta_zhat);
        rec_x = rec_x.defined() ? ad::add(rec_x, rx) : rx;
        rec_zhat = rec_zhat.defined() ? ad::add(rec_zhat, rz) : rz;
    }
    const double inv_rows = 1.0 / static_cast<double>(x_rep.dim(0));

    LossComponents out;
    out.rec_x = ad::scale(rec_x, inv_rows);
    out.rec_zhat = ad::scale(rec_zhat, inv_rows);
    if (stochastic) out.kl = kl_autoregressive(sample, config.trim, steps - config.trim);

    ad::Tensor l1;
    for (const auto& w : gen.g_weights()) {
        auto s = ad::sum(ad::abs(w));
        l1 = l1.defined() ? ad::add(l1, s) : s;
    }
    out.reg_g = ad::scale(l1, config.alpha_g);

    // keep the estimated states centred with unit scale, over batch and time
    const auto flat = ad::reshape(zhat, {zhat.dim(0) * steps, dh});
    const auto mu = ad::mean_axis(flat, 0);
    const auto var = ad::mean_axis(ad::square(ad::sub(flat, mu)), 0);
    out.reg_zhat = ad::scale(ad::kl_diag_gaussian(mu, ad::add_scalar(var, 1e-12)), config.alpha_zhat);

    out.total = ad::add(ad::add(out.rec_x, out.rec_zhat), ad::add(out.reg_g, out.reg_zhat));
    if (out.kl.defined()) out.total = ad::add(out.total, out.kl);
    return out;
}

LossComponents dpdsr_loss(const DpdsrModel& model, const ad::Tensor& x, const LossConfig& config,
                          std::uint64_t seed) {
    Rng rng = make_rng(seed, "dpdsr-loss");
    return dpdsr_loss(model, x, config, rng);
}

LossComponents model_loss(const models::Model& model, const ad::Tensor& x, const LossConfig& config, Rng& rng) {
    if (const auto* m = dynamic_cast<const DpdsrModel*>(&model)) return dpdsr_loss(*m, x, config, rng);
    if (const auto* m = dynamic_cast<const models::DkfModel*>(&model)) {
        config.validate(x.dim(1));
        const auto terms = models::dkf_terms(x, m->params, config.log_sigma_eta2, config.trim, rng);
        LossComponents out;
        out.rec_x = terms.reconstruction;
        out.kl = terms.kl;
        out.total = terms.total();
        return out;
    }
    if (const auto* m = dynamic_cast<const models::ArLstmModel*>(&model)) {
        if (config.t_pred == 0 || config.t_pred >= x.dim(1))
            throw std::invalid_argument("t_pred must be positive and shorter than the chunk");
        const std::size_t t_past = x.dim(1) - config.t_pred;
        const auto r = models::arlstm_rollout(x, m->params, config.gamma, t_past, config.t_pred, rng);
        LossComponents out;
        out.rec_x = models::arlstm_loss(x, r, t_past);
        out.total = out.rec_x;
        return out;
    }
    throw std::invalid_argument("model_loss: unsupported model type");
}

}  // namespace dpdsr::training
