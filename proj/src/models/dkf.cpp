#include "dpdsr/models/dkf.hpp"

#include <stdexcept>

namespace dpdsr::models {

DkfParams DkfParams::make(const DkfConfig& config, Rng& rng) {
    if (config.d_x == 0 || config.d_z == 0 || config.hidden == 0)
        throw std::invalid_argument("dkf: dimensions must be positive");
    DkfParams p;
    p.config = config;
    p.f_hidden = Linear::make(config.d_z, config.hidden, rng);
    p.f_output = Linear::make(config.hidden, config.d_z, rng);
    p.g = Linear::make(config.d_z, config.d_x, rng);
    p.log_sigma_eps2 = ad::Tensor::parameter({}, {config.log_sigma_eps2});
    const auto& e = config.encoder;
    p.stack = ConvStack::make({config.d_x, e.channels, e.kernel, e.layers, ad::Padding::symmetric}, rng);
    p.lstm = make_lstm(e.channels + config.d_z, e.lstm_hidden, rng);
    p.head = Linear::make(e.lstm_hidden, 2 * config.d_z, rng);
    return p;
}

ad::Tensor DkfParams::drift(const ad::Tensor& z) const { return ad::add(z, f_output(ad::relu(f_hidden(z)))); }

void DkfParams::collect(const std::string& prefix, ParameterList& out) const {
    f_hidden.collect(prefix + ".f_hidden", out);
    f_output.collect(prefix + ".f_output", out);
    g.collect(prefix + ".g", out);
    out.push_back({prefix + ".log_sigma_eps2", log_sigma_eps2});
    stack.collect(prefix + ".encoder.conv", out);
    collect_lstm(lstm, prefix + ".encoder.lstm", out);
    head.collect(prefix + ".encoder.head", out);
}

DkfPosterior dkf_posterior(const ad::Tensor& x, const DkfParams& params, const std::vector<ad::Tensor>& xi) {
    if (x.rank() != 3 || x.dim(2) != params.config.d_x)
        throw ad::ShapeError("dkf: input shape " + ad::to_string(x.shape()) + " does not match d_x");
    const std::size_t batch = x.dim(0), steps = x.dim(1), dz = params.config.d_z;
    if (!xi.empty() && xi.size() != steps) throw std::invalid_argument("dkf: noise length does not match the input");
    const std::size_t hidden = params.lstm.hidden_size();
    const auto features = params.stack(x);
    DkfPosterior post;
    ad::LstmState state{ad::Tensor::zeros({batch, hidden}), ad::Tensor::zeros({batch, hidden})};
    ad::Tensor previous = ad::Tensor::zeros({batch, dz});
    for (std::size_t t = 0; t < steps; ++t) {
        state = ad::lstm_cell(state, ad::concat({ad::select(features, 1, t), previous}, 1), params.lstm);
        auto out = params.head(state.h);
        auto mu = ad::slice(out, 1, 0, dz);
        auto logvar = ad::clamp(ad::slice(out, 1, dz, 2 * dz), kLogVarMin, kLogVarMax);
        auto z = xi.empty() ? mu : ad::add(mu, ad::mul(ad::exp(ad::scale(logvar, 0.5)), xi[t]));
        post.z.push_back(z);
        post.mu.push_back(mu);
        post.logvar.push_back(logvar);
        previous = z;
    }
    return post;
}

ad::Tensor kl_gaussians_logvar(const ad::Tensor& mu_q, const ad::Tensor& logvar_q, const ad::Tensor& mu_p,
                               const ad::Tensor& logvar_p) {
    auto ratio = ad::exp(ad::sub(logvar_q, logvar_p));
    auto mahal = ad::mul(ad::square(ad::sub(mu_q, mu_p)), ad::exp(ad::neg(logvar_p)));
    auto terms = ad::sub(ad::add_scalar(ad::add(ratio, mahal), -1.0), ad::sub(logvar_q, logvar_p));
    return ad::scale(ad::sum_axis(terms, terms.rank() - 1), 0.5);
}

DkfTerms dkf_terms(const ad::Tensor& x, const DkfParams& params, double log_sigma_eta2, std::size_t trim,
                   const std::vector<ad::Tensor>& xi) {
    const std::size_t batch = x.dim(0), steps = x.dim(1), dz = params.config.d_z;
    if (2 * trim >= steps) throw std::invalid_argument("dkf: trim leaves no steps");
    const auto post = dkf_posterior(x, params, xi);
    const auto eta = ad::Tensor::scalar(log_sigma_eta2);
    const auto zeros = ad::Tensor::zeros({batch, dz});
    ad::Tensor rec, kl;
    for (std::size_t t = trim; t < steps - trim; ++t) {
        auto r = ad::gaussian_nll_logvar(ad::select(x, 1, t), params.observe(post.z[t]), eta);
        ad::Tensor k;
        if (t == 0) {
            k = ad::sum(kl_gaussians_logvar(post.mu[0], post.logvar[0], zeros, zeros));
        } else {
            k = ad::sum(kl_gaussians_logvar(post.mu[t], post.logvar[t], params.drift(post.z[t - 1]),
                                            params.log_sigma_eps2));
        }
        rec = rec.defined() ? ad::add(rec, r) : r;
        kl = kl.defined() ? ad::add(kl, k) : k;
    }
    const double inv = 1.0 / static_cast<double>(batch);
    return {ad::scale(rec, inv), ad::scale(kl, inv)};
}

DkfTerms dkf_terms(const ad::Tensor& x, const DkfParams& params, double log_sigma_eta2, std::size_t trim, Rng& rng) {
    std::vector<ad::Tensor> xi;
    for (std::size_t t = 0; t < x.dim(1); ++t) xi.push_back(standard_normal({x.dim(0), params.config.d_z}, rng));
    return dkf_terms(x, params, log_sigma_eta2, trim, xi);
}

ad::Tensor dkf_elbo(const ad::Tensor& x, const DkfParams& params, double log_sigma_eta2, std::uint64_t seed) {
    Rng rng = make_rng(seed, "dkf-posterior");
    return dkf_terms(x, params, log_sigma_eta2, 0, rng).total();
}

}  // namespace dpdsr::models
