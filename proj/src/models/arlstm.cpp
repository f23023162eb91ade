#include "dpdsr/models/arlstm.hpp"

#include <random>
#include <stdexcept>

namespace dpdsr::models {

ArLstmParams ArLstmParams::make(const ArLstmConfig& config, Rng& rng) {
    if (config.d_x == 0 || config.hidden == 0 || config.code == 0 || config.init_hidden == 0)
        throw std::invalid_argument("arlstm: dimensions must be positive");
    ArLstmParams p;
    p.config = config;
    const auto& e = config.encoder;
    p.stack = ConvStack::make({config.d_x, e.channels, e.kernel, e.layers, ad::Padding::causal}, rng);
    p.code_head = Linear::make(e.channels, config.code, rng);
    p.init = Mlp::make(config.code, config.init_hidden, 2 * config.hidden + config.d_x, rng);
    p.lstm = make_lstm(config.d_x, config.hidden, rng);
    p.head = Linear::make(config.hidden, 2 * config.d_x, rng);
    return p;
}

ad::Tensor ArLstmParams::initial_state(const ad::Tensor& past) const {
    if (past.rank() != 3 || past.dim(1) == 0 || past.dim(2) != config.d_x)
        throw ad::ShapeError("arlstm: past window shape " + ad::to_string(past.shape()) + " is invalid");
    const auto features = stack(past);
    return init(code_head(ad::select(features, 1, past.dim(1) - 1)));
}

ad::Tensor ArLstmParams::step(const ad::Tensor& state, const ad::Tensor& xi, ad::Tensor* mu_out,
                              ad::Tensor* logvar_out) const {
    const std::size_t h = config.hidden, dx = config.d_x;
    if (state.rank() != 2 || state.dim(1) != state_dim())
        throw ad::ShapeError("arlstm: state shape " + ad::to_string(state.shape()) + " is invalid");
    ad::LstmState s{ad::slice(state, 1, 0, h), ad::slice(state, 1, h, 2 * h)};
    s = ad::lstm_cell(s, ad::slice(state, 1, 2 * h, 2 * h + dx), lstm);
    auto out = head(s.h);
    auto mu = ad::slice(out, 1, 0, dx);
    auto logvar = ad::clamp(ad::slice(out, 1, dx, 2 * dx), kLogVarMin, kLogVarMax);
    auto sample = xi.defined() ? ad::add(mu, ad::mul(ad::exp(ad::scale(logvar, 0.5)), xi)) : mu;
    if (mu_out) *mu_out = mu;
    if (logvar_out) *logvar_out = logvar;
    return ad::concat({s.h, s.c, sample}, 1);
}

void ArLstmParams::collect(const std::string& prefix, ParameterList& out) const {
    stack.collect(prefix + ".encoder.conv", out);
    code_head.collect(prefix + ".encoder.code", out);
    init.collect(prefix + ".encoder.init", out);
    collect_lstm(lstm, prefix + ".lstm", out);
    head.collect(prefix + ".head", out);
}

ArLstmRollout arlstm_rollout(const ad::Tensor& x, const ArLstmParams& params, double gamma, std::size_t t_past,
                             std::size_t t_pred, Rng& rng) {
    if (x.rank() != 3) throw ad::ShapeError("arlstm_rollout: expected [B,T,d_x], got " + ad::to_string(x.shape()));
    if (t_past == 0 || t_pred == 0 || t_past + t_pred > x.dim(1))
        throw std::invalid_argument("arlstm_rollout: T_past + T_pred = " + std::to_string(t_past + t_pred) +
                                    " exceeds the chunk length " + std::to_string(x.dim(1)));
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("arlstm_rollout: gamma must lie in [0, 1]");
    const std::size_t batch = x.dim(0), h = params.config.hidden, dx = params.config.d_x;
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    const auto init = params.initial_state(ad::slice(x, 1, 0, t_past));
    ad::LstmState s{ad::slice(init, 1, 0, h), ad::slice(init, 1, h, 2 * h)};
    ad::Tensor input = ad::slice(init, 1, 2 * h, 2 * h + dx);
    ArLstmRollout r;
    for (std::size_t i = 0; i < t_pred; ++i) {
        r.inputs.push_back(input);
        s = ad::lstm_cell(s, input, params.lstm);
        auto out = params.head(s.h);
        auto mu = ad::slice(out, 1, 0, dx);
        auto logvar = ad::clamp(ad::slice(out, 1, dx, 2 * dx), kLogVarMin, kLogVarMax);
        auto sample = ad::add(mu, ad::mul(ad::exp(ad::scale(logvar, 0.5)), standard_normal({batch, dx}, rng)));
        r.mu.push_back(mu);
        r.logvar.push_back(logvar);
        r.samples.push_back(sample);

        std::vector<double> own(batch * dx), data_mask(batch * dx);
        for (std::size_t b = 0; b < batch; ++b) {
            const double m = coin(rng) < gamma ? 1.0 : 0.0;
            for (std::size_t d = 0; d < dx; ++d) {
                own[b * dx + d] = m;
                data_mask[b * dx + d] = 1.0 - m;
            }
        }
        auto data = ad::select(x, 1, t_past + i);
        input = ad::add(ad::mul(sample.detach(), ad::Tensor::from({batch, dx}, own)),
                        ad::mul(data, ad::Tensor::from({batch, dx}, data_mask)));
    }
    return r;
}

ArLstmRollout arlstm_rollout(const ad::Tensor& x, const ArLstmParams& params, double gamma, std::size_t t_past,
                             std::size_t t_pred, std::uint64_t seed) {
    Rng rng = make_rng(seed, "arlstm-rollout");
    return arlstm_rollout(x, params, gamma, t_past, t_pred, rng);
}

ad::Tensor arlstm_loss(const ad::Tensor& x, const ArLstmRollout& rollout, std::size_t t_past) {
    ad::Tensor total;
    for (std::size_t i = 0; i < rollout.mu.size(); ++i) {
        auto nll = ad::gaussian_nll_logvar(ad::select(x, 1, t_past + i), rollout.mu[i], rollout.logvar[i]);
        total = total.defined() ? ad::add(total, nll) : nll;
    }
    return ad::scale(total, 1.0 / static_cast<double>(x.dim(0)));
}

}  // namespace dpdsr::models
