#include "dpdsr/models/dpdsr.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dpdsr::models {

std::size_t GenerativeConfig::zhat_dim() const { return d_zhat == 0 ? d_z - 1 : d_zhat; }

void GenerativeConfig::validate() const {
    if (d_x == 0 || d_z == 0 || d_eps == 0 || hidden == 0 || g_hidden == 0)
        throw std::invalid_argument("generative model: dimensions must be positive");
    if (d_zhat == 0 && d_z < 2)
        throw std::invalid_argument("generative model: d_z must be at least 2 when d_zhat defaults to d_z - 1");
    if (zhat_dim() > d_z) throw std::invalid_argument("generative model: d_zhat exceeds d_z");
}

GenerativeParams GenerativeParams::make(const GenerativeConfig& config, Rng& rng) {
    config.validate();
    GenerativeParams p;
    p.config = config;
    p.f_hidden = Linear::make(config.d_z, config.hidden, rng);
    p.f_output = Linear::make(config.hidden, config.d_z, rng);
    p.g = Mlp::make(config.d_z, config.g_hidden, config.d_x, rng);
    const std::size_t dh = config.zhat_dim();
    if (dh < config.d_z) p.f_init = Linear::make(dh, config.d_z - dh, rng);
    const double gain = config.stochastic ? config.noise_gain : 0.0;
    p.noise_gain = ad::Tensor::parameter({config.d_eps}, std::vector<double>(config.d_eps, gain));
    return p;
}

ad::Tensor GenerativeParams::drift(const ad::Tensor& z) const {
    return ad::add(z, f_output(ad::relu(f_hidden(z))));
}

ad::Tensor GenerativeParams::inject(const ad::Tensor& eps) const {
    const std::size_t n = eps.dim(0);
    auto last = ad::matmul(eps, ad::reshape(noise_gain, {config.d_eps, 1}));
    if (config.d_z == 1) return last;
    return ad::concat({ad::Tensor::zeros({n, config.d_z - 1}), last}, 1);
}

ad::Tensor GenerativeParams::evolve(const ad::Tensor& z, const ad::Tensor& eps) const {
    if (z.rank() != 2 || z.dim(1) != config.d_z)
        throw ad::ShapeError("evolve_step: state shape " + ad::to_string(z.shape()) + " does not match d_z=" +
                             std::to_string(config.d_z));
    auto pre = drift(z);
    if (eps.defined()) {
        if (eps.rank() != 2 || eps.dim(0) != z.dim(0) || eps.dim(1) != config.d_eps)
            throw ad::ShapeError("evolve_step: noise shape " + ad::to_string(eps.shape()) + " does not match state " +
                                 ad::to_string(z.shape()));
        pre = ad::add(pre, inject(eps));
    }
    return ad::tanh(pre);
}

ad::Tensor GenerativeParams::observe(const ad::Tensor& z) const { return g(z); }

ad::Tensor GenerativeParams::complete(const ad::Tensor& zhat) const {
    if (!f_init) return zhat;
    return ad::concat({zhat, (*f_init)(zhat)}, zhat.rank() - 1);
}

void GenerativeParams::collect(const std::string& prefix, ParameterList& out) const {
    f_hidden.collect(prefix + ".f_hidden", out);
    f_output.collect(prefix + ".f_output", out);
    g.collect(prefix + ".g", out);
    if (f_init) f_init->collect(prefix + ".f_init", out);
    if (config.stochastic) out.push_back({prefix + ".noise_gain", noise_gain});
}

std::vector<ad::Tensor> GenerativeParams::g_weights() const { return {g.hidden.weight, g.output.weight}; }

ad::Tensor evolve_step(const ad::Tensor& z, const ad::Tensor& eps, const GenerativeParams& params) {
    return params.evolve(z, eps);
}

ad::Tensor observe(const ad::Tensor& z, const GenerativeParams& params) { return params.observe(z); }

StateEncoder StateEncoder::make(std::size_t d_x, std::size_t d_out, const EncoderConfig& config, bool causal,
                                Rng& rng) {
    ConvStackConfig sc{d_x, config.channels, config.kernel, config.layers,
                       causal ? ad::Padding::causal : ad::Padding::symmetric};
    StateEncoder e;
    e.stack = ConvStack::make(sc, rng);
    e.head = Linear::make(config.channels, d_out, rng);
    return e;
}

ad::Tensor StateEncoder::operator()(const ad::Tensor& x) const { return head(stack(x)); }

void StateEncoder::collect(const std::string& prefix, ParameterList& out) const {
    stack.collect(prefix + ".conv", out);
    head.collect(prefix + ".head", out);
}

ad::Tensor encode_states(const ad::Tensor& x, const StateEncoder& encoder) { return encoder(x); }

ad::Tensor PosteriorSample::logq(std::size_t begin, std::size_t end) const {
    if (begin >= end || end > steps()) throw std::out_of_range("PosteriorSample::logq: bad step range");
    ad::Tensor total = log_q[begin];
    for (std::size_t t = begin + 1; t < end; ++t) total = ad::add(total, log_q[t]);
    return total;
}

void PosteriorSample::append(const ad::Tensor& mu, const ad::Tensor& logvar, const ad::Tensor& xi) {
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    auto e = ad::add(mu, ad::mul(ad::exp(ad::scale(logvar, 0.5)), xi));
    // log N(eps | mu, var) written through xi so the pathwise gradient is exact
    std::vector<double> offset(xi.numel());
    for (std::size_t i = 0; i < offset.size(); ++i) offset[i] = half_log_2pi + 0.5 * xi[i] * xi[i];
    auto lq = ad::neg(ad::add(ad::scale(logvar, 0.5), ad::Tensor::from(xi.shape(), std::move(offset))));
    eps.push_back(e);
    this->mu.push_back(mu);
    this->logvar.push_back(logvar);
    log_q.push_back(ad::sum_axis(lq, lq.rank() - 1));
}

NoiseEncoder NoiseEncoder::make(std::size_t d_x, std::size_t d_zhat, std::size_t d_eps, const EncoderConfig& config,
                                Rng& rng) {
    NoiseEncoder e;
    e.d_eps = d_eps;
    e.stack = ConvStack::make({d_x + d_zhat, config.channels, config.kernel, config.layers, ad::Padding::symmetric},
                              rng);
    e.lstm = make_lstm(config.channels + d_eps, config.lstm_hidden, rng);
    e.head = Linear::make(config.lstm_hidden, 2 * d_eps, rng);
    return e;
}

PosteriorSample NoiseEncoder::sample(const ad::Tensor& x, const ad::Tensor& zhat, std::size_t mc, Rng& rng) const {
    if (mc == 0) throw std::invalid_argument("encode_noise: mc must be positive");
    if (x.rank() != 3 || zhat.rank() != 3 || x.dim(0) != zhat.dim(0) || x.dim(1) != zhat.dim(1))
        throw ad::ShapeError("encode_noise: x " + ad::to_string(x.shape()) + " and zhat " +
                             ad::to_string(zhat.shape()) + " disagree");
    const std::size_t steps = x.dim(1);
    const std::size_t rows = x.dim(0) * mc;
    const std::size_t hidden = lstm.hidden_size();
    const auto features = ad::repeat_rows(stack(ad::concat({x, zhat}, 2)), mc);
    PosteriorSample s;
    s.eps.reserve(steps);
    s.mu.reserve(steps);
    s.logvar.reserve(steps);
    s.log_q.reserve(steps);
    ad::LstmState state{ad::Tensor::zeros({rows, hidden}), ad::Tensor::zeros({rows, hidden})};
    ad::Tensor previous = ad::Tensor::zeros({rows, d_eps});
    for (std::size_t t = 0; t < steps; ++t) {
        state = ad::lstm_cell(state, ad::concat({ad::select(features, 1, t), previous}, 1), lstm);
        auto out = head(state.h);
        auto mu = ad::slice(out, 1, 0, d_eps);
        auto logvar = ad::clamp(ad::slice(out, 1, d_eps, 2 * d_eps), kLogVarMin, kLogVarMax);
        s.append(mu, logvar, standard_normal({rows, d_eps}, rng));
        previous = s.eps.back();
    }
    return s;
}

void NoiseEncoder::collect(const std::string& prefix, ParameterList& out) const {
    stack.collect(prefix + ".conv", out);
    collect_lstm(lstm, prefix + ".lstm", out);
    head.collect(prefix + ".head", out);
}

PosteriorSample encode_noise(const ad::Tensor& x, const ad::Tensor& zhat, const NoiseEncoder& encoder,
                             std::uint64_t seed, std::size_t mc) {
    Rng rng = make_rng(seed, "posterior-noise");
    return encoder.sample(x, zhat, mc, rng);
}

std::vector<ad::Tensor> rollout_teacher_forced(const ad::Tensor& zhat, const std::vector<ad::Tensor>& eps,
                                               std::size_t tau, const GenerativeParams& params) {
    if (tau < 1) throw std::invalid_argument("rollout_teacher_forced: tau must be at least 1");
    const std::size_t dh = params.config.zhat_dim();
    const std::size_t dz = params.config.d_z;
    if (zhat.rank() != 3 || zhat.dim(2) != dh)
        throw ad::ShapeError("rollout_teacher_forced: zhat shape " + ad::to_string(zhat.shape()) +
                             " does not match d_zhat=" + std::to_string(dh));
    const std::size_t steps = zhat.dim(1);
    if (!eps.empty() && eps.size() != steps)
        throw std::invalid_argument("rollout_teacher_forced: expected " + std::to_string(steps) + " noise steps, got " +
                                    std::to_string(eps.size()));
    std::vector<ad::Tensor> out;
    out.reserve(steps);
    out.push_back(params.complete(ad::select(zhat, 1, 0)));
    for (std::size_t t = 0; t + 1 < steps; ++t) {
        ad::Tensor input = out[t];
        if (t > 0 && t % tau == 0) {
            auto teacher = ad::select(zhat, 1, t);
            input = dh == dz ? teacher : ad::concat({teacher, ad::slice(out[t], 1, dh, dz)}, 1);
        }
        out.push_back(params.evolve(input, eps.empty() ? ad::Tensor{} : eps[t]));
    }
    return out;
}

}  // namespace dpdsr::models
