#include "dpdsr/models/layers.hpp"

#include <cmath>
#include <random>

namespace dpdsr::models {

std::vector<ad::Tensor> tensors_of(const ParameterList& params) {
    std::vector<ad::Tensor> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(p.tensor);
    return out;
}

ad::Tensor init_weight(ad::Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> values(ad::numel_of(shape));
    for (auto& v : values) v = dist(rng);
    return ad::Tensor::parameter(std::move(shape), std::move(values));
}

ad::Tensor init_bias(std::size_t n) { return ad::Tensor::parameter({n}, std::vector<double>(n, 0.0)); }

Linear Linear::make(std::size_t in, std::size_t out, Rng& rng) {
    return {init_weight({in, out}, in, rng), init_bias(out)};
}

ad::Tensor Linear::operator()(const ad::Tensor& x) const {
    if (x.rank() == 2) return ad::add(ad::matmul(x, weight), bias);
    if (x.rank() != 3) throw ad::ShapeError("Linear: expected rank 2 or 3 input, got " + ad::to_string(x.shape()));
    const std::size_t b = x.dim(0), t = x.dim(1);
    auto flat = ad::reshape(x, {b * t, x.dim(2)});
    return ad::reshape(ad::add(ad::matmul(flat, weight), bias), {b, t, out_features()});
}

void Linear::collect(const std::string& prefix, ParameterList& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

Mlp Mlp::make(std::size_t in, std::size_t width, std::size_t out, Rng& rng) {
    Mlp m;
    m.hidden = Linear::make(in, width, rng);
    m.output = Linear::make(width, out, rng);
    return m;
}

ad::Tensor Mlp::operator()(const ad::Tensor& x) const { return output(ad::relu(hidden(x))); }

void Mlp::collect(const std::string& prefix, ParameterList& out) const {
    hidden.collect(prefix + ".hidden", out);
    output.collect(prefix + ".output", out);
}

std::vector<std::size_t> ConvStackConfig::dilations() const {
    std::vector<std::size_t> d(layers);
    for (std::size_t i = 0; i < layers; ++i) d[i] = std::size_t{1} << i;
    return d;
}

std::size_t ConvStackConfig::receptive_field() const { return ad::receptive_field(kernel, dilations()); }

ConvStack ConvStack::make(const ConvStackConfig& config, Rng& rng) {
    ConvStack s;
    s.config = config;
    const std::size_t c = config.channels;
    s.input = init_weight({1, config.in_channels, c}, config.in_channels, rng);
    s.input_bias = init_bias(c);
    for (std::size_t d : config.dilations()) {
        Layer layer;
        layer.dilated = init_weight({config.kernel, c, c}, config.kernel * c, rng);
        layer.dilated_bias = init_bias(c);
        layer.mix = init_weight({1, c, c}, c, rng);
        layer.mix_bias = init_bias(c);
        layer.dilation = d;
        s.layers.push_back(std::move(layer));
    }
    return s;
}

ad::Tensor ConvStack::operator()(const ad::Tensor& x) const {
    auto h = ad::add(ad::conv1d(x, input, 1, config.padding), input_bias);
    for (const auto& layer : layers) {
        auto a = ad::relu(ad::add(ad::conv1d(h, layer.dilated, layer.dilation, config.padding), layer.dilated_bias));
        h = ad::add(h, ad::add(ad::conv1d(a, layer.mix, 1, config.padding), layer.mix_bias));
    }
    return h;
}

void ConvStack::collect(const std::string& prefix, ParameterList& out) const {
    out.push_back({prefix + ".input", input});
    out.push_back({prefix + ".input_bias", input_bias});
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string p = prefix + ".layer" + std::to_string(i);
        out.push_back({p + ".dilated", layers[i].dilated});
        out.push_back({p + ".dilated_bias", layers[i].dilated_bias});
        out.push_back({p + ".mix", layers[i].mix});
        out.push_back({p + ".mix_bias", layers[i].mix_bias});
    }
}

ad::LstmParams make_lstm(std::size_t in, std::size_t hidden, Rng& rng) {
    return {init_weight({in, 4 * hidden}, in, rng), init_weight({hidden, 4 * hidden}, hidden, rng),
            init_bias(4 * hidden)};
}

void collect_lstm(const ad::LstmParams& p, const std::string& prefix, ParameterList& out) {
    out.push_back({prefix + ".w_input", p.w_input});
    out.push_back({prefix + ".w_hidden", p.w_hidden});
    out.push_back({prefix + ".bias", p.bias});
}

ad::Tensor standard_normal(ad::Shape shape, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> values(ad::numel_of(shape));
    for (auto& v : values) v = dist(rng);
    return ad::Tensor::from(std::move(shape), std::move(values));
}

}  // namespace dpdsr::models
