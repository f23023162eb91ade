#pragma once

#include <string>
#include <vector>

#include "dpdsr/autodiff/lstm.hpp"
#include "dpdsr/autodiff/ops.hpp"
#include "dpdsr/dynsys/rng.hpp"

namespace dpdsr::models {

struct NamedTensor {
    std::string name;
    ad::Tensor tensor;
};
using ParameterList = std::vector<NamedTensor>;

std::vector<ad::Tensor> tensors_of(const ParameterList& params);

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
ad::Tensor init_weight(ad::Shape shape, std::size_t fan_in, Rng& rng);
ad::Tensor init_bias(std::size_t n);

/// y = x W + b over the last axis; x may be [N,in] or [B,T,in].
struct Linear {
    ad::Tensor weight;  // [in, out]
    ad::Tensor bias;    // [out]

    static Linear make(std::size_t in, std::size_t out, Rng& rng);
    std::size_t in_features() const { return weight.dim(0); }
    std::size_t out_features() const { return weight.dim(1); }
    ad::Tensor operator()(const ad::Tensor& x) const;
    void collect(const std::string& prefix, ParameterList& out) const;
};

/// Two-layer perceptron with a ReLU hidden layer.
struct Mlp {
    Linear hidden;
    Linear output;

    static Mlp make(std::size_t in, std::size_t width, std::size_t out, Rng& rng);
    ad::Tensor operator()(const ad::Tensor& x) const;
    void collect(const std::string& prefix, ParameterList& out) const;
};

struct ConvStackConfig {
    std::size_t in_channels = 1;
    std::size_t channels = 24;
    std::size_t kernel = 7;
    std::size_t layers = 7;  // dilations 1, 2, 4, ...
    ad::Padding padding = ad::Padding::symmetric;

    std::vector<std::size_t> dilations() const;
    std::size_t receptive_field() const;
};

/// WaveNet-style stack: a 1x1 input projection, then per layer
/// dilated conv -> ReLU -> 1x1 conv -> residual add. Length preserving.
struct ConvStack {
    struct Layer {
        ad::Tensor dilated;  // [k, C, C]
        ad::Tensor dilated_bias;
        ad::Tensor mix;      // [1, C, C]
        ad::Tensor mix_bias;
        std::size_t dilation = 1;
    };

    ConvStackConfig config;
    ad::Tensor input;  // [1, C_in, C]
    ad::Tensor input_bias;
    std::vector<Layer> layers;

    static ConvStack make(const ConvStackConfig& config, Rng& rng);
    /// [B,T,C_in] -> [B,T,C]
    ad::Tensor operator()(const ad::Tensor& x) const;
    void collect(const std::string& prefix, ParameterList& out) const;
};

ad::LstmParams make_lstm(std::size_t in, std::size_t hidden, Rng& rng);
void collect_lstm(const ad::LstmParams& p, const std::string& prefix, ParameterList& out);

/// Log-variance clamp shared by every Gaussian head.
inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

/// Matrix of i.i.d. standard normal draws, no history.
ad::Tensor standard_normal(ad::Shape shape, Rng& rng);

}  // namespace dpdsr::models
