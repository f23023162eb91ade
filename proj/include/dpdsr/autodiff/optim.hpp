#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dpdsr/autodiff/tensor.hpp"

namespace dpdsr::ad {

struct AdamState {
    std::uint64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moment buffers sized to `params`, zero-initialized.
AdamState make_adam_state(std::span<const Tensor> params, double lr = 1e-3);

/// One bias-corrected Adam update, in place. Parameters without a gradient
/// are treated as having a zero gradient.
void adam_step(std::span<Tensor> params, AdamState& state);

/// Global L2 norm over all parameter gradients.
double global_grad_norm(std::span<const Tensor> params);

/// Scales every gradient by threshold/N when the global norm N exceeds the
/// threshold. Returns the pre-clip norm.
double clip_global_norm(std::span<Tensor> params, double threshold);

void zero_grad(std::span<Tensor> params);

}  // namespace dpdsr::ad
