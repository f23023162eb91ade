#include "dpdsr/autodiff/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace dpdsr::ad {

AdamState make_adam_state(std::span<const Tensor> params, double lr) {
    AdamState state;
    state.lr = lr;
    state.m.reserve(params.size());
    state.v.reserve(params.size());
    for (const auto& p : params) {
        state.m.emplace_back(p.numel(), 0.0);
        state.v.emplace_back(p.numel(), 0.0);
    }
    return state;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ShapeError("adam_step: optimizer state holds " + std::to_string(state.m.size()) +
                         " buffers for " + std::to_string(params.size()) + " parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& g = params[i].node()->grad;
        if (state.m[i].size() != params[i].numel() || state.v[i].size() != params[i].numel() ||
            (!g.empty() && g.size() != params[i].numel())) {
            throw ShapeError("adam_step: shape mismatch for parameter " + std::to_string(i) + " of shape " +
                             to_string(params[i].shape()));
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& g = params[i].node()->grad;
        auto value = params[i].mutable_data();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < value.size(); ++j) {
            const double gj = g.empty() ? 0.0 : g[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            value[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

double global_grad_norm(std::span<const Tensor> params) {
    double total = 0.0;
    for (const auto& p : params)
        for (double g : p.node()->grad) total += g * g;
    return std::sqrt(total);
}

double clip_global_norm(std::span<Tensor> params, double threshold) {
    if (!(threshold > 0.0)) throw std::invalid_argument("clip_global_norm: threshold must be positive");
    const double norm = global_grad_norm(params);
    if (norm > threshold) {
        const double factor = threshold / norm;
        for (auto& p : params)
            for (double& g : p.node()->grad) g *= factor;
    }
    return norm;
}

void zero_grad(std::span<Tensor> params) {
    for (auto& p : params) p.zero_grad();
}

}  // namespace dpdsr::ad
