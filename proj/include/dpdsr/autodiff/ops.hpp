#pragma once

#include <vector>

#include "dpdsr/autodiff/tensor.hpp"

namespace dpdsr::ad {

// Elementwise binary ops. Operands must have equal shapes, or one operand's
// shape must be a trailing suffix of the other's (a scalar broadcasts to
// anything, a [C] bias broadcasts over [N,C] or [B,T,C]).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor neg(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor abs(const Tensor& a);
/// Values outside [lo, hi] are pinned and pass no gradient.
Tensor clamp(const Tensor& a, double lo, double hi);

/// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Reduce one axis away.
Tensor sum_axis(const Tensor& a, std::size_t axis);
Tensor mean_axis(const Tensor& a, std::size_t axis);

Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
/// Slice of width one with the axis removed.
Tensor select(const Tensor& a, std::size_t axis, std::size_t index);
/// Inverse of select: stacks equal-shape parts along a new axis.
Tensor stack(const std::vector<Tensor>& parts, std::size_t axis);
/// `copies` concatenated copies along axis 0.
Tensor repeat_rows(const Tensor& a, std::size_t copies);

enum class Padding { causal, symmetric };

/// Dilated 1-D convolution over [B,T,C_in] with kernel [k,C_in,C_out].
/// Both padding modes preserve the sequence length. Causal pads
/// (k-1)*dilation zeros on the left; symmetric splits that total with the
/// odd element on the left.
Tensor conv1d(const Tensor& input, const Tensor& kernel, std::size_t dilation, Padding padding);

/// Receptive field of a stack of dilated convolutions with a shared kernel size.
std::size_t receptive_field(std::size_t kernel_size, const std::vector<std::size_t>& dilations);

// Gaussian likelihood helpers, summed over all components.

/// 0.5*log(2*pi*var) + (x-mu)^2/(2*var). Throws std::domain_error if var <= 0.
Tensor gaussian_nll(const Tensor& x, const Tensor& mu, const Tensor& var);
/// Same quantity with a log-variance argument.
Tensor gaussian_nll_logvar(const Tensor& x, const Tensor& mu, const Tensor& logvar);
/// KL(N(mu, diag var) || N(0, I)) = 0.5*sum(var + mu^2 - 1 - log var).
Tensor kl_diag_gaussian(const Tensor& mu, const Tensor& var);
Tensor kl_diag_gaussian_logvar(const Tensor& mu, const Tensor& logvar);

}  // namespace dpdsr::ad
