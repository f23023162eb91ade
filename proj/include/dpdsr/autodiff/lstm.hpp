#pragma once

#include "dpdsr/autodiff/ops.hpp"

namespace dpdsr::ad {

/// Gate weights of a standard LSTM cell, gate order (input, forget,
/// candidate, output) along the 4*hidden axis.
struct LstmParams {
    Tensor w_input;   // [d_in, 4*hidden]
    Tensor w_hidden;  // [hidden, 4*hidden]
    Tensor bias;      // [4*hidden]

    std::size_t input_size() const { return w_input.dim(0); }
    std::size_t hidden_size() const { return w_hidden.dim(0); }
};

struct LstmState {
    Tensor h;  // [N, hidden]
    Tensor c;  // [N, hidden]
};

/// c' = f*c + i*g, h' = o*tanh(c') with sigmoid gates and a tanh candidate.
LstmState lstm_cell(const LstmState& state, const Tensor& x, const LstmParams& params);

}  // namespace dpdsr::ad
