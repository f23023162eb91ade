#include "dpdsr/autodiff/lstm.hpp"

#include <Eigen/Core>

namespace dpdsr::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// Vectorized through exp; tanh(x) = 1 - 2/(e^{2x} + 1) keeps both tails exact.
template <class A>
auto logistic(const A& a) {
    return (1.0 + (-a).exp()).inverse();
}
template <class A>
auto tanh_via_exp(const A& a) {
    return 1.0 - 2.0 * ((2.0 * a).exp() + 1.0).inverse();
}

}  // namespace

LstmState lstm_cell(const LstmState& state, const Tensor& x, const LstmParams& params) {
    const std::size_t hidden = params.hidden_size();
    if (params.w_input.rank() != 2 || params.w_hidden.rank() != 2 || params.w_input.dim(1) != 4 * hidden ||
        params.w_hidden.dim(1) != 4 * hidden || params.bias.shape() != Shape{4 * hidden}) {
        throw ShapeError("lstm_cell: inconsistent gate weights " + to_string(params.w_input.shape()) + ", " +
                         to_string(params.w_hidden.shape()) + ", " + to_string(params.bias.shape()));
    }
    if (x.rank() != 2 || x.dim(1) != params.input_size() || state.h.rank() != 2 || state.h.dim(1) != hidden ||
        state.c.shape() != state.h.shape() || x.dim(0) != state.h.dim(0)) {
        throw ShapeError("lstm_cell: dimension mismatch x " + to_string(x.shape()) + " h " +
                         to_string(state.h.shape()) + " c " + to_string(state.c.shape()));
    }
    const auto n = static_cast<Eigen::Index>(x.dim(0));
    const auto din = static_cast<Eigen::Index>(x.dim(1));
    const auto H = static_cast<Eigen::Index>(hidden);

    // activated gates, columns (i, f, g, o), kept for the backward pass
    auto act = std::make_shared<RowMat>(n, 4 * H);
    act->noalias() = ConstMapMat(x.data().data(), n, din) * ConstMapMat(params.w_input.data().data(), din, 4 * H);
    act->noalias() += ConstMapMat(state.h.data().data(), n, H) * ConstMapMat(params.w_hidden.data().data(), H, 4 * H);
    act->rowwise() += Eigen::Map<const Eigen::RowVectorXd>(params.bias.data().data(), 4 * H);
    auto gates = act->array();
    gates.leftCols(2 * H) = logistic(gates.leftCols(2 * H));
    gates.middleCols(2 * H, H) = tanh_via_exp(gates.middleCols(2 * H, H));
    gates.rightCols(H) = logistic(gates.rightCols(H));

    // output rows are [h' | c']
    Buffer out(static_cast<std::size_t>(n * 2 * H));
    MapMat o(out.data(), n, 2 * H);
    const auto c_prev = ConstMapMat(state.c.data().data(), n, H).array();
    o.rightCols(H).array() = gates.middleCols(H, H) * c_prev + gates.leftCols(H) * gates.middleCols(2 * H, H);
    auto tanh_c = std::make_shared<RowMat>(n, H);
    tanh_c->array() = tanh_via_exp(o.rightCols(H).array());
    o.leftCols(H).array() = gates.rightCols(H) * tanh_c->array();

    const Tensor joint = make_result(
        "lstm_cell", Shape{x.dim(0), 2 * hidden}, std::move(out), {x, state.h, state.c, params.w_input,
                                                                     params.w_hidden, params.bias},
        [act, tanh_c, n, din, H](Node& self) {
            const auto g = ConstMapMat(self.grad.data(), n, 2 * H).array();
            const auto a = act->array();
            const auto i = a.leftCols(H), f = a.middleCols(H, H), gg = a.middleCols(2 * H, H), o = a.rightCols(H);
            const auto tc = tanh_c->array();
            Node& nx = *self.inputs[0];
            Node& nh = *self.inputs[1];
            Node& nc = *self.inputs[2];
            const RowMat dc = g.rightCols(H) + g.leftCols(H) * o * (1.0 - tc.square());
            RowMat da(n, 4 * H);
            const auto c_prev = ConstMapMat(nc.value.data(), n, H).array();
            da.leftCols(H).array() = dc.array() * gg * i * (1.0 - i);
            da.middleCols(H, H).array() = dc.array() * c_prev * f * (1.0 - f);
            da.middleCols(2 * H, H).array() = dc.array() * i * (1.0 - gg.square());
            da.rightCols(H).array() = g.leftCols(H) * tc * o * (1.0 - o);
            if (nc.requires_grad) MapMat(nc.ensure_grad().data(), n, H).array() += dc.array() * f;
            Node& nwi = *self.inputs[3];
            Node& nwh = *self.inputs[4];
            Node& nb = *self.inputs[5];
            if (nx.requires_grad)
                MapMat(nx.ensure_grad().data(), n, din).noalias() +=
                    da * ConstMapMat(nwi.value.data(), din, 4 * H).transpose();
            if (nh.requires_grad)
                MapMat(nh.ensure_grad().data(), n, H).noalias() +=
                    da * ConstMapMat(nwh.value.data(), H, 4 * H).transpose();
            if (nwi.requires_grad)
                MapMat(nwi.ensure_grad().data(), din, 4 * H).noalias() +=
                    ConstMapMat(nx.value.data(), n, din).transpose() * da;
            if (nwh.requires_grad)
                MapMat(nwh.ensure_grad().data(), H, 4 * H).noalias() +=
                    ConstMapMat(nh.value.data(), n, H).transpose() * da;
            if (nb.requires_grad)
                Eigen::Map<Eigen::RowVectorXd>(nb.ensure_grad().data(), 4 * H) += da.colwise().sum();
        });
    return {slice(joint, 1, 0, hidden), slice(joint, 1, hidden, 2 * hidden)};
}

}  // namespace dpdsr::ad
