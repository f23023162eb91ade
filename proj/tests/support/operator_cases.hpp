#pragma once

// One finite-difference case per registered operator. Shared by the unit
// tests and the acceptance suite.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dpdsr/autodiff/lstm.hpp"
#include "support/gradcheck.hpp"

namespace dpdsr::testing {

struct OperatorCase {
    std::string name;
    std::vector<ad::Tensor> inputs;
    std::function<ad::Tensor()> loss;
};

inline std::vector<OperatorCase> operator_cases(std::uint64_t seed) {
    using namespace dpdsr::ad;
    std::mt19937_64 rng(seed);
    std::vector<OperatorCase> cases;
    auto rnd = [&](Shape s, double lo = -2.0, double hi = 2.0) { return random_tensor(std::move(s), rng, lo, hi); };

    {
        auto a = rnd({3, 4}), b = rnd({3, 4});
        cases.push_back({"add", {a, b}, [=] { return contract(add(a, b)); }});
    }
    {
        auto a = rnd({2, 3, 4}), b = rnd({4});
        cases.push_back({"add_broadcast", {a, b}, [=] { return contract(add(a, b)); }});
    }
    {
        auto a = rnd({3, 4}), b = rnd({3, 4});
        cases.push_back({"sub", {a, b}, [=] { return contract(sub(a, b)); }});
    }
    {
        auto a = rnd({3}), b = rnd({5, 3});
        cases.push_back({"sub_broadcast_left", {a, b}, [=] { return contract(sub(a, b)); }});
    }
    {
        auto a = rnd({3, 4}), b = rnd({3, 4});
        cases.push_back({"mul", {a, b}, [=] { return contract(mul(a, b)); }});
    }
    {
        auto a = rnd({3, 4}), b = rnd({});
        cases.push_back({"mul_scalar_broadcast", {a, b}, [=] { return contract(mul(a, b)); }});
    }
    {
        auto a = rnd({5});
        cases.push_back({"scale", {a}, [=] { return contract(scale(a, -1.7)); }});
        cases.push_back({"add_scalar", {a}, [=] { return contract(add_scalar(a, 0.3)); }});
    }
    {
        // Keep ReLU/abs/clamp inputs away from their kinks.
        auto a = rnd({6, 5});
        for (auto& v : a.mutable_data())
            if (std::fabs(v) < 0.05) v += 0.1;
        cases.push_back({"relu", {a}, [=] { return contract(relu(a)); }});
        cases.push_back({"abs", {a}, [=] { return contract(abs(a)); }});
        auto c = rnd({6, 5});
        for (auto& v : c.mutable_data())
            if (std::fabs(std::fabs(v) - 1.0) < 0.05) v += 0.1;
        cases.push_back({"clamp", {c}, [=] { return contract(clamp(c, -1.0, 1.0)); }});
    }
    {
        auto a = rnd({4, 4});
        cases.push_back({"tanh", {a}, [=] { return contract(tanh(a)); }});
        cases.push_back({"sigmoid", {a}, [=] { return contract(sigmoid(a)); }});
        cases.push_back({"exp", {a}, [=] { return contract(exp(a)); }});
        cases.push_back({"square", {a}, [=] { return contract(square(a)); }});
    }
    {
        auto p = rnd({4, 3}, 0.2, 2.0);
        cases.push_back({"log", {p}, [=] { return contract(log(p)); }});
        cases.push_back({"sqrt", {p}, [=] { return contract(sqrt(p)); }});
    }
    {
        auto a = rnd({3, 5}), b = rnd({5, 2});
        cases.push_back({"matmul", {a, b}, [=] { return contract(matmul(a, b)); }});
    }
    {
        auto a = rnd({3, 4});
        cases.push_back({"sum", {a}, [=] { return square(sum(a)); }});
        cases.push_back({"mean", {a}, [=] { return square(mean(a)); }});
    }
    {
        auto a = rnd({2, 3, 4});
        cases.push_back({"sum_axis", {a}, [=] { return contract(sum_axis(a, 1)); }});
        cases.push_back({"mean_axis", {a}, [=] { return contract(mean_axis(a, 0)); }});
        cases.push_back({"reshape", {a}, [=] { return contract(reshape(a, {6, 4})); }});
        cases.push_back({"slice", {a}, [=] { return contract(slice(a, 2, 1, 3)); }});
        cases.push_back({"select", {a}, [=] { return contract(select(a, 1, 2)); }});
        cases.push_back({"repeat_rows", {a}, [=] { return contract(repeat_rows(a, 3)); }});
    }
    {
        auto a = rnd({2, 3, 4}), b = rnd({2, 1, 4});
        cases.push_back({"concat", {a, b}, [=] { return contract(concat({a, b}, 1)); }});
        auto c = rnd({2, 3, 4});
        cases.push_back({"stack", {a, c}, [=] { return contract(stack({a, c}, 1)); }});
    }
    {
        auto x = rnd({2, 9, 3}), w = rnd({3, 3, 2});
        cases.push_back({"conv1d_causal", {x, w}, [=] { return contract(conv1d(x, w, 2, Padding::causal)); }});
        cases.push_back(
            {"conv1d_symmetric", {x, w}, [=] { return contract(conv1d(x, w, 3, Padding::symmetric)); }});
    }
    {
        LstmParams p{rnd({3, 8}), rnd({2, 8}), rnd({8})};
        auto h = rnd({4, 2}), c = rnd({4, 2}), x = rnd({4, 3});
        cases.push_back({"lstm_cell",
                         {p.w_input, p.w_hidden, p.bias, h, c, x},
                         [=] {
                             auto next = lstm_cell({h, c}, x, p);
                             return add(contract(next.h, 1), contract(next.c, 2));
                         }});
    }
    {
        auto x = rnd({3, 2}), mu = rnd({3, 2}), var = rnd({3, 2}, 0.3, 2.0), lv = rnd({3, 2});
        cases.push_back({"gaussian_nll", {x, mu, var}, [=] { return gaussian_nll(x, mu, var); }});
        cases.push_back({"gaussian_nll_logvar", {x, mu, lv}, [=] { return gaussian_nll_logvar(x, mu, lv); }});
        cases.push_back({"kl_diag_gaussian", {mu, var}, [=] { return kl_diag_gaussian(mu, var); }});
        cases.push_back({"kl_diag_gaussian_logvar", {mu, lv}, [=] { return kl_diag_gaussian_logvar(mu, lv); }});
    }
    return cases;
}

}  // namespace dpdsr::testing
