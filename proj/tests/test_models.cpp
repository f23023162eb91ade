#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "dpdsr/io/binary.hpp"
#include "dpdsr/models/model.hpp"

using namespace dpdsr;
using namespace dpdsr::models;
using Catch::Approx;

namespace {

ad::Tensor random_tensor(ad::Shape shape, std::uint64_t seed, double sd = 1.0) {
    Rng rng = make_rng(seed, "test-tensor");
    auto t = standard_normal(std::move(shape), rng);
    for (auto& v : t.mutable_data()) v *= sd;
    return t;
}

void fill(ad::Tensor t, double value) {
    for (auto& v : t.mutable_data()) v = value;
}

GenerativeParams small_generative(std::size_t d_z = 4, std::size_t d_zhat = 0) {
    GenerativeConfig c;
    c.d_z = d_z;
    c.d_zhat = d_zhat;
    c.hidden = 16;
    c.g_hidden = 8;
    Rng rng = make_rng(3, "test-gen");
    return GenerativeParams::make(c, rng);
}

EncoderConfig small_encoder() {
    EncoderConfig e;
    e.channels = 6;
    e.lstm_hidden = 5;
    return e;
}

bool same(const ad::Tensor& a, const ad::Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (std::size_t i = 0; i < a.numel(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

}  // namespace

TEST_CASE("evolve_step structure", "[models]") {
    auto p = small_generative();
    const auto z = random_tensor({10, 4}, 1, 3.0);

    SECTION("residual-only case reduces to tanh(z)") {
        fill(p.f_output.weight, 0.0);
        fill(p.f_output.bias, 0.0);
        fill(p.noise_gain, 0.0);
        const auto out = evolve_step(z, random_tensor({10, 1}, 2), p);
        for (std::size_t i = 0; i < z.numel(); ++i) REQUIRE(out[i] == std::tanh(z[i]));
    }
    SECTION("noise enters the last component only, scaled by B") {
        fill(p.noise_gain, 0.7);
        const auto eps = random_tensor({10, 1}, 2);
        const auto clean = p.evolve(z);
        const auto noisy = p.evolve(z, eps);
        const auto pre = p.drift(z);
        for (std::size_t r = 0; r < 10; ++r) {
            for (std::size_t c = 0; c < 3; ++c) REQUIRE(noisy[r * 4 + c] == clean[r * 4 + c]);
            REQUIRE(noisy[r * 4 + 3] == Approx(std::tanh(pre[r * 4 + 3] + 0.7 * eps[r])).margin(1e-15));
        }
        const auto b = p.inject(ad::Tensor::from({1, 1}, {1.0}));
        REQUIRE(b.shape() == ad::Shape{1, 4});
        REQUIRE(b[0] == 0.0);
        REQUIRE(b[1] == 0.0);
        REQUIRE(b[2] == 0.0);
        REQUIRE(b[3] == 0.7);
    }
    SECTION("outputs stay inside (-1, 1)") {
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto out = p.evolve(random_tensor({16, 4}, 100 + s, 4.0), random_tensor({16, 1}, 200 + s, 4.0));
            for (double v : out.data()) REQUIRE(std::abs(v) < 1.0);
        }
        // far outside the working range tanh saturates to +-1 in double precision
        const auto huge = p.evolve(ad::Tensor::full({1, 4}, 1e6));
        for (double v : huge.data()) REQUIRE(std::abs(v) <= 1.0);
    }
    SECTION("dimension mismatch is rejected") {
        REQUIRE_THROWS_AS(p.evolve(random_tensor({2, 3}, 1)), ad::ShapeError);
        REQUIRE_THROWS_AS(p.evolve(z, random_tensor({10, 2}, 1)), ad::ShapeError);
        REQUIRE_THROWS_AS(p.evolve(z, random_tensor({9, 1}, 1)), ad::ShapeError);
    }
    SECTION("B is fixed at zero for the deterministic variant") {
        GenerativeConfig c;
        c.d_z = 3;
        c.hidden = 4;
        c.stochastic = false;
        Rng rng = make_rng(1, "x");
        auto q = GenerativeParams::make(c, rng);
        for (double v : q.noise_gain.data()) REQUIRE(v == 0.0);
        ParameterList list;
        q.collect("g", list);
        for (const auto& n : list) REQUIRE(n.name.find("noise_gain") == std::string::npos);
    }
}

TEST_CASE("observe", "[models]") {
    auto p = small_generative();
    const auto z = random_tensor({5, 4}, 4);
    SECTION("zero weights give the output bias") {
        fill(p.g.hidden.weight, 0.0);
        fill(p.g.output.weight, 0.0);
        fill(p.g.output.bias, 0.25);
        const auto y = observe(z, p);
        for (double v : y.data()) REQUIRE(v == 0.25);
    }
    SECTION("affine in the output weights") {
        const auto y1 = p.observe(z);
        for (auto& v : p.g.output.weight.mutable_data()) v *= 2.0;
        const auto y2 = p.observe(z);
        const auto bias = p.g.output.bias[0];
        for (std::size_t i = 0; i < y1.numel(); ++i) REQUIRE(y2[i] - bias == Approx(2.0 * (y1[i] - bias)).margin(1e-14));
    }
    SECTION("one observed channel") { REQUIRE(p.observe(z).shape() == ad::Shape{5, 1}); }
}

TEST_CASE("state encoders", "[models]") {
    Rng rng = make_rng(5, "enc");
    EncoderConfig ec;  // full-size stack: 7 layers, kernel 7, 24 channels
    const auto non_causal = StateEncoder::make(1, 7, ec, false, rng);
    const auto causal = StateEncoder::make(1, 7, ec, true, rng);
    REQUIRE(non_causal.stack.config.receptive_field() == 763);

    const std::size_t T = 900;
    const auto x = random_tensor({2, T, 1}, 6);
    SECTION("length preserving") {
        REQUIRE(encode_states(x, non_causal).shape() == ad::Shape{2, T, 7});
        REQUIRE(encode_states(x, causal).shape() == ad::Shape{2, T, 7});
    }
    SECTION("causal mode ignores the future") {
        const auto base = causal(x);
        for (std::size_t cut : {0u, 17u, 450u, 898u}) {
            auto y = x.clone();
            Rng noise = make_rng(cut, "leak");
            std::normal_distribution<double> n(0.0, 5.0);
            for (std::size_t b = 0; b < 2; ++b)
                for (std::size_t t = cut + 1; t < T; ++t) y.mutable_data()[b * T + t] = n(noise);
            const auto out = causal(y);
            for (std::size_t b = 0; b < 2; ++b)
                for (std::size_t t = 0; t <= cut; ++t)
                    for (std::size_t c = 0; c < 7; ++c) {
                        const std::size_t i = (b * T + t) * 7 + c;
                        REQUIRE(std::abs(out[i] - base[i]) <= 1e-12);
                    }
        }
    }
    SECTION("non-causal output at t=0 sees exactly x[0..381]") {
        const auto base = non_causal(x);
        auto changed_at = [&](std::size_t idx) {
            auto y = x.clone();
            y.mutable_data()[idx] += 1.0;
            const auto out = non_causal(y);
            double diff = 0.0;
            for (std::size_t c = 0; c < 7; ++c) diff = std::max(diff, std::abs(out[c] - base[c]));
            return diff;
        };
        REQUIRE(changed_at(381) > 0.0);
        REQUIRE(changed_at(382) == 0.0);
        REQUIRE(changed_at(800) == 0.0);
    }
}

TEST_CASE("noise encoder", "[models]") {
    Rng rng = make_rng(7, "noise-enc");
    auto enc = NoiseEncoder::make(1, 3, 1, small_encoder(), rng);
    const auto x = random_tensor({3, 20, 1}, 8);
    const auto zhat = random_tensor({3, 20, 3}, 9);

    SECTION("shapes and mc row layout") {
        const auto s = encode_noise(x, zhat, enc, 1, 4);
        REQUIRE(s.steps() == 20);
        REQUIRE(s.rows() == 12);
        REQUIRE(s.eps[0].shape() == ad::Shape{12, 1});
    }
    SECTION("zero head gives the standard normal and zero KL") {
        fill(enc.head.weight, 0.0);
        const auto s = encode_noise(x, zhat, enc, 1, 2);
        for (std::size_t t = 0; t < s.steps(); ++t) {
            for (double m : s.mu[t].data()) REQUIRE(m == 0.0);
            const auto var = s.var(t);
            for (double v : var.data()) REQUIRE(v == 1.0);
            REQUIRE(ad::kl_diag_gaussian_logvar(s.mu[t], s.logvar[t]).item() == 0.0);
        }
    }
    SECTION("deterministic given the seed") {
        const auto a = encode_noise(x, zhat, enc, 11, 2);
        const auto b = encode_noise(x, zhat, enc, 11, 2);
        const auto c = encode_noise(x, zhat, enc, 12, 2);
        for (std::size_t t = 0; t < a.steps(); ++t) {
            REQUIRE(same(a.eps[t], b.eps[t]));
            REQUIRE(same(a.logvar[t], b.logvar[t]));
        }
        REQUIRE_FALSE(same(a.eps[5], c.eps[5]));
    }
    SECTION("log-variance clamp bounds sigma to [e^-5, e^5]") {
        for (double bias : {50.0, -50.0}) {
            fill(enc.head.bias, bias);
            const auto s = encode_noise(x, zhat, enc, 2);
            for (std::size_t t = 0; t < s.steps(); ++t)
                for (double lv : s.logvar[t].data()) {
                    const double sigma = std::exp(0.5 * lv);
                    REQUIRE(sigma >= std::exp(-5.0) * (1 - 1e-15));
                    REQUIRE(sigma <= std::exp(5.0) * (1 + 1e-15));
                    REQUIRE(sigma > 0.0);
                }
        }
    }
    SECTION("logq is the sum of the per-step Gaussian densities") {
        const auto s = encode_noise(x, zhat, enc, 3, 2);
        const auto lq = s.logq();
        for (std::size_t r = 0; r < s.rows(); ++r) {
            double expected = 0.0;
            for (std::size_t t = 0; t < s.steps(); ++t) {
                const double e = s.eps[t][r], m = s.mu[t][r], v = s.var(t)[r];
                expected += -0.5 * std::log(2 * std::numbers::pi * v) - (e - m) * (e - m) / (2 * v);
            }
            REQUIRE(lq[r] == Approx(expected).epsilon(1e-12));
        }
    }
    SECTION("reparameterized sample moves one-for-one with its mean") {
        // shifting the mean bias shifts mu_0 and therefore eps_0 by the same amount
        const double h = 1e-6;
        const auto base = encode_noise(x, zhat, enc, 4);
        enc.head.bias.mutable_data()[0] += h;
        const auto up = encode_noise(x, zhat, enc, 4);
        enc.head.bias.mutable_data()[0] -= 2 * h;
        const auto down = encode_noise(x, zhat, enc, 4);
        enc.head.bias.mutable_data()[0] += h;
        double mean_up = 0.0, mean_down = 0.0;
        for (std::size_t r = 0; r < 3; ++r) {
            mean_up += up.eps[0][r];
            mean_down += down.eps[0][r];
        }
        REQUIRE((mean_up - mean_down) / (6 * h) == Approx(1.0).epsilon(1e-8));

        enc.head.bias.zero_grad();
        const auto s = encode_noise(x, zhat, enc, 4);
        ad::backward(ad::mean(s.eps[0]));
        REQUIRE(enc.head.bias.grad()[0] == Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("teacher-forced rollout", "[models]") {
    auto p = small_generative(4);  // d_zhat = 3
    const std::size_t R = 3, T = 12;
    const auto zhat = random_tensor({R, T, 3}, 10, 0.5);
    std::vector<ad::Tensor> eps;
    for (std::size_t t = 0; t < T; ++t) eps.push_back(random_tensor({R, 1}, 20 + t));

    SECTION("initial state is completed by f_init") {
        const auto z = rollout_teacher_forced(zhat, eps, 3, p);
        REQUIRE(z.size() == T);
        const auto z0 = ad::select(zhat, 1, 0);
        const auto tail = (*p.f_init)(z0);
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t c = 0; c < 3; ++c) REQUIRE(z[0][r * 4 + c] == z0[r * 3 + c]);
            REQUIRE(z[0][r * 4 + 3] == tail[r]);
        }
    }
    SECTION("tau >= T is a free run from the initial condition") {
        const auto z = rollout_teacher_forced(zhat, eps, T, p);
        const auto z_long = rollout_teacher_forced(zhat, eps, 1000, p);
        ad::Tensor free = z[0];
        for (std::size_t t = 0; t + 1 < T; ++t) {
            free = p.evolve(free, eps[t]);
            REQUIRE(same(z[t + 1], free));
            REQUIRE(same(z_long[t + 1], free));
        }
    }
    SECTION("tau = 2 forces the even steps only") {
        const auto z = rollout_teacher_forced(zhat, eps, 2, p);
        for (std::size_t t = 0; t + 1 < T; ++t) {
            ad::Tensor in = z[t];
            if (t % 2 == 0)
                in = ad::concat({ad::select(zhat, 1, t), ad::slice(z[t], 1, 3, 4)}, 1);
            REQUIRE(same(z[t + 1], p.evolve(in, eps[t])));
        }
    }
    SECTION("tau = 1 with d_zhat = d_z feeds the teacher state every step") {
        auto full = small_generative(4, 4);
        REQUIRE_FALSE(full.f_init.has_value());
        const auto zh = random_tensor({R, T, 4}, 11, 0.5);
        const auto z = rollout_teacher_forced(zh, eps, 1, full);
        REQUIRE(same(z[0], ad::select(zh, 1, 0)));
        for (std::size_t t = 0; t + 1 < T; ++t) REQUIRE(same(z[t + 1], evolve_step(ad::select(zh, 1, t), eps[t], full)));
    }
    SECTION("no noise and bad arguments") {
        const auto z = rollout_teacher_forced(zhat, {}, 4, p);
        REQUIRE(same(z[1], p.evolve(z[0])));
        REQUIRE_THROWS_AS(rollout_teacher_forced(zhat, eps, 0, p), std::invalid_argument);
        REQUIRE_THROWS(rollout_teacher_forced(zhat, std::vector<ad::Tensor>(eps.begin(), eps.end() - 1), 2, p));
        REQUIRE_THROWS_AS(rollout_teacher_forced(random_tensor({R, T, 2}, 1), eps, 2, p), ad::ShapeError);
    }
}

TEST_CASE("deep Kalman filter", "[models]") {
    DkfConfig c;
    c.d_z = 3;
    c.hidden = 8;
    c.encoder = small_encoder();
    Rng rng = make_rng(12, "dkf");
    auto p = DkfParams::make(c, rng);

    SECTION("identity evolution, one step, standard normal posterior") {
        fill(p.f_output.weight, 0.0);
        fill(p.f_output.bias, 0.0);
        fill(p.head.weight, 0.0);
        fill(p.head.bias, 0.0);
        const auto x = random_tensor({2, 1, 1}, 13);
        const std::vector<ad::Tensor> xi{random_tensor({2, 3}, 14)};
        const double log_eta = -1.3;
        const auto terms = dkf_terms(x, p, log_eta, 0, xi);
        REQUIRE(terms.kl.item() == 0.0);
        double nll = 0.0;
        for (std::size_t b = 0; b < 2; ++b) {
            double gz = p.g.bias[0];
            for (std::size_t k = 0; k < 3; ++k) gz += xi[0][b * 3 + k] * p.g.weight[k];
            const double v = std::exp(log_eta);
            nll += 0.5 * std::log(2 * std::numbers::pi * v) + (x[b] - gz) * (x[b] - gz) / (2 * v);
        }
        REQUIRE(terms.reconstruction.item() == Approx(nll / 2).epsilon(1e-12));
        REQUIRE(terms.total().item() == Approx(nll / 2).epsilon(1e-12));
    }
    SECTION("large transition variance silences the prior's pull on f") {
        const auto x = random_tensor({2, 10, 1}, 15);
        auto kl_grad = [&](double log_eps) {
            fill(p.log_sigma_eps2, log_eps);
            p.f_output.weight.zero_grad();
            Rng r = make_rng(1, "xi");
            ad::backward(dkf_terms(x, p, 0.0, 0, r).kl);
            double norm = 0.0;
            for (double g : p.f_output.weight.grad()) norm += g * g;
            return std::sqrt(norm);
        };
        const double tight = kl_grad(-2.0);
        const double loose = kl_grad(30.0);
        REQUIRE(tight > 1e-3);
        REQUIRE(loose < 1e-12 * tight);
    }
    SECTION("finite for random inputs and clamped variances") {
        fill(p.head.bias, 40.0);
        for (std::uint64_t s = 0; s < 5; ++s) {
            const auto loss = dkf_elbo(random_tensor({2, 15, 1}, 30 + s, 3.0), p, -2.0, s);
            REQUIRE(std::isfinite(loss.item()));
        }
    }
    SECTION("closed-form Gaussian KL") {
        const auto kl = kl_gaussians_logvar(ad::Tensor::from({1, 1}, {1.0}), ad::Tensor::from({1, 1}, {std::log(2.0)}),
                                            ad::Tensor::from({1, 1}, {-0.5}), ad::Tensor::from({1, 1}, {std::log(3.0)}));
        const double expected = 0.5 * (std::log(3.0 / 2.0) + (2.0 + 2.25) / 3.0 - 1.0);
        REQUIRE(kl.item() == Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("AR-LSTM rollout", "[models]") {
    ArLstmConfig c;
    c.hidden = 6;
    c.code = 4;
    c.init_hidden = 8;
    c.encoder = small_encoder();
    Rng rng = make_rng(16, "ar");
    const auto p = ArLstmParams::make(c, rng);
    const auto x = random_tensor({4, 40, 1}, 17);
    const std::size_t t_past = 25, t_pred = 15;

    SECTION("gamma = 0 feeds the data") {
        const auto r = arlstm_rollout(x, p, 0.0, t_past, t_pred, std::uint64_t{1});
        REQUIRE(r.mu.size() == t_pred);
        for (std::size_t i = 1; i < t_pred; ++i) REQUIRE(same(r.inputs[i], ad::select(x, 1, t_past + i - 1)));
    }
    SECTION("gamma = 1 feeds the model's own samples") {
        const auto r = arlstm_rollout(x, p, 1.0, t_past, t_pred, std::uint64_t{1});
        for (std::size_t i = 1; i < t_pred; ++i) REQUIRE(same(r.inputs[i], r.samples[i - 1]));
    }
    SECTION("intermediate gamma mixes per sequence") {
        const auto r = arlstm_rollout(x, p, 0.5, t_past, t_pred, std::uint64_t{2});
        std::size_t own = 0, data = 0;
        for (std::size_t i = 1; i < t_pred; ++i)
            for (std::size_t b = 0; b < 4; ++b) {
                if (r.inputs[i][b] == r.samples[i - 1][b]) ++own;
                if (r.inputs[i][b] == x[b * 40 + t_past + i - 1]) ++data;
            }
        REQUIRE(own + data == 4 * (t_pred - 1));
        REQUIRE(own > 0);
        REQUIRE(data > 0);
    }
    SECTION("prediction window past the chunk is rejected") {
        REQUIRE_THROWS_AS(arlstm_rollout(x, p, 0.0, 30, 11, std::uint64_t{1}), std::invalid_argument);
        REQUIRE_NOTHROW(arlstm_rollout(x, p, 0.0, 30, 10, std::uint64_t{1}));
    }
    SECTION("loss is finite and differentiable") {
        auto r = arlstm_rollout(x, p, 0.3, t_past, t_pred, std::uint64_t{3});
        auto loss = arlstm_loss(x, r, t_past);
        REQUIRE(std::isfinite(loss.item()));
        ad::backward(loss);
        REQUIRE(p.lstm.w_input.has_grad());
        REQUIRE(p.stack.input.has_grad());
    }
}

TEST_CASE("model interface and checkpoints", "[models]") {
    const auto dir = std::filesystem::temp_directory_path() / "dpdsr_test_models";
    std::filesystem::remove_all(dir);
    for (Variant v : {Variant::dpdsr, Variant::spdsr, Variant::dkf, Variant::arlstm}) {
        DYNAMIC_SECTION("variant " << to_string(v)) {
            ModelConfig c;
            c.variant = v;
            c.d_z = 4;
            c.hidden = 12;
            c.g_hidden = 6;
            c.ar_hidden = 5;
            c.ar_init_hidden = 7;
            c.encoder = small_encoder();
            auto m = make_model(c, 21);
            REQUIRE(m->variant() == v);

            std::set<std::string> names;
            for (const auto& p : m->all_parameters()) REQUIRE(names.insert(p.name).second);

            const auto x = random_tensor({2, 150, 1}, 22);
            const auto e = m->embed(x);
            REQUIRE(e.dim(2) == m->state_dim());
            const auto z = m->causal_state(x);
            REQUIRE(z.shape() == ad::Shape{2, m->state_dim()});
            const auto xi = m->noise_dim() ? random_tensor({2, m->noise_dim()}, 23) : ad::Tensor{};
            const auto next = m->step(z, xi);
            REQUIRE(next.shape() == z.shape());
            REQUIRE(m->observe(next).shape() == ad::Shape{2, 1});
            REQUIRE(m->noise_dim() == (v == Variant::spdsr ? 0u : v == Variant::dkf ? 4u : 1u));

            // the causal state never uses later samples
            auto y = x.clone();
            for (std::size_t t = 100; t < 150; ++t) y.mutable_data()[t] = 9.0;
            const auto zx = m->causal_state(ad::slice(x, 1, 0, 100));
            const auto zy = m->causal_state(ad::slice(y, 1, 0, 100));
            REQUIRE(same(zx, zy));

            const auto path = dir / to_string(v);
            save_checkpoint(*m, path, 5000, 21, {{"note", "unit"}});
            const auto ck = load_checkpoint(path);
            REQUIRE(ck.iteration == 5000);
            REQUIRE(ck.seed == 21);
            REQUIRE(ck.extra.at("note") == "unit");
            REQUIRE(ck.model->config().to_json() == c.to_json());
            const auto a = m->all_parameters();
            const auto b = ck.model->all_parameters();
            REQUIRE(a.size() == b.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                REQUIRE(a[i].name == b[i].name);
                REQUIRE(same(a[i].tensor, b[i].tensor));
            }
            REQUIRE(same(ck.model->step(z, xi), next));

            const auto manifest = nlohmann::json::parse(dpdsr::io::read_file(path / "model.json"));
            REQUIRE(manifest.at("variant") == to_string(v));
            REQUIRE(manifest.at("tensors").size() == a.size());
        }
    }
    SECTION("corrupt or mismatched checkpoints are rejected") {
        ModelConfig c;
        c.d_z = 3;
        c.hidden = 5;
        c.encoder = small_encoder();
        auto m = make_model(c, 1);
        save_checkpoint(*m, dir / "a", 1, 1);
        REQUIRE_THROWS(load_checkpoint(dir / "missing"));
        auto manifest = nlohmann::json::parse(dpdsr::io::read_file(dir / "a" / "model.json"));
        manifest["config"]["hidden"] = 6;
        std::ofstream(dir / "a" / "model.json") << manifest.dump();
        REQUIRE_THROWS_WITH(load_checkpoint(dir / "a"), Catch::Matchers::ContainsSubstring("has shape"));
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("copy_parameters", "[models]") {
    ModelConfig c;
    c.d_z = 3;
    c.hidden = 5;
    c.encoder = small_encoder();
    auto a = make_model(c, 1);
    auto b = make_model(c, 2);
    const auto x = random_tensor({1, 30, 1}, 3);
    REQUIRE_FALSE(same(a->embed(x), b->embed(x)));
    copy_parameters(*a, *b);
    REQUIRE(same(a->embed(x), b->embed(x)));
}
