#include "dpdsr/dynsys/systems.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace dpdsr::dynsys {

OdeSpec lorenz(const LorenzParams& p) {
    OdeSpec spec;
    spec.name = "lorenz";
    spec.dimension = 3;
    spec.params = {{"s", p.s}, {"r", p.r}, {"b", p.b}};
    spec.drift = [p](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = p.s * (y[1] - y[0]);
        dy[1] = p.r * y[0] - y[1] - y[0] * y[2];
        dy[2] = y[0] * y[1] - p.b * y[2];
    };
    return spec;
}

OdeSpec cell_cycle(const CellCycleParams& p) {
    OdeSpec spec;
    spec.name = "cell";
    spec.dimension = 6;
    spec.params = {{"v_i", p.v_i},   {"K_im", p.K_im}, {"v_d", p.v_d}, {"K_d", p.K_d}, {"k_d", p.k_d},
                   {"V_M1", p.V_M1}, {"K_c", p.K_c},   {"V_2", p.V_2}, {"V_M3", p.V_M3}, {"V_4", p.V_4},
                   {"K_1", p.K_1},   {"K_2", p.K_2},   {"K_3", p.K_3}, {"K_4", p.K_4}};
    spec.drift = [p](double, std::span<const double> y, std::span<double> dy) {
        // Both oscillators share constants; oscillator k is inhibited by the other's M.
        for (int k = 0; k < 2; ++k) {
            const double C = y[3 * k], M = y[3 * k + 1], X = y[3 * k + 2];
            const double M_other = y[3 * (1 - k) + 1];
            const double V1 = C / (p.K_c + C) * p.V_M1;
            const double V3 = M * p.V_M3;
            dy[3 * k] = p.v_i * p.K_im / (p.K_im + M_other) - p.v_d * X * C / (p.K_d + C) - p.k_d * C;
            dy[3 * k + 1] = V1 * (1.0 - M) / (p.K_1 + 1.0 - M) - p.V_2 * M / (p.K_2 + M);
            dy[3 * k + 2] = V3 * (1.0 - X) / (p.K_3 + 1.0 - X) - p.V_4 * X / (p.K_4 + X);
        }
    };
    return spec;
}

SdeSpec double_well(const DoubleWellParams& p) {
    if (p.stages < 1) throw std::invalid_argument("double_well: need at least one stage");
    SdeSpec spec;
    spec.name = "doublewell";
    spec.dimension = p.stages;
    spec.params = {{"alpha", p.alpha}, {"sigma_squared", p.sigma_squared}, {"stages", p.stages}};
    spec.diffusion.assign(p.stages, 0.0);
    spec.diffusion[0] = std::sqrt(p.sigma_squared);
    spec.drift = [p](double, std::span<const double> z, std::span<double> dz) {
        dz[0] = -z[0] * z[0] * z[0] + z[0];
        for (std::size_t i = 1; i < p.stages; ++i) dz[i] = p.alpha * (z[i - 1] - z[i]);
    };
    return spec;
}

ChaoticRnn chaotic_rnn(const ChaoticRnnParams& p, std::uint64_t seed) {
    if (p.n == 0) throw std::invalid_argument("chaotic_rnn: n must be positive");
    const double n = static_cast<double>(p.n);
    const double variance =
        p.scaling == ConnectivityScaling::g_squared_over_n ? p.g * p.g / n : p.g / (n * n);
    auto J = std::make_shared<std::vector<double>>(p.n * p.n);
    Rng rng = make_rng(seed, "rnn-connectivity");
    std::normal_distribution<double> normal(0.0, std::sqrt(variance));
    for (auto& v : *J) v = normal(rng);

    ChaoticRnn out;
    out.connectivity = J;
    out.connectivity_variance = variance;
    out.spec.name = "rnn";
    out.spec.dimension = p.n;
    out.spec.params = {{"n", p.n},
                       {"g", p.g},
                       {"connectivity_variance", variance},
                       {"scaling", p.scaling == ConnectivityScaling::g_squared_over_n ? "g^2/n" : "g/n^2"}};
    const std::size_t dim = p.n;
    // Aligned private copy: Eigen's GEMV splits work by address, so an
    // arbitrarily placed heap block would change the summation order.
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    auto Jm = std::make_shared<const RowMajor>(Eigen::Map<const RowMajor>(J->data(), dim, dim));
    out.spec.drift = [Jm, dim](double, std::span<const double> h, std::span<double> dh) {
        const Eigen::Map<const Eigen::VectorXd> hv(h.data(), dim);
        Eigen::Map<Eigen::VectorXd> out(dh.data(), dim);
        const Eigen::VectorXd rate = hv.array().tanh().matrix();
        const Eigen::VectorXd drive = *Jm * rate;
        out = drive - hv;
    };
    return out;
}

OdeSpec exponential_decay(std::size_t dimension) {
    OdeSpec spec;
    spec.name = "decay";
    spec.dimension = dimension;
    spec.drift = [](double, std::span<const double> y, std::span<double> dy) {
        for (std::size_t i = 0; i < y.size(); ++i) dy[i] = -y[i];
    };
    return spec;
}

OdeSpec harmonic_oscillator() {
    OdeSpec spec;
    spec.name = "harmonic";
    spec.dimension = 2;
    spec.drift = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = y[1];
        dy[1] = -y[0];
    };
    return spec;
}

}  // namespace dpdsr::dynsys
