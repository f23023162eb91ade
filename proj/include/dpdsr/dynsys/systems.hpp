#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "dpdsr/dynsys/integrators.hpp"

namespace dpdsr::dynsys {

struct LorenzParams {
    double s = 10.0;
    double r = 28.0;
    double b = 2.667;
};
OdeSpec lorenz(const LorenzParams& p = {});

/// Two coupled mitotic oscillators; state (C1, M1, X1, C2, M2, X2).
struct CellCycleParams {
    double v_i = 0.05, K_im = 0.65, v_d = 0.025, K_d = 0.02, k_d = 0.001;
    double V_M1 = 0.3, K_c = 0.5, V_2 = 0.15, V_M3 = 0.1, V_4 = 0.05;
    double K_1 = 0.01, K_2 = 0.01, K_3 = 0.01, K_4 = 0.01;
};
OdeSpec cell_cycle(const CellCycleParams& p = {});

/// Cubic bistable channel followed by four exponential smoothing stages.
struct DoubleWellParams {
    double alpha = 0.4;
    double sigma_squared = 0.2;
    std::size_t stages = 5;
};
SdeSpec double_well(const DoubleWellParams& p = {});

enum class ConnectivityScaling {
    g_squared_over_n,  ///< J_ij ~ N(0, g^2/n): the chaotic regime for g > 1
    g_over_n_squared,  ///< J_ij ~ N(0, g/n^2): strongly contracting
};

struct ChaoticRnnParams {
    std::size_t n = 1000;
    double g = 2.0;
    ConnectivityScaling scaling = ConnectivityScaling::g_squared_over_n;
};

/// dh/dt = -h + J tanh(h). The connectivity is drawn once from `seed` and
/// stored row-major in `connectivity`.
struct ChaoticRnn {
    OdeSpec spec;
    std::shared_ptr<const std::vector<double>> connectivity;
    double connectivity_variance = 0.0;
};
ChaoticRnn chaotic_rnn(const ChaoticRnnParams& p, std::uint64_t seed);

/// dz/dt = -z, used for integrator checks.
OdeSpec exponential_decay(std::size_t dimension = 1);

/// (x, v)' = (v, -x).
OdeSpec harmonic_oscillator();

}  // namespace dpdsr::dynsys
