#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpdsr/dynsys/rng.hpp"
#include "json.hpp"

namespace dpdsr::dynsys {

/// dy/dt = drift(t, y)
using Drift = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

struct OdeSpec {
    std::string name;
    std::size_t dimension = 0;
    Drift drift;
    nlohmann::json params = nlohmann::json::object();
};

/// dz = drift(z) dt + diag(diffusion) dW. Channels with zero diffusion are
/// deterministic and draw no noise.
struct SdeSpec {
    std::string name;
    std::size_t dimension = 0;
    Drift drift;
    std::vector<double> diffusion;
    nlohmann::json params = nlohmann::json::object();
};

/// Samples in time-major order: states[k*dimension + i].
struct Trajectory {
    std::size_t dimension = 0;
    std::vector<double> times;
    std::vector<double> states;

    std::size_t size() const { return times.size(); }
    std::span<const double> row(std::size_t k) const {
        return std::span<const double>(states).subspan(k * dimension, dimension);
    }
    std::vector<double> channel(std::size_t i) const;
};

/// Receives each sample; used to stream long or wide simulations.
using Observer = std::function<void(double t, std::span<const double> y)>;

struct Rk45Options {
    double rtol = 1e-3;
    double atol = 1e-6;
    double max_step = std::numeric_limits<double>::infinity();
    double min_step = 1e-12;
};

class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
    double time() const { return time_; }

private:
    double time_;
};

/// Adaptive Dormand-Prince 5(4) with embedded error control. A step is
/// accepted when the RMS of err_i / (atol + rtol*max(|y_i|, |y_new_i|)) is
/// at most one. Samples at t0 + k*sample_dt are produced by the 4th-order
/// continuous extension.
void integrate_rk45(const OdeSpec& spec, std::span<const double> y0, double t0, double t_end, double sample_dt,
                    const Observer& observer, const Rk45Options& options = {});

Trajectory integrate_rk45(const OdeSpec& spec, std::span<const double> y0, double t0, double t_end,
                          double sample_dt, const Rk45Options& options = {});

/// z_{k+1} = z_k + drift(z_k) dt + sigma*sqrt(dt)*xi_k, recording every
/// `record_every`-th state (including the initial one).
void integrate_euler_maruyama(const SdeSpec& spec, std::span<const double> z0, double dt, double t_end, Rng& rng,
                              const Observer& observer, std::size_t record_every = 1);

Trajectory integrate_euler_maruyama(const SdeSpec& spec, std::span<const double> z0, double dt, double t_end,
                                    std::uint64_t seed, std::size_t record_every = 1);

/// Plain forward Euler on an ODE, for reference comparisons.
Trajectory integrate_euler(const OdeSpec& spec, std::span<const double> z0, double dt, double t_end);

}  // namespace dpdsr::dynsys
