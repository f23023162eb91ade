#include "dpdsr/dynsys/integrators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dpdsr::dynsys {

std::vector<double> Trajectory::channel(std::size_t i) const {
    std::vector<double> out(size());
    for (std::size_t k = 0; k < size(); ++k) out[k] = states[k * dimension + i];
    return out;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                 a76 = 11.0 / 84.0;
// Difference between the 5th and embedded 4th order weights.
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Continuous extension.
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 10.0;

double rms_scaled(std::span<const double> v, std::span<const double> scale) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double r = v[i] / scale[i];
        s += r * r;
    }
    return std::sqrt(s / static_cast<double>(v.size()));
}

std::size_t sample_count(double t0, double t_end, double sample_dt) {
    return static_cast<std::size_t>(std::floor((t_end - t0) / sample_dt + 1e-9)) + 1;
}

}  // namespace

void integrate_rk45(const OdeSpec& spec, std::span<const double> y0, double t0, double t_end, double sample_dt,
                    const Observer& observer, const Rk45Options& options) {
    const std::size_t n = spec.dimension;
    if (y0.size() != n) throw std::invalid_argument("integrate_rk45: initial state has wrong dimension");
    if (!(sample_dt > 0.0)) throw std::invalid_argument("integrate_rk45: sample_dt must be positive");
    if (!(t_end >= t0)) throw std::invalid_argument("integrate_rk45: t_end before t0");

    std::vector<double> y(y0.begin(), y0.end()), y_new(n), tmp(n), scale(n), err(n);
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    std::vector<double> p1(n), p2(n), p3(n), p4(n);

    const std::size_t samples = sample_count(t0, t_end, sample_dt);
    std::size_t next_sample = 0;
    auto sample_time = [&](std::size_t k) { return t0 + static_cast<double>(k) * sample_dt; };

    double t = t0;
    spec.drift(t, y, k1);
    observer(t, y);
    next_sample = 1;
    if (next_sample >= samples) return;

    // Initial step selection (Hairer, Norsett & Wanner II.4).
    for (std::size_t i = 0; i < n; ++i) scale[i] = options.atol + std::fabs(y[i]) * options.rtol;
    const double d0 = rms_scaled(y, scale);
    const double d1n = rms_scaled(k1, scale);
    double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    h0 = std::min(h0, options.max_step);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h0 * k1[i];
    spec.drift(t + h0, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) err[i] = (k2[i] - k1[i]) / h0;
    const double d2 = rms_scaled(err, scale);
    const double h1 = (d1n <= 1e-15 && d2 <= 1e-15) ? std::max(1e-6, h0 * 1e-3)
                                                     : std::pow(0.01 / std::max(d1n, d2), 1.0 / 5.0);
    double h = std::min({100.0 * h0, h1, options.max_step});

    const double t_stop = sample_time(samples - 1);
    while (next_sample < samples) {
        bool accepted = false;
        bool rejected = false;
        double err_norm = 0.0;
        while (!accepted) {
            if (h < options.min_step) {
                std::ostringstream msg;
                msg << spec.name << ": step size underflow (h=" << h << ") at t=" << t;
                throw IntegrationError(msg.str(), t);
            }
            if (t + h > t_stop) h = t_stop - t;
            if (h <= 0.0) h = options.min_step;

            for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
            spec.drift(t + c2 * h, tmp, k2);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
            spec.drift(t + c3 * h, tmp, k3);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
            spec.drift(t + c4 * h, tmp, k4);
            for (std::size_t i = 0; i < n; ++i)
                tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
            spec.drift(t + c5 * h, tmp, k5);
            for (std::size_t i = 0; i < n; ++i)
                tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
            spec.drift(t + h, tmp, k6);
            for (std::size_t i = 0; i < n; ++i)
                y_new[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
            spec.drift(t + h, y_new, k7);

            for (std::size_t i = 0; i < n; ++i) {
                err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
                scale[i] = options.atol + std::max(std::fabs(y[i]), std::fabs(y_new[i])) * options.rtol;
            }
            err_norm = rms_scaled(err, scale);
            if (!std::isfinite(err_norm)) {
                h *= kMinFactor;
                rejected = true;
                continue;
            }
            if (err_norm <= 1.0) {
                accepted = true;
            } else {
                h *= std::max(kMinFactor, kSafety * std::pow(err_norm, -0.2));
                rejected = true;
            }
        }

        // Continuous extension on [t, t+h].
        for (std::size_t i = 0; i < n; ++i) {
            const double dy = y_new[i] - y[i];
            p1[i] = dy;
            p2[i] = h * k1[i] - dy;
            p3[i] = -h * k7[i] + dy - p2[i];
            p4[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
        }
        const double t_next = t + h;
        while (next_sample < samples && sample_time(next_sample) <= t_next + 1e-12 * std::fabs(t_next)) {
            const double theta = std::clamp((sample_time(next_sample) - t) / h, 0.0, 1.0);
            const double theta1 = 1.0 - theta;
            for (std::size_t i = 0; i < n; ++i)
                tmp[i] = y[i] + theta * (p1[i] + theta1 * (p2[i] + theta * (p3[i] + theta1 * p4[i])));
            observer(sample_time(next_sample), tmp);
            ++next_sample;
        }

        t = t_next;
        y.swap(y_new);
        k1.swap(k7);
        double factor = err_norm == 0.0 ? kMaxFactor : std::min(kMaxFactor, kSafety * std::pow(err_norm, -0.2));
        // Do not grow right after a rejection.
        if (rejected) factor = std::min(factor, 1.0);
        h = std::min(h * factor, options.max_step);
    }
}

Trajectory integrate_rk45(const OdeSpec& spec, std::span<const double> y0, double t0, double t_end,
                          double sample_dt, const Rk45Options& options) {
    Trajectory out;
    out.dimension = spec.dimension;
    const std::size_t expected = sample_count(t0, t_end, sample_dt);
    out.times.reserve(expected);
    out.states.reserve(expected * spec.dimension);
    integrate_rk45(
        spec, y0, t0, t_end, sample_dt,
        [&](double t, std::span<const double> y) {
            out.times.push_back(t);
            out.states.insert(out.states.end(), y.begin(), y.end());
        },
        options);
    return out;
}

void integrate_euler_maruyama(const SdeSpec& spec, std::span<const double> z0, double dt, double t_end, Rng& rng,
                              const Observer& observer, std::size_t record_every) {
    if (!(dt > 0.0)) throw std::invalid_argument("integrate_euler_maruyama: dt must be positive");
    if (z0.size() != spec.dimension || spec.diffusion.size() != spec.dimension) {
        throw std::invalid_argument("integrate_euler_maruyama: dimension mismatch");
    }
    if (record_every == 0) throw std::invalid_argument("integrate_euler_maruyama: record_every must be positive");
    const std::size_t n = spec.dimension;
    const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
    const double sqrt_dt = std::sqrt(dt);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> z(z0.begin(), z0.end()), f(n);
    observer(0.0, z);
    for (std::size_t k = 1; k <= steps; ++k) {
        const double t = static_cast<double>(k - 1) * dt;
        spec.drift(t, z, f);
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = z[i] + f[i] * dt;
            if (spec.diffusion[i] != 0.0) z[i] += spec.diffusion[i] * sqrt_dt * normal(rng);
        }
        if (k % record_every == 0) observer(static_cast<double>(k) * dt, z);
    }
}

Trajectory integrate_euler_maruyama(const SdeSpec& spec, std::span<const double> z0, double dt, double t_end,
                                    std::uint64_t seed, std::size_t record_every) {
    Rng rng = make_rng(seed, "euler-maruyama");
    Trajectory out;
    out.dimension = spec.dimension;
    integrate_euler_maruyama(
        spec, z0, dt, t_end, rng,
        [&](double t, std::span<const double> z) {
            out.times.push_back(t);
            out.states.insert(out.states.end(), z.begin(), z.end());
        },
        record_every);
    return out;
}

Trajectory integrate_euler(const OdeSpec& spec, std::span<const double> z0, double dt, double t_end) {
    if (!(dt > 0.0)) throw std::invalid_argument("integrate_euler: dt must be positive");
    const std::size_t n = spec.dimension;
    const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
    Trajectory out;
    out.dimension = n;
    std::vector<double> z(z0.begin(), z0.end()), f(n);
    out.times.push_back(0.0);
    out.states.insert(out.states.end(), z.begin(), z.end());
    for (std::size_t k = 1; k <= steps; ++k) {
        spec.drift(static_cast<double>(k - 1) * dt, z, f);
        for (std::size_t i = 0; i < n; ++i) z[i] = z[i] + f[i] * dt;
        out.times.push_back(static_cast<double>(k) * dt);
        out.states.insert(out.states.end(), z.begin(), z.end());
    }
    return out;
}

}  // namespace dpdsr::dynsys
