#include "dpdsr/attractors/attractors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "dpdsr/autodiff/ops.hpp"
#include "dpdsr/dynsys/rng.hpp"
#include "dpdsr/training/loss.hpp"

namespace dpdsr::attractors {

namespace {

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double distance(const double* a, const double* b, std::size_t dim) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

double quantile_of(std::vector<double> v, double q) {
    // linear interpolation between order statistics
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

StateMap skeleton_map(const models::Model& model) {
    StateMap m;
    m.dim = model.state_dim();
    m.apply = [&model, dim = m.dim](std::span<const double> states, std::size_t rows) {
        ad::NoGradGuard no_grad;
        const auto z = ad::Tensor::from({rows, dim}, std::vector<double>(states.begin(), states.end()));
        const auto next = model.step(z, {});
        return std::vector<double>(next.data().begin(), next.data().end());
    };
    return m;
}

std::string to_string(AttractorClass c) {
    switch (c) {
        case AttractorClass::chaotic: return "chaotic";
        case AttractorClass::limit_cycle: return "limit_cycle";
        case AttractorClass::fixed_point: return "fixed_point";
    }
    return "unknown";
}

double trajectory_spread(std::span<const double> trajectory, std::size_t dim) {
    if (dim == 0 || trajectory.size() < dim) throw std::invalid_argument("trajectory_spread: empty trajectory");
    const double* last = trajectory.data() + trajectory.size() - dim;
    double spread = 0.0;
    for (std::size_t i = 0; i < trajectory.size(); ++i) spread = std::max(spread, std::abs(trajectory[i] - last[i % dim]));
    return spread;
}

AttractorClass classify(double spread, double lambda_max, double tol) {
    if (lambda_max > 0.0) return AttractorClass::chaotic;
    if (spread < tol) return AttractorClass::fixed_point;
    return AttractorClass::limit_cycle;
}

std::optional<double> max_lyapunov(const StateMap& map, std::span<const double> start, const LyapunovOptions& options) {
    const std::size_t dim = map.dim;
    if (start.size() != dim) throw std::invalid_argument("max_lyapunov: start point has the wrong dimension");
    if (options.steps <= options.burn_in) throw std::invalid_argument("max_lyapunov: burn-in consumes every step");
    if (!(options.delta0 > 0.0)) throw std::invalid_argument("max_lyapunov: delta0 must be positive");

    Rng rng = make_rng(options.seed, "lyapunov-direction");
    std::normal_distribution<double> normal;
    std::vector<double> delta(dim);
    double norm = 0.0;
    while (norm == 0.0) {
        norm = 0.0;
        for (auto& d : delta) {
            d = normal(rng);
            norm += d * d;
        }
        norm = std::sqrt(norm);
    }
    for (auto& d : delta) d *= options.delta0 / norm;

    std::vector<double> pair(2 * dim);
    std::copy(start.begin(), start.end(), pair.begin());
    double sum = 0.0;
    for (std::size_t s = 0; s < options.steps; ++s) {
        for (std::size_t i = 0; i < dim; ++i) pair[dim + i] = pair[i] + delta[i];
        auto next = map(pair, 2);
        if (!all_finite({next.data(), dim})) return std::nullopt;
        double d = 0.0;
        for (std::size_t i = 0; i < dim; ++i) d += (next[dim + i] - next[i]) * (next[dim + i] - next[i]);
        d = std::sqrt(d);
        if (!std::isfinite(d)) return std::nullopt;
        if (d == 0.0) {
            // perturbation annihilated (or lost to rounding); keep following
            // the reference so an escape is still reported
            if (s >= options.burn_in) sum = -std::numeric_limits<double>::infinity();
        } else {
            if (s >= options.burn_in) sum += std::log(d / options.delta0);
            for (std::size_t i = 0; i < dim; ++i) delta[i] = (next[dim + i] - next[i]) * options.delta0 / d;
        }
        std::copy(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(dim), pair.begin());
    }
    return sum / static_cast<double>(options.steps - options.burn_in);
}

double directed_distance(std::span<const double> a, std::span<const double> b, std::size_t dim, double quantile,
                         std::size_t max_points) {
    const std::size_t na = a.size() / dim, nb = b.size() / dim;
    if (na == 0 || nb == 0) throw std::invalid_argument("directed_distance: empty trajectory");
    const std::size_t used = max_points == 0 ? na : std::min(na, max_points);
    std::vector<double> nearest;
    nearest.reserve(used);
    for (std::size_t k = 0; k < used; ++k) {
        // evenly spaced subsample, always including the last point
        const std::size_t i = used == 1 ? na - 1 : k * (na - 1) / (used - 1);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < nb; ++j) best = std::min(best, distance(&a[i * dim], &b[j * dim], dim));
        nearest.push_back(best);
    }
    return quantile_of(std::move(nearest), quantile);
}

nlohmann::json AttractorReport::to_json(std::size_t trajectory_points) const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& a : attractors) {
        nlohmann::json j{{"class", to_string(a.cls)},
                         {"lambda_max", std::isfinite(a.lambda_max) ? nlohmann::json(a.lambda_max) : nlohmann::json(nullptr)},
                         {"spread", a.spread},
                         {"basin_fraction", a.basin_fraction},
                         {"members", a.members.size()},
                         {"point", std::vector<double>(a.last_point().begin(), a.last_point().end())}};
        if (trajectory_points > 0) {
            const std::size_t n = std::min(trajectory_points * a.dim, a.trajectory.size());
            j["trajectory"] = std::vector<double>(a.trajectory.begin(), a.trajectory.begin() + static_cast<std::ptrdiff_t>(n));
        }
        list.push_back(std::move(j));
    }
    return {{"initial_points", initial_points}, {"escaped", escaped}, {"attractors", list}};
}

AttractorReport find_attractors(const StateMap& map, std::span<const double> initial_points,
                                const AttractorOptions& options) {
    const std::size_t dim = map.dim;
    if (dim == 0 || initial_points.size() % dim != 0 || initial_points.empty())
        throw std::invalid_argument("find_attractors: initial points do not match the state dimension");
    if (options.length == 0) throw std::invalid_argument("find_attractors: trajectory length must be positive");
    const std::size_t n = initial_points.size() / dim;

    std::vector<double> state(initial_points.begin(), initial_points.end());
    for (std::size_t w = 0; w < options.warmup; ++w) state = map(state, n);
    std::vector<std::vector<double>> traj(n);
    for (auto& t : traj) t.reserve(options.length * dim);
    for (std::size_t t = 0; t < options.length; ++t) {
        if (t > 0) state = map(state, n);
        for (std::size_t r = 0; r < n; ++r) traj[r].insert(traj[r].end(), &state[r * dim], &state[r * dim] + dim);
    }

    AttractorReport report;
    report.initial_points = n;
    std::vector<double> spreads;
    for (std::size_t r = 0; r < n; ++r) {
        if (!all_finite(traj[r])) {
            ++report.escaped;
            continue;
        }
        const double spread = trajectory_spread(traj[r], dim);
        const bool fixed = spread < options.fixed_point_tol;
        bool merged = false;
        for (auto& a : report.attractors) {
            const bool a_fixed = a.spread < options.fixed_point_tol;
            double d;
            if (fixed || a_fixed) {
                // a collapsed trajectory is represented by its final point
                const std::span<const double> p = fixed ? std::span<const double>(&traj[r][traj[r].size() - dim], dim)
                                                        : std::span<const double>(traj[r]);
                const std::span<const double> q = a_fixed ? a.last_point() : std::span<const double>(a.trajectory);
                d = std::max(directed_distance(p, q, dim, options.quantile, options.compare_points),
                             directed_distance(q, p, dim, options.quantile, options.compare_points));
            } else {
                d = std::max(directed_distance(traj[r], a.trajectory, dim, options.quantile, options.compare_points),
                             directed_distance(a.trajectory, traj[r], dim, options.quantile, options.compare_points));
            }
            const double tol = fixed || a_fixed ? options.fixed_point_tol : options.tol;
            if (d <= tol) {
                a.members.push_back(r);
                merged = true;
                break;
            }
        }
        if (!merged) {
            Attractor a;
            a.dim = dim;
            a.trajectory = std::move(traj[r]);
            a.spread = spread;
            a.members.push_back(r);
            report.attractors.push_back(std::move(a));
        }
        traj[r] = {};
    }

    const std::size_t finite = n - report.escaped;
    for (auto& a : report.attractors) {
        a.basin_fraction = static_cast<double>(a.members.size()) / static_cast<double>(finite);
        const auto lambda = max_lyapunov(map, a.last_point(), options.lyapunov);
        a.lambda_max = lambda ? *lambda : std::numeric_limits<double>::quiet_NaN();
        a.cls = classify(a.spread, a.lambda_max, options.fixed_point_tol);
    }
    return report;
}

std::vector<double> embedded_initial_points(const models::Model& model, const dynsys::TimeSeriesDataset& train,
                                            std::size_t count, std::uint64_t seed, std::size_t window) {
    ad::NoGradGuard no_grad;
    Rng rng = make_rng(seed, "attractor-initial-points");
    constexpr std::size_t per_window = 10;
    const std::size_t w = std::min(window, train.length);
    std::vector<double> out;
    while (out.size() < count * model.state_dim()) {
        const auto e = model.embed(training::batch_tensor(dynsys::chunk(train, w, 1, rng)));
        std::uniform_int_distribution<std::size_t> pick(0, e.dim(1) - 1);
        const std::size_t d = e.dim(2);
        for (std::size_t k = 0; k < per_window && out.size() < count * d; ++k) {
            const std::size_t t = pick(rng);
            out.insert(out.end(), e.data().begin() + static_cast<std::ptrdiff_t>(t * d),
                       e.data().begin() + static_cast<std::ptrdiff_t>((t + 1) * d));
        }
    }
    return out;
}

double tau_opt_of(double lambda, double clamp) {
    if (std::isnan(lambda)) throw std::invalid_argument("tau_opt: exponent is NaN");
    return lambda > 0.0 ? std::min(clamp, std::numbers::ln2 / lambda) : clamp;
}

std::optional<double> forced_lyapunov(const models::DpdsrModel& model, const dynsys::TimeSeriesDataset& data,
                                      std::size_t tau, const LyapunovOptions& options) {
    if (tau < 1) throw std::invalid_argument("forced_lyapunov: tau must be at least 1");
    if (options.steps <= options.burn_in) throw std::invalid_argument("forced_lyapunov: burn-in consumes every step");
    ad::NoGradGuard no_grad;
    Rng rng = make_rng(options.seed, "forced-lyapunov");
    const std::size_t length = std::min(options.steps + 1, data.length);
    if (length < 2) throw std::invalid_argument("forced_lyapunov: data too short");
    const auto zhat = model.state_encoder(training::batch_tensor(dynsys::chunk(data, length, 1, rng)));
    const std::size_t dim = model.state_dim();
    auto teacher = [&](std::size_t t) { return model.gen.complete(ad::select(zhat, 1, t)); };

    std::normal_distribution<double> normal;
    std::vector<double> delta(dim);
    double norm = 0.0;
    for (auto& d : delta) {
        d = normal(rng);
        norm += d * d;
    }
    for (auto& d : delta) d *= options.delta0 / std::sqrt(norm);

    auto z = teacher(0);
    double sum = 0.0;
    const std::size_t steps = length - 1;
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<double> pair(z.data().begin(), z.data().end());
        for (std::size_t i = 0; i < dim; ++i) pair.push_back(pair[i] + delta[i]);
        const auto next = model.gen.evolve(ad::Tensor::from({2, dim}, std::move(pair)));
        const auto v = next.data();
        if (!all_finite(v)) return std::nullopt;
        double d = 0.0;
        for (std::size_t i = 0; i < dim; ++i) d += (v[dim + i] - v[i]) * (v[dim + i] - v[i]);
        d = std::sqrt(d);
        if (d == 0.0) {
            if (t >= options.burn_in) sum = -std::numeric_limits<double>::infinity();
        } else {
            if (t >= options.burn_in) sum += std::log(d / options.delta0);
            for (std::size_t i = 0; i < dim; ++i) delta[i] = (v[dim + i] - v[i]) * options.delta0 / d;
        }
        z = (t + 1) % tau == 0 ? teacher(t + 1) : ad::reshape(ad::select(next, 0, 0), {1, dim});
    }
    const std::size_t used = steps > options.burn_in ? steps - options.burn_in : 0;
    if (used == 0) throw std::invalid_argument("forced_lyapunov: burn-in consumes every step");
    return sum / static_cast<double>(used);
}

std::vector<double> attracting_crossings(std::span<const double> tau, std::span<const double> tau_opt) {
    if (tau.size() != tau_opt.size()) throw std::invalid_argument("attracting_crossings: length mismatch");
    std::vector<double> out;
    const std::size_t n = tau.size();
    auto slope = [&](std::size_t i) { return (tau_opt[i + 1] - tau_opt[i]) / (tau[i + 1] - tau[i]); };
    for (std::size_t i = 0; i < n; ++i) {
        const double g = tau_opt[i] - tau[i];
        if (g == 0.0) {
            // on a grid node: every adjacent segment must be contracting
            const bool left = i == 0 || slope(i - 1) < 1.0;
            const bool right = i + 1 == n || slope(i) < 1.0;
            if (left && right && n > 1) out.push_back(tau[i]);
            continue;
        }
        if (i + 1 == n) break;
        const double g_next = tau_opt[i + 1] - tau[i + 1];
        if (g_next != 0.0 && (g > 0.0) != (g_next > 0.0) && slope(i) < 1.0) {
            out.push_back(tau[i] + g / (g - g_next) * (tau[i + 1] - tau[i]));
        }
    }
    return out;
}

TauOptCurve tau_opt_curve(std::vector<double> tau, std::vector<double> lambda, double clamp) {
    if (tau.size() < 2) throw std::invalid_argument("tau_opt_curve: need at least two grid points");
    if (tau.size() != lambda.size()) throw std::invalid_argument("tau_opt_curve: tau and lambda differ in length");
    for (std::size_t i = 1; i < tau.size(); ++i)
        if (!(tau[i] > tau[i - 1])) throw std::invalid_argument("tau_opt_curve: tau grid must be strictly increasing");
    TauOptCurve c;
    c.tau = std::move(tau);
    c.lambda = std::move(lambda);
    for (double l : c.lambda) c.tau_opt.push_back(tau_opt_of(l, clamp));
    c.fixed_points = attracting_crossings(c.tau, c.tau_opt);
    return c;
}

nlohmann::json TauOptCurve::to_json() const {
    nlohmann::json lambdas = nlohmann::json::array();
    for (double l : lambda) lambdas.push_back(std::isfinite(l) ? nlohmann::json(l) : nlohmann::json(nullptr));
    return {{"tau", tau}, {"lambda_max", lambdas}, {"tau_opt", tau_opt}, {"fixed_points", fixed_points}};
}

std::string TauOptCurve::csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "tau,lambda_max,tau_opt\n";
    for (std::size_t i = 0; i < tau.size(); ++i) out << tau[i] << ',' << lambda[i] << ',' << tau_opt[i] << '\n';
    return out.str();
}

}  // namespace dpdsr::attractors
