#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpdsr/dynsys/dataset.hpp"
#include "dpdsr/models/model.hpp"

namespace dpdsr::attractors {

/// Deterministic map applied to `rows` states stored row-major.
struct StateMap {
    std::size_t dim = 0;
    std::function<std::vector<double>(std::span<const double> states, std::size_t rows)> apply;

    std::vector<double> operator()(std::span<const double> states, std::size_t rows) const {
        return apply(states, rows);
    }
};

/// The noise-free skeleton z -> step(z, 0) of a model.
StateMap skeleton_map(const models::Model& model);

enum class AttractorClass { chaotic, limit_cycle, fixed_point };
std::string to_string(AttractorClass c);

/// Largest deviation of any point from the last one (max norm).
double trajectory_spread(std::span<const double> trajectory, std::size_t dim);

/// Chaotic if lambda > 0, else a fixed point if the spread is below tol,
/// else a limit cycle.
AttractorClass classify(double spread, double lambda_max, double tol = 1e-5);

struct LyapunovOptions {
    std::size_t steps = 1000;
    double delta0 = 1e-8;
    std::size_t burn_in = 0;  // leading records left out of the mean
    std::uint64_t seed = 0;
};

/// Rescaled two-trajectory estimate of the largest exponent, in nats per
/// step. Empty when the reference leaves the finite range.
std::optional<double> max_lyapunov(const StateMap& map, std::span<const double> start,
                                   const LyapunovOptions& options = {});

struct Attractor {
    std::size_t dim = 0;
    std::vector<double> trajectory;  // representative, T x dim
    AttractorClass cls = AttractorClass::fixed_point;
    double lambda_max = 0.0;
    double spread = 0.0;
    double basin_fraction = 0.0;
    std::vector<std::size_t> members;  // indices of the initial points

    std::span<const double> last_point() const { return {trajectory.data() + trajectory.size() - dim, dim}; }
};

struct AttractorOptions {
    std::size_t warmup = 1000;
    std::size_t length = 20000;
    double quantile = 0.8;
    double fixed_point_tol = 1e-5;
    double tol = 1e-1;               // between limit cycles / chaotic sets
    std::size_t compare_points = 1000;  // subsample of the compared trajectory
    LyapunovOptions lyapunov;
};

/// Quantile over the points of a of the distance to the nearest point of b.
double directed_distance(std::span<const double> a, std::span<const double> b, std::size_t dim, double quantile,
                         std::size_t max_points = 0);

struct AttractorReport {
    std::vector<Attractor> attractors;
    std::size_t initial_points = 0;
    std::size_t escaped = 0;  // trajectories that left the finite range

    nlohmann::json to_json(std::size_t trajectory_points = 0) const;
};

/// Simulates every initial point (row-major, count x dim), discards the
/// warmup and merges trajectories whose two-way quantile distance is within
/// tolerance. Basin fractions are shares of the finite trajectories.
AttractorReport find_attractors(const StateMap& map, std::span<const double> initial_points,
                                const AttractorOptions& options = {});

/// Random points of the non-causal embedding of the training series.
std::vector<double> embedded_initial_points(const models::Model& model, const dynsys::TimeSeriesDataset& train,
                                            std::size_t count = 100, std::uint64_t seed = 0,
                                            std::size_t window = 1000);

// ---- predictability time under forcing

/// log 2 / lambda for lambda > 0, else the clamp.
double tau_opt_of(double lambda, double clamp = 200.0);

/// Largest exponent of the free map along a trajectory teacher-forced every
/// tau steps with the model's estimated states: each step the perturbed state
/// is propagated by the free map from the forced reference and rescaled.
std::optional<double> forced_lyapunov(const models::DpdsrModel& model, const dynsys::TimeSeriesDataset& data,
                                      std::size_t tau, const LyapunovOptions& options = {});

struct TauOptCurve {
    std::vector<double> tau;
    std::vector<double> lambda;
    std::vector<double> tau_opt;
    std::vector<double> fixed_points;  // attracting diagonal crossings

    nlohmann::json to_json() const;
    std::string csv() const;
};

/// Crossings of the piecewise linear tau_opt(tau) with the diagonal where
/// the interpolated slope is below 1.
std::vector<double> attracting_crossings(std::span<const double> tau, std::span<const double> tau_opt);

/// Builds the curve from per-tau exponents; needs at least two increasing
/// grid points.
TauOptCurve tau_opt_curve(std::vector<double> tau, std::vector<double> lambda, double clamp = 200.0);

}  // namespace dpdsr::attractors
