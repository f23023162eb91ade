#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "dpdsr/attractors/attractors.hpp"
#include "dpdsr/dynsys/systems.hpp"

using namespace dpdsr;
using namespace dpdsr::attractors;

namespace {

StateMap scalar_map(std::function<double(double)> f) {
    return {1, [f](std::span<const double> s, std::size_t) {
                std::vector<double> out(s.size());
                std::transform(s.begin(), s.end(), out.begin(), f);
                return out;
            }};
}

StateMap diagonal_map(std::vector<double> a) {
    const std::size_t dim = a.size();
    return {dim, [a](std::span<const double> s, std::size_t rows) {
                std::vector<double> out(s.size());
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t i = 0; i < a.size(); ++i) out[r * a.size() + i] = a[i] * s[r * a.size() + i];
                return out;
            }};
}

// explicit Euler discretisation of an ODE drift
StateMap euler_map(dynsys::Drift drift, std::size_t dim, double dt) {
    return {dim, [drift, dim, dt](std::span<const double> s, std::size_t rows) {
                std::vector<double> out(s.begin(), s.end()), d(dim);
                for (std::size_t r = 0; r < rows; ++r) {
                    drift(0.0, s.subspan(r * dim, dim), d);
                    for (std::size_t i = 0; i < dim; ++i) out[r * dim + i] += dt * d[i];
                }
                return out;
            }};
}

// rotation by a fixed angle on the plane: every circle is invariant
StateMap rotation(double angle) {
    return {2, [angle](std::span<const double> s, std::size_t rows) {
                std::vector<double> out(s.size());
                const double c = std::cos(angle), sn = std::sin(angle);
                for (std::size_t r = 0; r < rows; ++r) {
                    out[2 * r] = c * s[2 * r] - sn * s[2 * r + 1];
                    out[2 * r + 1] = sn * s[2 * r] + c * s[2 * r + 1];
                }
                return out;
            }};
}

std::vector<double> uniform_points(std::size_t count, std::size_t dim, double lo, double hi, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> p(count * dim);
    for (auto& v : p) v = u(rng);
    return p;
}

std::set<std::set<std::size_t>> partition(const AttractorReport& r) {
    std::set<std::set<std::size_t>> out;
    for (const auto& a : r.attractors) out.insert(std::set<std::size_t>(a.members.begin(), a.members.end()));
    return out;
}

}  // namespace

TEST_CASE("largest Lyapunov exponent of known maps", "[attractors]") {
    SECTION("logistic map at r = 4 has ln 2") {
        const auto logistic = scalar_map([](double x) { return 4.0 * x * (1.0 - x); });
        const std::vector<double> x0{0.3};
        LyapunovOptions o;
        o.steps = 1000;
        o.burn_in = 0;
        const auto lambda = max_lyapunov(logistic, x0, o);
        REQUIRE(lambda);
        CHECK(std::abs(*lambda - std::numbers::ln2) < 0.02);
    }
    SECTION("contraction by one half") {
        const auto half = scalar_map([](double x) { return 0.5 * x; });
        const auto lambda = max_lyapunov(half, std::vector<double>{0.0});
        REQUIRE(lambda);
        CHECK(std::abs(*lambda - std::log(0.5)) < 1e-6);
    }
    SECTION("diagonal linear maps pick the largest modulus") {
        for (const auto& a : std::vector<std::vector<double>>{{0.5, 0.9}, {1.5, 0.2, -0.7}, {-2.0, 1.1}, {0.3, 0.3}}) {
            const auto lambda = max_lyapunov(diagonal_map(a), std::vector<double>(a.size(), 0.0));
            REQUIRE(lambda);
            double top = 0.0;
            for (double v : a) top = std::max(top, std::abs(v));
            CHECK(std::abs(*lambda - std::log(top)) < 1e-3);
        }
    }
    SECTION("escaping reference gives no estimate") {
        const auto blowup = scalar_map([](double x) { return x * x * 1e10; });
        CHECK_FALSE(max_lyapunov(blowup, std::vector<double>{10.0}).has_value());
    }
    SECTION("a map that annihilates perturbations is -inf") {
        const auto flat = scalar_map([](double) { return 0.25; });
        const auto lambda = max_lyapunov(flat, std::vector<double>{0.1});
        REQUIRE(lambda);
        CHECK(std::isinf(*lambda));
        CHECK(*lambda < 0);
    }
    SECTION("argument checks") {
        const auto half = scalar_map([](double x) { return 0.5 * x; });
        CHECK_THROWS_AS(max_lyapunov(half, std::vector<double>{0.0, 1.0}), std::invalid_argument);
        LyapunovOptions o;
        o.burn_in = o.steps;
        CHECK_THROWS_AS(max_lyapunov(half, std::vector<double>{0.0}, o), std::invalid_argument);
    }
}

TEST_CASE("classification is total", "[attractors]") {
    CHECK(classify(1.0, 0.3) == AttractorClass::chaotic);
    CHECK(classify(0.0, 0.3) == AttractorClass::chaotic);
    CHECK(classify(1e-7, -0.5) == AttractorClass::fixed_point);
    CHECK(classify(0.4, 0.0) == AttractorClass::limit_cycle);
    CHECK(classify(0.4, -1e-4) == AttractorClass::limit_cycle);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 1000; ++i) {
        const double spread = std::abs(u(rng)) * 1e-3, lambda = u(rng);
        const auto c = classify(spread, lambda);
        // exactly one class, decided by the stated rule
        const auto expected = lambda > 0 ? AttractorClass::chaotic
                              : spread < 1e-5 ? AttractorClass::fixed_point
                                              : AttractorClass::limit_cycle;
        CHECK(c == expected);
    }
    CHECK(to_string(AttractorClass::limit_cycle) == "limit_cycle");
}

TEST_CASE("trajectory spread and directed distance", "[attractors]") {
    const std::vector<double> t{0, 0, 1, -2, 0.5, 0.5};
    CHECK(trajectory_spread(t, 2) == 2.5);
    const std::vector<double> a{0, 1, 2, 3}, b{0.5};
    // distances from a to b: 0.5, 0.5, 1.5, 2.5; quantile 0.5 interpolates
    CHECK(directed_distance(a, b, 1, 0.5) == Catch::Approx(1.0));
    CHECK(directed_distance(b, a, 1, 0.8) == Catch::Approx(0.5));
    CHECK(directed_distance(a, a, 1, 0.8) == 0.0);
}

TEST_CASE("attractors of a contraction", "[attractors]") {
    const auto half = scalar_map([](double x) { return 0.5 * x; });
    AttractorOptions o;
    o.warmup = 100;
    o.length = 200;
    const auto r = find_attractors(half, uniform_points(50, 1, -3, 3, 1), o);
    REQUIRE(r.attractors.size() == 1);
    const auto& a = r.attractors[0];
    CHECK(a.cls == AttractorClass::fixed_point);
    CHECK(a.basin_fraction == 1.0);
    CHECK(a.members.size() == 50);
    CHECK(std::abs(a.last_point()[0]) < 1e-12);
    CHECK(std::abs(a.lambda_max - std::log(0.5)) < 1e-6);
    CHECK(r.escaped == 0);
}

TEST_CASE("bistable double-well skeleton", "[attractors]") {
    const auto spec = dynsys::double_well();
    const auto map = euler_map(spec.drift, spec.dimension, 0.1);
    AttractorOptions o;
    o.warmup = 2000;
    o.length = 500;
    const auto init = uniform_points(60, spec.dimension, -2, 2, 7);
    const auto r = find_attractors(map, init, o);
    REQUIRE(r.attractors.size() == 2);
    double total = 0.0;
    std::vector<double> first;
    for (const auto& a : r.attractors) {
        CHECK(a.cls == AttractorClass::fixed_point);
        CHECK(a.lambda_max < 0.0);
        total += a.basin_fraction;
        // every stage settles to the same well
        for (double v : a.last_point()) CHECK(std::abs(std::abs(v) - 1.0) < 1e-6);
        first.push_back(a.last_point()[0]);
        // the point is an equilibrium of the drift
        std::vector<double> d(spec.dimension);
        spec.drift(0.0, a.last_point(), d);
        for (double v : d) CHECK(std::abs(v) < 1e-6);
        CHECK(a.basin_fraction > 0.1);
    }
    CHECK(total == Catch::Approx(1.0));
    CHECK(first[0] * first[1] < 0.0);

    SECTION("merging does not depend on processing order") {
        std::vector<std::size_t> perm(60);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), std::mt19937_64(11));
        std::vector<double> shuffled;
        for (auto i : perm) shuffled.insert(shuffled.end(), &init[i * 5], &init[i * 5] + 5);
        const auto s = find_attractors(map, shuffled, o);
        std::set<std::set<std::size_t>> mapped;
        for (const auto& a : s.attractors) {
            std::set<std::size_t> m;
            for (auto k : a.members) m.insert(perm[k]);
            mapped.insert(m);
        }
        CHECK(mapped == partition(r));
    }
}

TEST_CASE("identical initial points form one attractor", "[attractors]") {
    const auto logistic = scalar_map([](double x) { return 3.9 * x * (1.0 - x); });
    AttractorOptions o;
    o.warmup = 100;
    o.length = 2000;
    const std::vector<double> init(8, 0.2);
    const auto r = find_attractors(logistic, init, o);
    REQUIRE(r.attractors.size() == 1);
    CHECK(r.attractors[0].members.size() == 8);
    CHECK(r.attractors[0].cls == AttractorClass::chaotic);
}

TEST_CASE("invariant circles are limit sets", "[attractors]") {
    // rotation keeps each radius: circles of radius 1 and 2 stay apart, two
    // points on the same circle merge
    const auto map = rotation(0.1 * std::numbers::sqrt2);
    AttractorOptions o;
    o.warmup = 0;
    o.length = 3000;
    o.lyapunov.steps = 200;
    const std::vector<double> init{1, 0, 0, 1, 2, 0, 0, -2};
    const auto r = find_attractors(map, init, o);
    REQUIRE(r.attractors.size() == 2);
    for (const auto& a : r.attractors) {
        // neutral map: zero up to rounding of z + delta0 (about 1e-16 / 1e-8 per step)
        CHECK(std::abs(a.lambda_max) < 1e-6);
        CHECK(a.cls == classify(a.spread, a.lambda_max));
        CHECK(a.spread > 1.0);
        CHECK(a.members.size() == 2);
        CHECK(a.basin_fraction == 0.5);
    }
    const auto j = r.to_json(5);
    CHECK(j["attractors"].size() == 2);
    CHECK(j["attractors"][0]["trajectory"].size() == 10);
    CHECK(j["attractors"][0]["basin_fraction"] == 0.5);
}

TEST_CASE("escaping trajectories are counted, not merged", "[attractors]") {
    const auto map = scalar_map([](double x) { return std::abs(x) > 1.0 ? x * x : 0.5 * x; });
    AttractorOptions o;
    o.warmup = 50;
    o.length = 50;
    const auto r = find_attractors(map, std::vector<double>{0.5, -0.9, 3.0, 10.0}, o);
    CHECK(r.escaped == 2);
    REQUIRE(r.attractors.size() == 1);
    CHECK(r.attractors[0].basin_fraction == 1.0);
    CHECK(r.initial_points == 4);
}

TEST_CASE("predictability time under forcing", "[attractors]") {
    CHECK(tau_opt_of(std::numbers::ln2) == Catch::Approx(1.0));
    CHECK(tau_opt_of(0.0347) == Catch::Approx(19.975).margin(0.01));
    CHECK(tau_opt_of(0.0) == 200.0);
    CHECK(tau_opt_of(-0.3) == 200.0);
    CHECK(tau_opt_of(1e-6) == 200.0);
    CHECK_THROWS_AS(tau_opt_of(std::nan("")), std::invalid_argument);

    SECTION("crossings of a synthetic curve") {
        // tau_opt falls from 100 to 20 across the diagonal
        const std::vector<double> tau{10, 40, 80, 120};
        const std::vector<double> opt{100, 60, 30, 20};
        const auto x = attracting_crossings(tau, opt);
        REQUIRE(x.size() == 1);
        // segment 40..80: g goes 20 -> -50, zero at 40 + 20/70*40
        CHECK(x[0] == Catch::Approx(40.0 + 20.0 / 70.0 * 40.0));
    }
    SECTION("repelling and slope-one crossings are excluded") {
        const std::vector<double> tau{10, 20, 30};
        CHECK(attracting_crossings(tau, std::vector<double>{5, 30, 60}).empty());  // slope 2.5 then 3
        CHECK(attracting_crossings(tau, std::vector<double>{9, 19, 29}).empty());  // parallel, no crossing
        // a crossing of slope exactly 1 cannot happen strictly; a node on the diagonal with slope 1 next to it
        CHECK(attracting_crossings(tau, std::vector<double>{10, 20, 10}).empty());
        const auto node = attracting_crossings(tau, std::vector<double>{15, 20, 22});
        REQUIRE(node.size() == 1);
        CHECK(node[0] == 20.0);
    }
    SECTION("curve construction") {
        // tau_opt 1.386, 1.386, 200: attracting crossing on the flat first segment only
        const auto c = tau_opt_curve({1, 10, 100}, {0.5, 0.5, -0.1});
        CHECK(c.tau_opt[0] == Catch::Approx(std::numbers::ln2 / 0.5));
        CHECK(c.tau_opt[2] == 200.0);
        REQUIRE(c.fixed_points.size() == 1);
        CHECK(c.fixed_points[0] == Catch::Approx(std::numbers::ln2 / 0.5));
        CHECK(c.to_json()["fixed_points"].size() == 1);
        CHECK(c.csv().rfind("tau,lambda_max,tau_opt\n", 0) == 0);
        CHECK_THROWS_AS(tau_opt_curve({1}, {0.1}), std::invalid_argument);
        CHECK_THROWS_AS(tau_opt_curve({1, 1}, {0.1, 0.2}), std::invalid_argument);
        CHECK_THROWS_AS(tau_opt_curve({1, 2}, {0.1}), std::invalid_argument);
    }
}

TEST_CASE("forced exponent and embedded initial points of a model", "[attractors]") {
    models::ModelConfig cfg;
    cfg.d_z = 4;
    cfg.hidden = 8;
    cfg.g_hidden = 6;
    cfg.encoder.channels = 5;
    cfg.encoder.layers = 2;
    cfg.encoder.lstm_hidden = 4;
    const auto model = models::make_model(cfg, 5);
    const auto& dp = dynamic_cast<const models::DpdsrModel&>(*model);

    dynsys::TimeSeriesDataset ds;
    ds.name = "sine";
    ds.length = 600;
    for (std::size_t t = 0; t < ds.length; ++t) ds.observations.push_back(std::sin(0.2 * static_cast<double>(t)));

    LyapunovOptions o;
    o.steps = 200;
    const auto l1 = forced_lyapunov(dp, ds, 1, o);
    const auto l50 = forced_lyapunov(dp, ds, 50, o);
    REQUIRE(l1);
    REQUIRE(l50);
    CHECK(std::isfinite(*l1));
    CHECK(*forced_lyapunov(dp, ds, 50, o) == *l50);  // deterministic in the seed
    CHECK_THROWS_AS(forced_lyapunov(dp, ds, 0, o), std::invalid_argument);

    const auto pts = embedded_initial_points(*model, ds, 25, 3, 200);
    CHECK(pts.size() == 25 * 4);
    for (double v : pts) CHECK(std::isfinite(v));
    CHECK(pts == embedded_initial_points(*model, ds, 25, 3, 200));

    AttractorOptions ao;
    ao.warmup = 50;
    ao.length = 100;
    ao.compare_points = 50;
    ao.lyapunov.steps = 100;
    const auto r = find_attractors(skeleton_map(*model), pts, ao);
    std::size_t members = r.escaped;
    for (const auto& a : r.attractors) members += a.members.size();
    CHECK(members == 25);
}
