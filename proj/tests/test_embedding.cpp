#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "dpdsr/dynsys/dataset.hpp"
#include "dpdsr/embedding/embedding.hpp"

using namespace dpdsr;
using namespace dpdsr::embedding;

namespace {

// Independent estimator: O(n^2) ranks and entropies H(A)+H(B)-H(A,B).
double brute_mi(const std::vector<double>& a, const std::vector<double>& b, std::size_t bins) {
    const std::size_t n = a.size();
    auto bin_of = [&](const std::vector<double>& x, std::size_t i) {
        std::size_t rank = 0;
        for (std::size_t j = 0; j < n; ++j) rank += x[j] < x[i];
        return rank * bins / n;
    };
    std::vector<double> pa(bins, 0.0), pb(bins, 0.0), pab(bins * bins, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ia = bin_of(a, i), ib = bin_of(b, i);
        pa[ia] += 1.0 / static_cast<double>(n);
        pb[ib] += 1.0 / static_cast<double>(n);
        pab[ia * bins + ib] += 1.0 / static_cast<double>(n);
    }
    auto entropy = [](const std::vector<double>& p) {
        double h = 0.0;
        for (double v : p)
            if (v > 0) h -= v * std::log(v);
        return h;
    };
    return entropy(pa) + entropy(pb) - entropy(pab);
}

std::vector<double> white_noise(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<double> x(n);
    for (auto& v : x) v = normal(rng);
    return x;
}

}  // namespace

TEST_CASE("mutual information estimator", "[embedding]") {
    SECTION("matches an entropy-based brute force") {
        auto x = white_noise(400, 1);
        std::vector<double> y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::sin(2.0 * x[i]) + 0.3 * x[(i + 7) % x.size()];
        for (std::size_t bins : {2u, 5u, 9u}) CHECK(mutual_information(x, y, bins) == Catch::Approx(brute_mi(x, y, bins)).margin(1e-12));
    }
    SECTION("identical samples give log(bins)") {
        auto x = white_noise(500, 2);
        CHECK(mutual_information(x, x, 10) == Catch::Approx(std::log(10.0)).margin(1e-12));
    }
    SECTION("symmetric in its arguments") {
        auto x = white_noise(3000, 3);
        for (std::size_t i = 1; i < x.size(); ++i) x[i] += 0.8 * x[i - 1];
        const std::size_t bins = default_bin_count(x.size());
        for (std::size_t lag : {1u, 5u, 40u}) {
            std::span<const double> s(x);
            const std::size_t n = x.size() - lag;
            CHECK(std::fabs(mutual_information(s.subspan(0, n), s.subspan(lag, n), bins) -
                            mutual_information(s.subspan(lag, n), s.subspan(0, n), bins)) < 1e-12);
        }
    }
    SECTION("bin count") {
        CHECK(default_bin_count(4000) == 29);
        CHECK(default_bin_count(5) == 1);
        CHECK(default_bin_count(6) == 2);
    }
}

TEST_CASE("mi_delay", "[embedding]") {
    SECTION("sine of period 40 gives about a quarter period") {
        // A noiseless sine sampled 40 times per period takes only 20 distinct
        // values and its binned MI is flat in the lag; light observation noise
        // restores the continuous-phase valley centred at P/4.
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto x = white_noise(20000, seed);
            for (std::size_t t = 0; t < x.size(); ++t) {
                x[t] = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 40.0) + 0.1 * x[t];
            }
            auto r = mi_delay(x);
            CHECK(r.lag >= 8);
            CHECK(r.lag <= 12);
            CHECK_FALSE(r.flagged);
            CHECK_FALSE(r.at_noise_floor);
        }
    }
    SECTION("white noise sits at the noise floor from lag 1") {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto r = mi_delay(white_noise(4000, seed));
            CHECK(r.lag == 1);
            CHECK(r.at_noise_floor);
        }
    }
    SECTION("monotone ramp has no minimum") {
        std::vector<double> x(1000);
        for (std::size_t t = 0; t < x.size(); ++t) x[t] = 0.5 * static_cast<double>(t);
        auto r = mi_delay(x, 100);
        CHECK(r.lag == 100);
        CHECK(r.flagged);
    }
    SECTION("series shorter than 2*max_lag rejected") {
        std::vector<double> x(199, 1.0);
        CHECK_THROWS_AS(mi_delay(x, 100), std::invalid_argument);
        CHECK_THROWS_AS(mi_delay(x, 0), std::invalid_argument);
    }
}

TEST_CASE("delay embedding", "[embedding]") {
    SECTION("definition") {
        std::vector<double> x{1, 2, 3};
        auto e = delay_embed(x, {1, 2});
        REQUIRE(e.rows == 2);
        CHECK(e.data == std::vector<double>{1, 2, 2, 3});
    }
    SECTION("dimension one is the identity") {
        auto x = white_noise(50, 4);
        auto e = delay_embed(x, {3, 1});
        CHECK(e.data == x);
    }
    SECTION("row count and first column") {
        auto x = white_noise(97, 5);
        for (std::size_t d = 1; d <= 6; ++d) {
            for (std::size_t tau = 1; tau <= 7; ++tau) {
                auto e = delay_embed(x, {tau, d});
                REQUIRE(e.rows == x.size() - (d - 1) * tau);
                for (std::size_t t = 0; t < e.rows; ++t) {
                    CHECK(e.at(t, 0) == x[t]);
                    CHECK(e.at(t, d - 1) == x[t + (d - 1) * tau]);
                }
            }
        }
    }
    SECTION("too short or invalid spec rejected") {
        std::vector<double> x{1, 2, 3};
        CHECK_THROWS_AS(delay_embed(x, {1, 4}), std::invalid_argument);
        CHECK_THROWS_AS(delay_embed(x, {0, 2}), std::invalid_argument);
        CHECK_THROWS_AS(delay_embed(x, {1, 0}), std::invalid_argument);
    }
    SECTION("double well with the MI delay in 8 dimensions") {
        dynsys::GenerateOptions opt;
        opt.scale = 0.05;
        auto dw = dynsys::generate_dataset("doublewell", 1, opt);
        const auto x = dw.train.channel(0);
        auto r = mi_delay(x);
        auto e = delay_embed(x, {r.lag, 8});
        CHECK(e.dimension == 8);
        CHECK(e.rows == x.size() - 7 * r.lag);
    }
}
