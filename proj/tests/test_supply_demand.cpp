#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "sdvol/supply_demand.hpp"

using namespace sdvol;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("perfect anticorrelation keeps D + S fixed") {
    const BivariatePair pair(1.2, 0.9, 0.07);
    for (const auto& d : sample_supply_demand(pair, 5000, 4)) {
        CHECK_THAT(d.demand + d.supply, WithinAbs(2.1, 1e-14));
    }
}

TEST_CASE("a degenerate pair always returns its means") {
    for (const auto& d : sample_supply_demand(BivariatePair(1.3, 0.8, 0.0), 100, 9)) {
        CHECK(d.demand == 1.3);
        CHECK(d.supply == 0.8);
    }
}

TEST_CASE("sample mean of demand sits inside its standard-error band") {
    const std::size_t n = 100000;
    const auto draws = sample_supply_demand(BivariatePair(1.0, 1.0, 0.05), n, 2024);
    double sum = 0.0;
    for (const auto& d : draws) sum += d.demand;
    CHECK(std::abs(sum / n - 1.0) <= 4.0 * 0.05 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("partially correlated draws have the requested correlation") {
    const std::size_t n = 100000;
    const auto draws = sample_supply_demand(BivariatePair(1.0, 1.0, 0.1, -0.5), n, 77);
    double sdd = 0.0, sss = 0.0, sds = 0.0;
    for (const auto& d : draws) {
        sdd += (d.demand - 1.0) * (d.demand - 1.0);
        sss += (d.supply - 1.0) * (d.supply - 1.0);
        sds += (d.demand - 1.0) * (d.supply - 1.0);
    }
    CHECK_THAT(sds / std::sqrt(sdd * sss), WithinAbs(-0.5, 0.01));
}

TEST_CASE("pair construction rejects invalid covariances") {
    CHECK_THROWS_AS(BivariatePair(1.0, 0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(BivariatePair(1.0, 1.0, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(BivariatePair(1.0, 1.0, 0.1, -1.5), std::invalid_argument);
    CHECK_THROWS_AS(BivariatePair(1.0, 1.0, 0.1, 0.3), std::invalid_argument);
}

TEST_CASE("exact ratio density values") {
    CHECK(ratio_density_exact_or_limit(-1.0, BivariatePair(1.0, 1.0, 0.1)) == 0.0);
    CHECK(ratio_density_exact(-0.99, BivariatePair(1.0, 1.0, 0.1)) < 1e-300);
    const BivariatePair pair(1.0, 1.0, 0.05);
    // At the mean the exponential factor is one.
    CHECK_THAT(ratio_density_exact(1.0, pair), WithinRel(3.989422804014327, 1e-14));
    const BivariatePair skew(1.3, 0.8, 0.04);
    const double r = 1.3 / 0.8;
    CHECK_THAT(ratio_density_exact(r, skew),
               WithinRel((1.0 + r) * 0.8 / (std::sqrt(2.0 * std::numbers::pi) * 0.04 * (r + 1.0) * (r + 1.0)),
                         1e-14));
    CHECK_THROWS_AS(ratio_density_exact(-1.0, pair), std::domain_error);
    CHECK_THROWS_AS(ratio_density_exact(1.0, BivariatePair(1.0, 1.0, 0.05, -0.9)), std::invalid_argument);
}

TEST_CASE("sigma_Rq and its near-equilibrium form") {
    CHECK_THAT(sigma_rq_squared(BivariatePair(1.0, 1.0, 0.05)), WithinRel(0.01, 1e-14));
    CHECK(sigma_rq_squared_near_equilibrium(0.05, 0.0) == 4.0 * 0.05 * 0.05);
    double worst_c = 0.0;
    for (double delta = 0.001; delta <= 0.05; delta += 0.001) {
        const double exact = sigma_rq_squared(BivariatePair(1.0 + delta, 1.0 - delta, 0.05));
        const double approx = sigma_rq_squared_near_equilibrium(0.05, delta);
        worst_c = std::max(worst_c, std::abs(exact - approx) / (4.0 * 0.05 * 0.05 * delta * delta));
    }
    CHECK(worst_c < 20.0);
    const double exact = sigma_rq_squared(BivariatePair(1.01, 0.99, 0.05));
    CHECK(std::abs(exact - sigma_rq_squared_near_equilibrium(0.05, 0.01)) <= 4.0 * 0.0025 * 20.0 * 1e-4);
}

TEST_CASE("exact density integrates to one on the +-10 sigma_Rq window") {
    for (double s1 : {0.1, 0.05, 0.02}) {
        for (double mu_d : {0.9, 1.0, 1.2}) {
            const BivariatePair pair(mu_d, 1.0, s1);
            CHECK(std::abs(exact_density_mass(pair) - 1.0) < 1e-3);
        }
    }
}

TEST_CASE("normal approximation improves as sigma1 shrinks") {
    double prev = 1.0;
    for (double s1 : {0.2, 0.1, 0.05, 0.025}) {
        const double tv = exact_vs_approx_tv(BivariatePair(1.1, 1.0, s1));
        CHECK(tv < prev);
        prev = tv;
    }
}

TEST_CASE("histogram of sampled ratios fits the exact density") {
    const BivariatePair pair(1.0, 1.0, 0.05);
    const auto draws = sample_supply_demand(pair, 100000, 31);
    const ChiSquareResult chi = ratio_histogram_chi_square(pair, draws, 50);
    CHECK(chi.bins == 50);
    CHECK(chi.p_value > 0.001);
}

TEST_CASE("G functions") {
    CHECK(g_eval(GKind::Symmetric, 1.0) == 0.0);
    CHECK(g_eval(GKind::Symmetric, 2.0) == 1.5);
    CHECK(g_eval(GKind::Symmetric, 0.5) == -1.5);
    CHECK_THAT(g_eval(GKind::Simple, 1.2), WithinAbs(0.2, 1e-15));
    for (GKind k : {GKind::Symmetric, GKind::Simple, GKind::TopApprox, GKind::BottomApprox}) {
        CHECK(g_eval(k, 1.0) == 0.0);
        CHECK_THROWS_AS(g_eval(k, 0.0), std::domain_error);
        CHECK_THROWS_AS(g_prime(k, -1.0), std::domain_error);
    }
    for (double x = 0.1; x <= 10.0; x *= 1.07) {
        CHECK(g_prime(GKind::Simple, x) == 1.0);
        CHECK_THAT(g_eval(GKind::Symmetric, 1.0 / x) + g_eval(GKind::Symmetric, x), WithinAbs(0.0, 1e-14));
        CHECK_THAT((1.0 / x) * g_prime(GKind::Symmetric, 1.0 / x), WithinRel(x * g_prime(GKind::Symmetric, x), 1e-14));
        for (GKind k : {GKind::Symmetric, GKind::Simple, GKind::TopApprox, GKind::BottomApprox})
            CHECK(g_prime(k, x) > 0.0);
    }
}

TEST_CASE("drift and diffusion identification") {
    const Coefficients simple = drift_diffusion_coeffs(GKind::Simple, 1.0, 0.5);
    CHECK(simple.drift == 0.0);
    CHECK(simple.diffusion == 0.5);
    const Coefficients sym = drift_diffusion_coeffs(GKind::Symmetric, 1.0, 0.5);
    CHECK(sym.drift == 0.0);
    CHECK(sym.diffusion == 1.0);
    const Coefficients bottom = drift_diffusion_coeffs(GKind::BottomApprox, 0.5, 0.5);
    CHECK(bottom.drift == -1.0);
    CHECK(bottom.diffusion == 1.0);
    const Coefficients top = drift_diffusion_coeffs(GKind::TopApprox, 1.3, 0.5);
    CHECK_THAT(top.drift, WithinAbs(0.3, 1e-15));
    CHECK_THAT(top.diffusion, WithinAbs(0.65, 1e-15));
    CHECK_THROWS_AS(drift_diffusion_coeffs(GKind::Simple, 0.0, 0.5), std::domain_error);
}

TEST_CASE("the three regime drifts agree near equilibrium") {
    for (double x = 0.95; x <= 1.05 + 1e-12; x += 0.001) {
        const double a = g_eval(GKind::Simple, x);
        const double b = g_eval(GKind::BottomApprox, x);
        const double c = 0.5 * g_eval(GKind::Symmetric, x);
        CHECK(std::abs(a - b) <= 5e-3);
        CHECK(std::abs(a - c) <= 5e-3);
        CHECK(std::abs(b - c) <= 5e-3);
    }
}
