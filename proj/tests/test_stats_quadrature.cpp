#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sdvol/quadrature.hpp"
#include "sdvol/rng.hpp"
#include "sdvol/stats.hpp"

using namespace sdvol;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("Simpson is exact for cubics") {
    auto cubic = [](double x) { return 2.0 * x * x * x - x + 3.0; };
    CHECK_THAT(simpson(cubic, -1.0, 2.0), WithinAbs(7.5 - 1.5 + 9.0, 1e-12));
    CHECK_THAT(composite_simpson([](double x) { return std::exp(x); }, 0.0, 1.0, 64),
               WithinAbs(std::exp(1.0) - 1.0, 1e-9));
}

TEST_CASE("cumulative integral of a sampled curve is fourth order") {
    for (double dt : {1e-2, 1e-3}) {
        const std::size_t n = static_cast<std::size_t>(std::lround(2.0 / dt));
        std::vector<double> g(n + 1);
        for (std::size_t k = 0; k <= n; ++k) g[k] = std::sin(3.0 * dt * static_cast<double>(k));
        const Curve I = cumulative_integral(g, dt);
        double worst = 0.0;
        for (std::size_t k = 0; k <= n; ++k) {
            const double t = dt * static_cast<double>(k);
            worst = std::max(worst, std::abs(I[k] - (1.0 - std::cos(3.0 * t)) / 3.0));
        }
        CHECK(worst < 50.0 * dt * dt * dt * dt);
    }
}

TEST_CASE("exponentially weighted integral matches its closed form") {
    // g = 1: I(t) = (1 - e^{-c t}) / c.  g = e^{s}: I(t) = (e^{t} - e^{-c t}) / (1 + c).
    const double c = 1.75, dt = 1e-3;
    const std::size_t n = 6000;
    std::vector<double> one(n + 1, 1.0), ex(n + 1);
    for (std::size_t k = 0; k <= n; ++k) ex[k] = std::exp(dt * static_cast<double>(k));
    const Curve a = exp_weighted_integral(one, c, dt);
    const Curve b = exp_weighted_integral(ex, c, dt);
    CHECK(a[0] == 0.0);
    for (std::size_t k = 0; k <= n; k += 250) {
        const double t = dt * static_cast<double>(k);
        CHECK_THAT(a[k], WithinAbs((1.0 - std::exp(-c * t)) / c, 1e-12));
        CHECK_THAT(b[k], WithinRel((std::exp(t) - std::exp(-c * t)) / (1.0 + c), 1e-11));
    }
}

TEST_CASE("power sums merge by addition and give unbiased moments") {
    const std::vector<double> xs = {1.0, 2.0, 4.0, 7.0};
    const SampleMoments m = sample_moments(xs);
    CHECK(m.mean == 3.5);
    CHECK_THAT(m.variance, WithinRel(7.0, 1e-14));
    CHECK_THAT(m.se_mean, WithinRel(std::sqrt(7.0 / 4.0), 1e-14));

    PowerSums a, b, all;
    for (double x : {1.0, 2.0}) a.add_deviation(x - 1.0);
    for (double x : {4.0, 7.0}) b.add_deviation(x - 1.0);
    for (double x : xs) all.add_deviation(x - 1.0);
    a += b;
    CHECK(moments_from(a, 1.0).variance == moments_from(all, 1.0).variance);
}

TEST_CASE("variance standard error follows the normal-theory value for Gaussian data") {
    PowerSums p;
    const std::size_t n = 200000;
    for (std::size_t i = 0; i < n; ++i) {
        NormalStream z(3, StreamId::Ensemble, i);
        p.add_deviation(0.5 * z.next());
    }
    const SampleMoments m = moments_from(p, 0.0);
    CHECK(std::abs(m.variance - 0.25) < 4.0 * m.se_variance);
    CHECK_THAT(m.se_variance, WithinRel(0.25 * std::sqrt(2.0 / (n - 1.0)), 0.02));
}

TEST_CASE("least squares recovers an exact line") {
    const std::vector<double> x = {0.0, 1.0, 2.0, 3.0};
    const std::vector<double> y = {1.0, 3.0, 5.0, 7.0};
    const LinearFit f = fit_line(x, y);
    CHECK_THAT(f.slope, WithinAbs(2.0, 1e-14));
    CHECK_THAT(f.intercept, WithinAbs(1.0, 1e-14));
    CHECK_THAT(f.slope_se, WithinAbs(0.0, 1e-14));
    CHECK_THROWS_AS(fit_line(std::vector<double>{1.0, 1.0}, std::vector<double>{0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("chi-square tail probabilities") {
    CHECK_THAT(chi_square_p_value(2.0, 2.0), WithinAbs(std::exp(-1.0), 1e-14));
    CHECK_THAT(chi_square_p_value(3.841458820694124, 1.0), WithinAbs(0.05, 1e-12));
    CHECK(chi_square_p_value(0.0, 5.0) == 1.0);
}
