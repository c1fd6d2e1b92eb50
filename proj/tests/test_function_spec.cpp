#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sdvol/function_spec.hpp"
#include "sdvol/grid.hpp"

using namespace sdvol;
using Catch::Matchers::WithinAbs;

TEST_CASE("time grids hold n_steps + 1 uniform points") {
    const TimeGrid g = TimeGrid::make(0.0, 6.0, 1e-3);
    CHECK(g.n_steps == 6000);
    CHECK(g.size() == 6001);
    CHECK(g.zeros().size() == g.size());
    CHECK(g.time(0) == 0.0);
    CHECK_THAT(g.last_time(), WithinAbs(6.0, 1e-12));
    CHECK(g.index_of(2.0) == std::optional<std::size_t>(2000));
    CHECK_FALSE(g.index_of(2.0005).has_value());
    CHECK_FALSE(g.index_of(7.0).has_value());
    CHECK(g.nearest_index(-1.0) == 0);
    CHECK(g.nearest_index(100.0) == 6000);
    CHECK_THROWS_AS(TimeGrid::make(0.0, 1.0, 0.0), ValidationError);
    CHECK_THROWS_AS(TimeGrid::make(1.0, 1.0, 0.1), ValidationError);
    CHECK_THROWS_AS(TimeGrid::make(0.0, 1.0, NAN), ValidationError);
}

TEST_CASE("closed-form derivatives agree with central differences") {
    const std::vector<FunctionSpec> specs = {
        FunctionSpec::constant(1.3),
        FunctionSpec::linear(0.5, -2.0),
        FunctionSpec::quadratic_bump(1.5, 0.1, 2.0),
        FunctionSpec::gaussian_bump(0.1, 0.4, 2.0, 0.7),
        FunctionSpec::exponential(1.0, -0.5),
    };
    for (const auto& f : specs) {
        const FunctionSpec numeric(f.family(), std::vector<double>(f.params().begin(), f.params().end()),
                                   DerivativeMode::CentralDifference);
        for (double t = -1.0; t <= 6.0; t += 0.37) CHECK_THAT(f.derivative(t), WithinAbs(numeric.derivative(t), 1e-8));
    }
}

TEST_CASE("quadratic bump has its vertex at t_m") {
    const auto f = FunctionSpec::quadratic_bump(1.5, 0.1, 2.0);
    CHECK(f(2.0) == 1.5);
    CHECK(f.derivative(2.0) == 0.0);
    CHECK_THAT(f(0.0), WithinAbs(1.1, 1e-15));
    CHECK_THAT(f.derivative(0.0), WithinAbs(0.4, 1e-15));
}

TEST_CASE("tabulated functions interpolate linearly and differentiate numerically") {
    const double ts[] = {0.0, 1.0, 3.0};
    const double vs[] = {0.0, 2.0, 0.0};
    const auto f = FunctionSpec::tabulated(ts, vs);
    CHECK(f.derivative_mode() == DerivativeMode::CentralDifference);
    CHECK(f(0.5) == 1.0);
    CHECK(f(2.0) == 1.0);
    CHECK(f(-1.0) == 0.0);
    CHECK(f(5.0) == 0.0);
    CHECK_THAT(f.derivative(0.5), WithinAbs(2.0, 1e-9));
    CHECK_THAT(f.derivative(2.0), WithinAbs(-1.0, 1e-9));
    CHECK(f.covers(0.0, 3.0));
    CHECK_FALSE(f.covers(0.0, 3.5));
    const double bad_t[] = {0.0, 0.0};
    const double bad_v[] = {1.0, 2.0};
    CHECK_FALSE(FunctionSpec::tabulated(bad_t, bad_v).shape_violation().empty());
}

TEST_CASE("shape and arity constraints") {
    CHECK_FALSE(FunctionSpec::quadratic_bump(1.0, 0.0, 2.0).shape_violation().empty());
    CHECK_FALSE(FunctionSpec::quadratic_bump(1.0, -0.1, 2.0).shape_violation().empty());
    CHECK(FunctionSpec::quadratic_bump(1.0, 0.1, 2.0).shape_violation().empty());
    CHECK_FALSE(FunctionSpec::gaussian_bump(0, 1, 0, 0).shape_violation().empty());
    CHECK_THROWS_AS(FunctionSpec(Family::Linear, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(FunctionSpec(Family::Tabulated, {0.0, 1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("every family evaluates finitely on a grid") {
    const TimeGrid g = TimeGrid::make(0.0, 6.0, 1e-2);
    for (const auto& f : {FunctionSpec::quadratic_bump(1.5, 0.1, 2.0), FunctionSpec::gaussian_bump(0, 1, 3, 0.2),
                          FunctionSpec::exponential(1.0, -0.5)}) {
        for (double v : f.sample(g)) CHECK(std::isfinite(v));
        for (double v : f.sample_derivative(g)) CHECK(std::isfinite(v));
    }
}
