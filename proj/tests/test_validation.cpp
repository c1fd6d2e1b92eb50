#include <catch_amalgamated.hpp>

#include "sdvol/validation.hpp"

using namespace sdvol;

namespace {

Scenario simple(double f) {
    Scenario s;
    s.model = ModelKind::SupplyDemandSimple;
    s.drift = FunctionSpec::constant(f);
    s.sigma = FunctionSpec::constant(0.5);
    s.grid = TimeGrid::make(0.0, 2.0, 1e-2);
    return s;
}

Scenario canonical() {
    Scenario s;
    s.model = ModelKind::Valuation;
    s.drift = FunctionSpec::quadratic_bump(1.5, 0.1, 2.0);
    s.sigma = FunctionSpec::constant(0.5);
    s.y0 = 0.9;
    s.grid = TimeGrid::make(0.0, 6.0, 1e-3);
    return s;
}

}  // namespace

TEST_CASE("equilibrium drift passes every check") {
    const auto r = validate_scenario(simple(0.0));
    CHECK(r.ok());
    CHECK(r.first_failure() == nullptr);
    CHECK(r.find("1+f>0") != nullptr);
    CHECK_NOTHROW(require_valid(simple(0.0)));
}

TEST_CASE("f = -1.5 breaks the ratio guard at t0") {
    const auto r = validate_scenario(simple(-1.5));
    REQUIRE_FALSE(r.ok());
    const auto* bad = r.first_failure();
    CHECK(bad->name == "1+f>0");
    REQUIRE(bad->first_violation.has_value());
    CHECK(*bad->first_violation == 0.0);
    CHECK_THROWS_AS(require_valid(simple(-1.5)), ValidationError);
}

TEST_CASE("the guard reports the first violating time, not just t0") {
    Scenario s = simple(0.0);
    s.drift = FunctionSpec::linear(0.5, -1.0);  // 1 + f hits zero at t = 1.5
    const auto* bad = validate_scenario(s).first_failure();
    REQUIRE(bad != nullptr);
    CHECK(bad->name == "1+f>0");
    CHECK(*bad->first_violation == Catch::Approx(1.5).margin(1e-9));
}

TEST_CASE("a non-positive bump curvature fails the shape check") {
    Scenario s = canonical();
    s.drift = FunctionSpec::quadratic_bump(1.5, 0.0, 2.0);
    const auto r = validate_scenario(s);
    CHECK_FALSE(r.ok());
    CHECK(r.first_failure()->name == "shape:drift");
    s.drift = FunctionSpec::quadratic_bump(1.5, -0.1, 2.0);
    CHECK(validate_scenario(s).first_failure()->name == "shape:drift");
}

TEST_CASE("valuation checks sigma constancy and the factor along y") {
    CHECK(validate_scenario(canonical()).ok());
    Scenario s = canonical();
    s.sigma = FunctionSpec::linear(0.5, 0.01);
    CHECK(validate_scenario(s).first_failure()->name == "sigma constant");
    s = canonical();
    s.y0 = 3.0;  // 1 + x_a(0) - y0 = -0.9
    const auto* bad = validate_scenario(s).first_failure();
    REQUIRE(bad != nullptr);
    CHECK(bad->name == "1+x_a-y>0");
    CHECK(*bad->first_violation == 0.0);
}

TEST_CASE("structural gaps are reported without evaluating the model") {
    Scenario s = simple(0.0);
    s.model = ModelKind::StochasticF;
    CHECK(validate_scenario(s).first_failure()->name == "sigma_f present");
    s = simple(0.0);
    s.model = ModelKind::GeneralRatioPower;
    CHECK(validate_scenario(s).first_failure()->name == "power present");
    s = simple(0.0);
    s.n_paths = 0;
    CHECK(validate_scenario(s).first_failure()->name == "n_paths>=1");
    s = simple(0.0);
    s.sigma = FunctionSpec::constant(-0.1);
    CHECK(validate_scenario(s).first_failure()->name == "sigma>=0");
    s = simple(0.0);
    const double ts[] = {0.0, 1.0};
    const double vs[] = {0.0, 0.0};
    s.drift = FunctionSpec::tabulated(ts, vs);
    CHECK(validate_scenario(s).first_failure()->name == "covers:drift");
}
