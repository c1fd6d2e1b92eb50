#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sdvol/analytic.hpp"
#include "sdvol/errors.hpp"
#include "sdvol/scenario.hpp"

namespace sdvol {

struct ValidationCheck {
    std::string name;
    bool ok = true;
    std::optional<double> first_violation;  ///< grid time of the first failing sample
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;

    bool ok() const {
        for (const auto& c : checks)
            if (!c.ok) return false;
        return true;
    }

    const ValidationCheck* first_failure() const {
        for (const auto& c : checks)
            if (!c.ok) return &c;
        return nullptr;
    }

    const ValidationCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

namespace validation_detail {

template <class Pred>
ValidationCheck scan(std::string name, const TimeGrid& grid, const Curve& v, Pred ok, std::string what) {
    ValidationCheck c{std::move(name), true, std::nullopt, {}};
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (!ok(v[k])) {
            c.ok = false;
            c.first_violation = grid.time(k);
            c.message = what + " violated at t=" + std::to_string(grid.time(k));
            break;
        }
    }
    return c;
}

inline void check_function(ValidationReport& r, const std::string& label, const FunctionSpec& f,
                           const TimeGrid& grid) {
    const std::string shape = f.shape_violation();
    r.checks.push_back({"shape:" + label, shape.empty(), std::nullopt, shape});
    if (!f.covers(grid.t0, grid.last_time()))
        r.checks.push_back({"covers:" + label, false, std::nullopt, label + " table does not cover the grid"});
    r.checks.push_back(scan("finite:" + label, grid, f.sample(grid),
                            [](double v) { return std::isfinite(v); }, label + " finite"));
}

}  // namespace validation_detail

/// Checks every scenario invariant and reports the first violating grid time.
/// Never throws for a structurally complete scenario.
inline ValidationReport validate_scenario(const Scenario& s) {
    using namespace validation_detail;
    ValidationReport r;
    const TimeGrid& grid = s.grid;
    r.checks.push_back({"n_paths>=1", s.n_paths >= 1, std::nullopt,
                        s.n_paths >= 1 ? "" : "n_paths must be at least 1"});
    check_function(r, "drift", s.drift, grid);
    check_function(r, "sigma", s.sigma, grid);
    if (s.sigma_f) check_function(r, "sigma_f", *s.sigma_f, grid);
    if (s.model == ModelKind::StochasticF && !s.sigma_f)
        r.checks.push_back({"sigma_f present", false, std::nullopt, "stochastic_f needs sigma_f"});
    if (needs_power(s.model) && !s.power)
        r.checks.push_back({"power present", false, std::nullopt, "model needs p"});
    if (!r.ok()) return r;

    r.checks.push_back(scan("sigma>=0", grid, s.sigma.sample(grid), [](double v) { return v >= 0.0; },
                            "sigma >= 0"));

    const Curve f = s.drift.sample(grid);
    if (uses_supply_demand_ratio(s.model))
        r.checks.push_back(scan("1+f>0", grid, f, [](double v) { return 1.0 + v > 0.0; }, "1+f>0"));

    if (s.model == ModelKind::Valuation) {
        r.checks.push_back({"sigma constant", s.sigma_is_constant(), std::nullopt,
                            s.sigma_is_constant() ? "" : "valuation needs a constant sigma"});
        const Curve y = solve_y(s.drift, s.y0, grid);
        Curve gap(grid.size());
        for (std::size_t k = 0; k < gap.size(); ++k) gap[k] = 1.0 + f[k] - y[k];
        r.checks.push_back(scan("1+x_a-y>0", grid, gap, [](double v) { return v > 0.0; }, "1+x_a-y>0"));
    }
    return r;
}

/// Throws ValidationError naming the first failed check.
inline void require_valid(const Scenario& s) {
    const auto r = validate_scenario(s);
    if (const auto* bad = r.first_failure())
        throw ValidationError("scenario invalid: " + bad->name +
                              (bad->message.empty() ? "" : " (" + bad->message + ")"));
}

}  // namespace sdvol
