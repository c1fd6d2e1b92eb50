#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "sdvol/errors.hpp"
#include "sdvol/function_spec.hpp"
#include "sdvol/grid.hpp"
#include "sdvol/quadrature.hpp"
#include "sdvol/scenario.hpp"

namespace sdvol {

/// Deterministic companions of a scenario, sampled on its grid.
///
/// For the valuation model every field carries its closed-form meaning:
/// y = E X, z = E X^2, z1 = int e^{c(s-t)} w ds, var_x = sigma^2 z1,
/// w = (1 + x_a - y)^2, vol = sigma^2 w + sigma^2 var_x, q = d(vol / sigma^2)/dt.
/// For the other models w is the squared unit-sigma diffusion factor, so
/// vol = sigma^2 w, z1 = int w ds, var_x = Var X and c = 0. Var X is int vol ds
/// whenever f is deterministic.
struct AnalyticCurves {
    TimeGrid grid;
    Curve y, z, z1, var_x, w, vol, q;
    double c = 0.0;
    double y_route_discrepancy = 0.0;  ///< max |quadrature y - RK4 y|
};

struct YRoutes {
    Curve quadrature;  ///< integrating-factor form with Simpson per cell
    Curve rk4;         ///< classical RK4 on y' = x_a - y
    double max_discrepancy = 0.0;
};

/// Both routes to y' = x_a - y, y(t0) = y0.
inline YRoutes solve_y_routes(const FunctionSpec& x_a, double y0, const TimeGrid& grid) {
    YRoutes r;
    r.quadrature.assign(grid.size(), y0);
    r.rk4.assign(grid.size(), y0);
    const double h = grid.dt;
    const double decay = std::exp(-h);
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        const double t = grid.time(k);
        const double t1 = grid.time(k + 1);
        // y(t+h) = e^{-h} y(t) + int_t^{t+h} e^{s - t - h} x_a(s) ds
        r.quadrature[k + 1] =
            decay * r.quadrature[k] + simpson([&](double s) { return std::exp(s - t1) * x_a(s); }, t, t1);

        const double y = r.rk4[k];
        const double xm = x_a(t + 0.5 * h);
        const double k1 = x_a(t) - y;
        const double k2 = xm - (y + 0.5 * h * k1);
        const double k3 = xm - (y + 0.5 * h * k2);
        const double k4 = x_a(t1) - (y + h * k3);
        r.rk4[k + 1] = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    for (std::size_t k = 0; k < grid.size(); ++k)
        r.max_discrepancy = std::max(r.max_discrepancy, std::abs(r.quadrature[k] - r.rk4[k]));
    return r;
}

inline Curve solve_y(const FunctionSpec& x_a, double y0, const TimeGrid& grid) {
    return solve_y_routes(x_a, y0, grid).quadrature;
}

/// RK4 on the coupled system y' = x_a - y,
/// z' = (sigma^2 - 2) z + (2 - 2 sigma^2) x_a y - 2 sigma^2 y + sigma^2 (1 + x_a)^2,
/// with z(t0) = y0^2.
inline Curve solve_z(const FunctionSpec& x_a, double sigma, double y0, const TimeGrid& grid) {
    const double s2 = sigma * sigma;
    auto rhs = [&](double t, double y, double z, double& dy, double& dz) {
        const double xa = x_a(t);
        dy = xa - y;
        dz = (s2 - 2.0) * z + (2.0 - 2.0 * s2) * xa * y - 2.0 * s2 * y + s2 * (1.0 + xa) * (1.0 + xa);
    };
    Curve z(grid.size(), y0 * y0);
    double y = y0;
    const double h = grid.dt;
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        const double t = grid.time(k);
        const double zk = z[k];
        double a1, b1, a2, b2, a3, b3, a4, b4;
        rhs(t, y, zk, a1, b1);
        rhs(t + 0.5 * h, y + 0.5 * h * a1, zk + 0.5 * h * b1, a2, b2);
        rhs(t + 0.5 * h, y + 0.5 * h * a2, zk + 0.5 * h * b2, a3, b3);
        rhs(grid.time(k + 1), y + h * a3, zk + h * b3, a4, b4);
        y += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        z[k + 1] = zk + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    }
    return z;
}

/// w(t) = (1 + x_a(t) - y(t))^2.
inline Curve valuation_w(const FunctionSpec& x_a, const Curve& y, const TimeGrid& grid) {
    Curve w(grid.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double u = 1.0 + x_a(grid.time(k)) - y[k];
        w[k] = u * u;
    }
    return w;
}

/// z1(t) = int_{t0}^t e^{c(s-t)} w(s) ds with c = 2 - sigma^2.
inline Curve z1_closed_form(const FunctionSpec& x_a, const Curve& y, double sigma, const TimeGrid& grid) {
    return exp_weighted_integral(valuation_w(x_a, y, grid), 2.0 - sigma * sigma, grid.dt);
}

/// Var X(t) = sigma^2 z1(t).
inline Curve variance_closed_form(const FunctionSpec& x_a, const Curve& y, double sigma,
                                  const TimeGrid& grid) {
    Curve v = z1_closed_form(x_a, y, sigma, grid);
    for (double& e : v) e *= sigma * sigma;
    return v;
}

/// Q(t) = w'(t) + sigma^2 w(t) - sigma^2 c z1(t), with the chain-rule
/// w' = 2 (1 + x_a - y)(x_a' - (x_a - y)).
inline Curve q_curve(const FunctionSpec& x_a, const Curve& y, double sigma, const TimeGrid& grid) {
    const double s2 = sigma * sigma;
    const double c = 2.0 - s2;
    const Curve w = valuation_w(x_a, y, grid);
    const Curve z1 = exp_weighted_integral(w, c, grid.dt);
    Curve q(grid.size());
    for (std::size_t k = 0; k < q.size(); ++k) {
        const double t = grid.time(k);
        const double gap = x_a(t) - y[k];
        const double w_prime = 2.0 * (1.0 + gap) * (x_a.derivative(t) - gap);
        q[k] = w_prime + s2 * w[k] - s2 * c * z1[k];
    }
    return q;
}

/// Second-order finite-difference derivative of a sampled curve.
inline Curve gradient(const Curve& v, double dt) {
    const std::size_t n = v.size();
    Curve d(n, 0.0);
    if (n < 2) return d;
    if (n == 2) {
        d[0] = d[1] = (v[1] - v[0]) / dt;
        return d;
    }
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt);
    for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (v[k + 1] - v[k - 1]) / (2.0 * dt);
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dt);
    return d;
}

// --- unit-sigma coefficient factors of the non-valuation models -------------

/// Deterministic drift a(t) of the models whose drift ignores the state
/// (everything except valuation). For stochastic_f this is the mean drift E f.
inline double model_drift(ModelKind m, double f) {
    switch (m) {
        case ModelKind::SupplyDemandSymmetric: {
            const double r = 1.0 + f;
            return r - 1.0 / r;
        }
        case ModelKind::MarketBottom: return 1.0 - 1.0 / (1.0 + f);
        default: return f;
    }
}

/// b / sigma for the models whose diffusion ignores the log price.
inline double unit_diffusion(ModelKind m, double f, int power) {
    switch (m) {
        case ModelKind::SupplyDemandSimple:
        case ModelKind::MarketTop:
        case ModelKind::StochasticF: return 1.0 + f;
        case ModelKind::SupplyDemandSymmetric: {
            const double r = 1.0 + f;
            return r + 1.0 / r;
        }
        case ModelKind::MarketBottom: return 1.0 / (1.0 + f);
        case ModelKind::GeneralMonomial: return std::pow(f, power);
        case ModelKind::GeneralRatioPower: return std::pow(f / (f + 2.0), power);
        case ModelKind::GeneralH: {
            const double z = f / (f + 2.0);
            return std::sqrt(1.0 + z * z);
        }
        case ModelKind::GbmControl: return 1.0;
        case ModelKind::Valuation: break;
    }
    throw std::logic_error("unit_diffusion: valuation diffusion depends on the state");
}

/// Limiting volatility of a supply/demand-type model for a deterministic f.
inline Curve supply_demand_volatility(ModelKind m, const FunctionSpec& f, const FunctionSpec& sigma,
                                      int power, const TimeGrid& grid) {
    Curve v(grid.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double t = grid.time(k);
        const double g = unit_diffusion(m, f(t), power);
        const double s = sigma(t);
        v[k] = s * s * g * g;
    }
    return v;
}

/// sigma^2 (1 + E f)^2 + sigma^2 Var f.
inline Curve stochastic_f_volatility(const Curve& mean_f, const Curve& var_f, const Curve& sigma) {
    Curve v(mean_f.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double s2 = sigma[k] * sigma[k];
        v[k] = s2 * (1.0 + mean_f[k]) * (1.0 + mean_f[k]) + s2 * var_f[k];
    }
    return v;
}

/// sigma^2 w + sigma^2 var_x.
inline Curve valuation_volatility(double sigma, const Curve& w, const Curve& var_x) {
    Curve v(w.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = sigma * sigma * w[k] + sigma * sigma * var_x[k];
    return v;
}

/// Var f(t) = int_{t0}^t sigma_f(s)^2 ds.
inline Curve stochastic_f_variance(const FunctionSpec& sigma_f, const TimeGrid& grid) {
    Curve s2(grid.size());
    for (std::size_t k = 0; k < s2.size(); ++k) {
        const double s = sigma_f(grid.time(k));
        s2[k] = s * s;
    }
    return cumulative_integral(s2, grid.dt);
}

/// All analytic curves of a scenario. Valuation requires a constant sigma.
inline AnalyticCurves solve_analytic(const Scenario& s) {
    const TimeGrid& grid = s.grid;
    AnalyticCurves out;
    out.grid = grid;
    if (s.model == ModelKind::Valuation) {
        if (!s.sigma_is_constant())
            throw ValidationError("valuation closed forms need a constant sigma");
        const double sigma = s.sigma_constant();
        const YRoutes routes = solve_y_routes(s.drift, s.y0, grid);
        out.y = routes.quadrature;
        out.y_route_discrepancy = routes.max_discrepancy;
        out.c = 2.0 - sigma * sigma;
        out.z = solve_z(s.drift, sigma, s.y0, grid);
        out.w = valuation_w(s.drift, out.y, grid);
        out.z1 = exp_weighted_integral(out.w, out.c, grid.dt);
        out.var_x = out.z1;
        for (double& v : out.var_x) v *= sigma * sigma;
        out.vol = valuation_volatility(sigma, out.w, out.var_x);
        out.q = q_curve(s.drift, out.y, sigma, grid);
        return out;
    }

    const int power = s.power.value_or(1);
    const Curve f = s.drift.sample(grid);
    const Curve sig = s.sigma.sample(grid);
    Curve a(grid.size());
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = model_drift(s.model, f[k]);
    out.y = cumulative_integral(a, grid.dt);
    for (double& v : out.y) v += s.y0;

    out.w.resize(grid.size());
    if (s.model == ModelKind::StochasticF) {
        const Curve var_f = stochastic_f_variance(*s.sigma_f, grid);
        for (std::size_t k = 0; k < out.w.size(); ++k)
            out.w[k] = (1.0 + f[k]) * (1.0 + f[k]) + var_f[k];
    } else {
        for (std::size_t k = 0; k < out.w.size(); ++k) {
            const double g = unit_diffusion(s.model, f[k], power);
            out.w[k] = g * g;
        }
    }
    out.vol.resize(grid.size());
    for (std::size_t k = 0; k < out.vol.size(); ++k) out.vol[k] = sig[k] * sig[k] * out.w[k];
    out.z1 = cumulative_integral(out.w, grid.dt);
    out.var_x = cumulative_integral(out.vol, grid.dt);
    if (s.model == ModelKind::StochasticF) {
        // X - E X = int G ds + int sigma (1 + E f + G) dW with G = int sigma_f dW:
        // Var int G ds = 2 int (t-u) Var f(u) du and the cross term is
        // 2 int (t-u) sigma_f sigma (1 + E f) du; the Ito term is int vol.
        const Curve var_f = stochastic_f_variance(*s.sigma_f, grid);
        Curve g(grid.size());
        for (std::size_t k = 0; k < g.size(); ++k)
            g[k] = var_f[k] + (*s.sigma_f)(grid.time(k)) * sig[k] * (1.0 + f[k]);
        const Curve twice = cumulative_integral(cumulative_integral(g, grid.dt), grid.dt);
        for (std::size_t k = 0; k < g.size(); ++k) out.var_x[k] += 2.0 * twice[k];
    }
    out.z.resize(grid.size());
    for (std::size_t k = 0; k < out.z.size(); ++k) out.z[k] = out.y[k] * out.y[k] + out.var_x[k];
    out.q = gradient(out.w, grid.dt);
    return out;
}

/// Index of the largest sample (first one on ties).
inline std::size_t argmax(const Curve& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace sdvol
