#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

#include "sdvol/grid.hpp"

namespace sdvol {

/// Simpson's rule on [a, b] using the midpoint.
template <class F>
double simpson(F&& f, double a, double b) {
    const double m = 0.5 * (a + b);
    return (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
}

/// Composite Simpson on [a, b] with `panels` sub-intervals.
template <class F>
double composite_simpson(F&& f, double a, double b, std::size_t panels) {
    if (panels == 0) throw std::invalid_argument("composite_simpson: panels must be positive");
    const double h = (b - a) / static_cast<double>(panels);
    double acc = 0.0;
    for (std::size_t i = 0; i < panels; ++i) {
        const double lo = a + h * static_cast<double>(i);
        acc += simpson(f, lo, lo + h);
    }
    return acc;
}

/// Integral of a sampled function over a single grid cell [t_k, t_k+1] from the
/// cubic through the four nearest samples (one-sided at the ends). Fourth order,
/// like Simpson, but uses grid samples only.
inline double cell_integral(std::span<const double> g, std::size_t k, double dt) {
    const std::size_t n = g.size();
    if (n < 2 || k + 1 >= n) throw std::out_of_range("cell_integral: cell outside samples");
    if (n < 4) return 0.5 * dt * (g[k] + g[k + 1]);
    if (k == 0) return dt / 24.0 * (9.0 * g[0] + 19.0 * g[1] - 5.0 * g[2] + g[3]);
    if (k + 2 == n)
        return dt / 24.0 * (9.0 * g[n - 1] + 19.0 * g[n - 2] - 5.0 * g[n - 3] + g[n - 4]);
    return dt / 24.0 * (-g[k - 1] + 13.0 * g[k] + 13.0 * g[k + 1] - g[k + 2]);
}

/// Running integral I(t_k) = int_{t0}^{t_k} g(s) ds over a sampled curve.
inline Curve cumulative_integral(std::span<const double> g, double dt) {
    Curve out(g.size(), 0.0);
    for (std::size_t k = 0; k + 1 < g.size(); ++k) out[k + 1] = out[k] + cell_integral(g, k, dt);
    return out;
}

/// I(t_k) = int_{t0}^{t_k} exp(rate (s - t_k)) g(s) ds via the recursion
/// I(t + dt) = exp(-rate dt) I(t) + local cell integral, O(n) overall.
inline Curve exp_weighted_integral(std::span<const double> g, double rate, double dt) {
    Curve out(g.size(), 0.0);
    if (g.size() < 2) return out;
    const double decay = std::exp(-rate * dt);
    double window[4];
    const std::size_t n = g.size();
    for (std::size_t k = 0; k + 1 < n; ++k) {
        // Weighted samples e^{rate (t_j - t_{k+1})} g_j on the stencil of cell k.
        const std::size_t lo = (n < 4 || k == 0) ? 0 : (k + 2 == n ? n - 4 : k - 1);
        const std::size_t cnt = n < 4 ? n : 4;
        for (std::size_t j = 0; j < cnt; ++j) {
            const double offset = static_cast<double>(lo + j) - static_cast<double>(k + 1);
            window[j] = std::exp(rate * offset * dt) * g[lo + j];
        }
        const std::size_t local_k = k - lo;
        out[k + 1] = decay * out[k] + cell_integral(std::span<const double>(window, cnt), local_k, dt);
    }
    return out;
}

}  // namespace sdvol
