#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "sdvol/errors.hpp"

namespace sdvol {

/// Sampled values of a quantity on a TimeGrid, one entry per grid point.
using Curve = std::vector<double>;

/// Uniform time grid t_k = t0 + k*dt, k = 0..n_steps.
struct TimeGrid {
    double t0 = 0.0;
    double t_end = 1.0;
    double dt = 1e-3;
    std::size_t n_steps = 1000;

    static TimeGrid make(double t0, double t_end, double dt) {
        if (!std::isfinite(t0) || !std::isfinite(t_end) || !std::isfinite(dt))
            throw ValidationError("grid: t0, t_end and dt must be finite");
        if (!(dt > 0.0)) throw ValidationError("grid: dt must be positive");
        if (!(t_end > t0)) throw ValidationError("grid: t_end must exceed t0");
        const double steps = std::round((t_end - t0) / dt);
        if (steps < 1.0) throw ValidationError("grid: horizon shorter than one step");
        return TimeGrid{t0, t_end, dt, static_cast<std::size_t>(steps)};
    }

    std::size_t size() const noexcept { return n_steps + 1; }
    double time(std::size_t k) const noexcept { return t0 + static_cast<double>(k) * dt; }
    double last_time() const noexcept { return time(n_steps); }
    double span() const noexcept { return last_time() - t0; }

    /// Index of the grid point at time t, if t lies on the grid (to 1e-6 of a step).
    std::optional<std::size_t> index_of(double t) const noexcept {
        const double k = (t - t0) / dt;
        const double r = std::round(k);
        if (r < 0.0 || r > static_cast<double>(n_steps) || std::abs(k - r) > 1e-6)
            return std::nullopt;
        return static_cast<std::size_t>(r);
    }

    /// Nearest grid index to t, clamped to the grid.
    std::size_t nearest_index(double t) const noexcept {
        const double k = std::round((t - t0) / dt);
        if (k <= 0.0) return 0;
        if (k >= static_cast<double>(n_steps)) return n_steps;
        return static_cast<std::size_t>(k);
    }

    std::vector<double> times() const {
        std::vector<double> out(size());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = time(k);
        return out;
    }

    Curve zeros() const { return Curve(size(), 0.0); }

    bool operator==(const TimeGrid&) const = default;
};

}  // namespace sdvol
