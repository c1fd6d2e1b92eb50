#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>

#include "sdvol/grid.hpp"

namespace sdvol {

/// Cubic Lagrange interpolant through the four samples nearest to t.
/// Exact at grid points; clamped to the grid outside it.
class SampledCurve {
public:
    SampledCurve(const Curve& values, const TimeGrid& grid) : v_(&values), grid_(grid) {}

    double operator()(double t) const {
        const Curve& v = *v_;
        const std::size_t n = v.size();
        if (n == 1) return v[0];
        const double u = std::clamp((t - grid_.t0) / grid_.dt, 0.0, static_cast<double>(n - 1));
        if (n < 4) {
            const std::size_t k = std::min(static_cast<std::size_t>(u), n - 2);
            const double a = u - static_cast<double>(k);
            return v[k] + a * (v[k + 1] - v[k]);
        }
        std::size_t k = static_cast<std::size_t>(u);
        if (k >= n - 1) k = n - 2;
        const std::size_t lo = k == 0 ? 0 : std::min(k - 1, n - 4);
        const double x = u - static_cast<double>(lo);
        // Nodes at 0, 1, 2, 3 relative to lo.
        const double l0 = -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0;
        const double l1 = x * (x - 2.0) * (x - 3.0) / 2.0;
        const double l2 = -x * (x - 1.0) * (x - 3.0) / 2.0;
        const double l3 = x * (x - 1.0) * (x - 2.0) / 6.0;
        return l0 * v[lo] + l1 * v[lo + 1] + l2 * v[lo + 2] + l3 * v[lo + 3];
    }

private:
    const Curve* v_;
    TimeGrid grid_;
};

/// Outcome of a first-root search. `t` is empty when no sign change exists;
/// a touch of zero without crossing sets `tangency` and leaves `t` empty.
struct RootResult {
    std::optional<double> t;
    std::size_t count = 0;  ///< sign changes found in the search window
    bool tangency = false;
    std::string note;

    bool found() const noexcept { return t.has_value(); }
};

/// Bisection on [a, b] with g(a), g(b) of opposite sign, to |b - a| < tol.
inline double bisect(const std::function<double(double)>& g, double a, double b, double tol) {
    double ga = g(a);
    for (int it = 0; it < 200 && b - a > tol; ++it) {
        const double m = 0.5 * (a + b);
        const double gm = g(m);
        if (gm == 0.0) return m;
        if ((gm > 0.0) == (ga > 0.0)) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

inline int sign_of(double v) noexcept { return (v > 0.0) - (v < 0.0); }

/**
 * First root of g in the open window (lo, hi) found by scanning the grid
 * samples for a sign change and refining with bisection on `refine`
 * (an interpolant or the analytic function). Tolerance is 1e-10 of the grid span.
 */
inline RootResult find_first_root(const Curve& samples, const TimeGrid& grid,
                                  const std::function<double(double)>& refine, double lo,
                                  double hi) {
    RootResult res;
    const double tol = 1e-10 * grid.span();
    std::size_t k0 = 0;
    while (k0 < grid.n_steps && grid.time(k0) <= lo) ++k0;
    std::size_t k1 = grid.n_steps;
    while (k1 > 0 && grid.time(k1) >= hi) --k1;
    if (k0 > k1) return res;

    // Window ends may be off-grid; seed the scan with the function value there.
    double prev_t = lo;
    double prev_v = refine(lo);
    int prev_s = sign_of(prev_v);
    bool touched = false;
    auto note_crossing = [&](double a, double b, double va) {
        ++res.count;
        if (!res.t) res.t = va == 0.0 ? a : bisect(refine, a, b, tol);
    };
    for (std::size_t k = k0; k <= k1 + 1; ++k) {
        const bool tail = k == k1 + 1;
        const double t = tail ? hi : grid.time(k);
        const double v = tail ? refine(hi) : samples[k];
        const int s = sign_of(v);
        if (s == 0) {
            touched = true;
            continue;
        }
        if (prev_s != 0 && s != prev_s) {
            note_crossing(prev_t, t, prev_v);
        } else if (prev_s != 0 && touched) {
            res.tangency = true;
        }
        touched = false;
        prev_t = t;
        prev_v = v;
        prev_s = s;
    }
    if (!res.t) res.note = res.tangency ? "tangency without sign change" : "no sign change in window";
    return res;
}

}  // namespace sdvol
