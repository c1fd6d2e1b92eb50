#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sdvol/analytic.hpp"
#include "sdvol/config.hpp"
#include "sdvol/roots.hpp"
#include "sdvol/scenario.hpp"

namespace sdvol {

struct ConditionReport {
    bool sigma_ok = false;
    bool C1_ok = false;  ///< x_a rises then falls with one interior peak
    bool C2_ok = false;  ///< x_a(t0) - x_a'(t0) < y0 < x_a(t0)
    bool C3_ok = false;  ///< -x_a' > m1 > 0 beyond t_m + delta
    double delta = 0.0;
    double m1 = 0.0;
    std::optional<bool> E_ok;  ///< set once t* is known
    double E_value = 0.0;      ///< 2 x_a'(t*) + sigma^2 e^{c (t0 - t*)}

    bool all_ok() const noexcept { return sigma_ok && C1_ok && C2_ok && C3_ok && E_ok.value_or(false); }
};

struct ExtremaReport {
    std::optional<double> t1, tv, tm, tstar;
    std::size_t tv_roots = 0;  ///< zeros of Q in (t1, t*)
    std::vector<std::string> notes;
    bool ordering_ok = false;     ///< t0 < t1 < tv < tm < t*
    std::vector<double> margins;  ///< consecutive gaps of (t0, t1, tv, tm, t*) in grid steps
    ConditionReport conditions;

    double min_margin() const {
        double m = margins.empty() ? 0.0 : margins.front();
        for (double v : margins) m = std::min(m, v);
        return m;
    }
};

namespace extrema_detail {

inline std::function<double(double)> spec_fn(const FunctionSpec& f) {
    return [&f](double t) { return f(t); };
}

/// t_m: root of the analytic x_a', refined on x_a' itself.
inline RootResult peak_of(const FunctionSpec& f, const TimeGrid& grid) {
    const Curve d = f.sample_derivative(grid);
    return find_first_root(d, grid, [&f](double t) { return f.derivative(t); }, grid.t0, grid.last_time());
}

}  // namespace extrema_detail

/// Conditions sigma, C(i)-(iii) and E for a valuation scenario. E is
/// evaluated only when t* is supplied.
inline ConditionReport check_conditions(const Scenario& s, const AnalyticCurves& curves,
                                        std::optional<double> tstar = std::nullopt) {
    ConditionReport r;
    const TimeGrid& grid = s.grid;
    const FunctionSpec& x_a = s.drift;
    const double sigma = s.sigma_is_constant() ? s.sigma_constant() : -1.0;
    r.sigma_ok = s.sigma_is_constant() && sigma > 0.0 && sigma < 1.0;

    const Curve d = x_a.sample_derivative(grid);
    const RootResult peak = extrema_detail::peak_of(x_a, grid);
    if (peak.found() && peak.count == 1) {
        const double tm = *peak.t;
        bool ok = true;
        for (std::size_t k = 0; k < grid.size() && ok; ++k) {
            const double t = grid.time(k);
            if (std::abs(t - tm) < 0.5 * grid.dt) continue;
            ok = t < tm ? d[k] > 0.0 : d[k] < 0.0;
        }
        r.C1_ok = ok && tm > grid.t0 && tm < grid.last_time();

        // Smallest delta (in grid steps) beyond which -x_a' stays above a positive floor.
        Curve tail_min(grid.size() + 1, std::numeric_limits<double>::infinity());
        for (std::size_t j = grid.size(); j-- > 0;) tail_min[j] = std::min(tail_min[j + 1], -d[j]);
        for (std::size_t k = grid.nearest_index(tm) + 1; k < grid.n_steps && !r.C3_ok; ++k) {
            const double floor = tail_min[k + 1];
            if (floor > 0.0) {
                r.C3_ok = true;
                r.delta = grid.time(k) - tm;
                r.m1 = 0.5 * floor;
            }
        }
    }
    const double xa0 = x_a(grid.t0);
    r.C2_ok = xa0 - x_a.derivative(grid.t0) < s.y0 && s.y0 < xa0;

    if (tstar) {
        r.E_value = 2.0 * x_a.derivative(*tstar) + sigma * sigma * std::exp(curves.c * (grid.t0 - *tstar));
        r.E_ok = r.E_value < 0.0;
    }
    return r;
}

/// Locates t1, tv, tm, t* on the analytic curves of a valuation scenario.
inline ExtremaReport locate_extrema(const Scenario& s, const AnalyticCurves& curves) {
    using extrema_detail::peak_of;
    ExtremaReport r;
    const TimeGrid& grid = s.grid;
    const FunctionSpec& x_a = s.drift;
    const SampledCurve y(curves.y, grid);
    const SampledCurve q(curves.q, grid);
    const double t0 = grid.t0;
    const double te = grid.last_time();

    const RootResult tm = peak_of(x_a, grid);
    if (tm.found()) r.tm = tm.t;
    else r.notes.push_back("tm not found: " + tm.note);

    Curve gap(grid.size()), S(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid.time(k);
        gap[k] = x_a(t) - curves.y[k];
        S[k] = x_a.derivative(t) - x_a(t) + curves.y[k];
    }
    const RootResult ts = find_first_root(gap, grid, [&](double t) { return x_a(t) - y(t); }, t0, te);
    if (ts.found()) r.tstar = ts.t;
    else r.notes.push_back("tstar not found: " + ts.note);

    const RootResult t1 =
        find_first_root(S, grid, [&](double t) { return x_a.derivative(t) - x_a(t) + y(t); }, t0, te);
    if (t1.found()) r.t1 = t1.t;
    else r.notes.push_back("t1 not found: " + t1.note);

    if (r.t1 && r.tstar && *r.t1 < *r.tstar) {
        const RootResult tv = find_first_root(curves.q, grid, q, *r.t1, *r.tstar);
        r.tv_roots = tv.count;
        if (tv.found()) r.tv = tv.t;
        else r.notes.push_back("tv not found: " + tv.note);
    } else {
        r.notes.push_back("tv not searched: needs t1 < tstar");
    }

    r.conditions = check_conditions(s, curves, r.tstar);
    if (r.t1 && r.tv && r.tm && r.tstar) {
        const double seq[5] = {t0, *r.t1, *r.tv, *r.tm, *r.tstar};
        r.ordering_ok = true;
        for (int i = 0; i < 4; ++i) {
            r.margins.push_back((seq[i + 1] - seq[i]) / grid.dt);
            if (!(seq[i + 1] > seq[i])) r.ordering_ok = false;
        }
    }
    return r;
}

/// Deterministic model: f peaks at t_m and crosses zero downward at t_b;
/// log P = y0 + int f peaks at t_b.
struct PeakLag {
    std::optional<double> tm;
    std::optional<double> tb;
    double argmax_time = 0.0;  ///< grid argmax of y0 + int f
    bool ok = false;           ///< t_b > t_m and argmax within one cell of t_b
};

inline PeakLag deterministic_peak_lag(const FunctionSpec& f, double y0, const TimeGrid& grid) {
    PeakLag r;
    const RootResult tm = extrema_detail::peak_of(f, grid);
    if (tm.found()) r.tm = tm.t;
    const Curve fv = f.sample(grid);
    if (r.tm) {
        const RootResult tb = find_first_root(fv, grid, extrema_detail::spec_fn(f), *r.tm, grid.last_time());
        if (tb.found()) r.tb = tb.t;
    }
    Curve y = cumulative_integral(fv, grid.dt);
    for (double& v : y) v += y0;
    r.argmax_time = grid.time(argmax(y));
    r.ok = r.tm && r.tb && *r.tb > *r.tm && std::abs(r.argmax_time - *r.tb) <= grid.dt;
    return r;
}

struct SignLemmaFlags {
    bool Q_at_t1_positive = false;
    bool Q_at_tstar_negative = false;
    double Q_t1 = 0.0;
    double Q_tstar = 0.0;
    std::optional<PeakLag> deterministic_peak_lag;
};

/// Signs of Q at t1 and t*, plus the deterministic peak lag of the drift when
/// the scenario is a supply/demand model.
inline SignLemmaFlags verify_sign_lemmas(const Scenario& s, const AnalyticCurves& curves,
                                         const ExtremaReport& report) {
    SignLemmaFlags f;
    const SampledCurve q(curves.q, s.grid);
    if (report.t1) {
        f.Q_t1 = q(*report.t1);
        f.Q_at_t1_positive = f.Q_t1 > 0.0;
    }
    if (report.tstar) {
        f.Q_tstar = q(*report.tstar);
        f.Q_at_tstar_negative = f.Q_tstar < 0.0;
    }
    if (uses_supply_demand_ratio(s.model)) f.deterministic_peak_lag = deterministic_peak_lag(s.drift, s.y0, s.grid);
    return f;
}

inline std::string format_optional(const std::optional<double>& v) {
    return v ? format_real(*v) : std::string("not_found");
}

/// Structured text, one `key = value` per line.
inline std::string format_extrema_report(const ExtremaReport& r) {
    std::ostringstream out;
    const auto& c = r.conditions;
    out << "t1 = " << format_optional(r.t1) << "\n";
    out << "tv = " << format_optional(r.tv) << "\n";
    out << "tm = " << format_optional(r.tm) << "\n";
    out << "tstar = " << format_optional(r.tstar) << "\n";
    out << "tv_roots = " << r.tv_roots << "\n";
    out << "ordering_ok = " << (r.ordering_ok ? "true" : "false") << "\n";
    out << "sigma_ok = " << (c.sigma_ok ? "true" : "false") << "\n";
    out << "C1_ok = " << (c.C1_ok ? "true" : "false") << "\n";
    out << "C2_ok = " << (c.C2_ok ? "true" : "false") << "\n";
    out << "C3_ok = " << (c.C3_ok ? "true" : "false") << "\n";
    out << "C3_delta = " << format_real(c.delta) << "\n";
    out << "C3_m1 = " << format_real(c.m1) << "\n";
    out << "E_ok = " << (c.E_ok ? (*c.E_ok ? "true" : "false") : "not_evaluated") << "\n";
    out << "E_value = " << format_real(c.E_value) << "\n";
    out << "margins =";
    for (std::size_t i = 0; i < r.margins.size(); ++i) out << (i ? ", " : " ") << format_real(r.margins[i]);
    out << "\n";
    for (const auto& n : r.notes) out << "note = " << n << "\n";
    return out.str();
}

}  // namespace sdvol
