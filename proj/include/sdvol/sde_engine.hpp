#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sdvol/analytic.hpp"
#include "sdvol/errors.hpp"
#include "sdvol/rng.hpp"
#include "sdvol/scenario.hpp"
#include "sdvol/stats.hpp"
#include "sdvol/validation.hpp"

namespace sdvol {

/// Paths per reduction block. Fixed so results never depend on the worker count.
inline constexpr std::size_t kBlockPaths = 1024;

/// Largest path matrix simulate() will materialize (entries, not bytes).
inline constexpr std::size_t kMaxMatrixEntries = 64'000'000;

// --- model coefficients ------------------------------------------------------

struct StepCoefficients {
    double a;
    double b;
    const char* guard;  ///< non-null when the state left the admissible region
};

/// Drift and diffusion at one step. `fval` is f (or E f path value for the
/// deterministic models, the f state for stochastic_f), x_a for valuation, mu for gbm.
inline StepCoefficients coefficients(ModelKind m, double fval, double sigma, double x, int power) {
    switch (m) {
        case ModelKind::Valuation: {
            const double gap = 1.0 + fval - x;
            if (!(gap > 0.0)) return {0.0, 0.0, "valuation diffusion factor 1+x_a-X <= 0"};
            return {fval - x, sigma * gap, nullptr};
        }
        case ModelKind::GbmControl: return {fval, sigma, nullptr};
        default: {
            if (!(1.0 + fval > 0.0)) return {0.0, 0.0, "guard 1+f <= 0"};
            return {model_drift(m, fval), sigma * unit_diffusion(m, fval, power), nullptr};
        }
    }
}

namespace engine_detail {

/// Grid samples of every function a path needs.
struct Prepared {
    ModelKind model;
    TimeGrid grid;
    Curve drift;        ///< f, x_a, mu, or E f
    Curve drift_slope;  ///< E f' (stochastic_f only)
    Curve sigma;
    Curve sigma_f;
    int power = 1;
    double y0 = 0.0;
    std::uint64_t seed = 0;
    std::size_t n_paths = 0;
    double sqrt_dt = 0.0;

    bool has_driver() const noexcept { return model == ModelKind::StochasticF; }
};

inline Prepared prepare(const Scenario& s) {
    Prepared p;
    p.model = s.model;
    p.grid = s.grid;
    p.drift = s.drift.sample(s.grid);
    p.sigma = s.sigma.sample(s.grid);
    if (s.model == ModelKind::StochasticF) {
        if (!s.sigma_f) throw ValidationError("stochastic_f needs sigma_f");
        p.drift_slope = s.drift.sample_derivative(s.grid);
        p.sigma_f = s.sigma_f->sample(s.grid);
    }
    p.power = s.power.value_or(1);
    p.y0 = s.y0;
    p.seed = s.seed;
    p.n_paths = s.n_paths;
    p.sqrt_dt = std::sqrt(s.grid.dt);
    return p;
}

struct Guard {
    std::size_t step;
    const char* what;
};

/// Euler-Maruyama for one path. Writes X (and f when tracked) for every grid
/// point. The first normal of each step drives both X and f.
template <class Noise>
std::optional<Guard> run_path(const Prepared& m, Noise&& noise, double* x, double* f) {
    const double dt = m.grid.dt;
    double X = m.y0;
    double F = m.has_driver() ? m.drift[0] : 0.0;
    x[0] = X;
    if (f) f[0] = F;
    for (std::size_t k = 0; k < m.grid.n_steps; ++k) {
        const double fval = m.has_driver() ? F : m.drift[k];
        const StepCoefficients c = coefficients(m.model, fval, m.sigma[k], X, m.power);
        if (c.guard) return Guard{k, c.guard};
        const double z = noise();
        X = X + c.a * dt + c.b * m.sqrt_dt * z;
        if (m.has_driver()) F = F + m.drift_slope[k] * dt + m.sigma_f[k] * m.sqrt_dt * z;
        if (!std::isfinite(X) || !std::isfinite(F)) return Guard{k + 1, "non-finite state"};
        x[k + 1] = X;
        if (f) f[k + 1] = F;
    }
    return std::nullopt;
}

struct ZeroNoise {
    double operator()() const noexcept { return 0.0; }
};

/// Noise-free path used as the centering reference for every reduction.
inline void reference_path(const Prepared& m, Curve& x, Curve& f) {
    x.assign(m.grid.size(), 0.0);
    f.assign(m.grid.size(), 0.0);
    if (auto g = run_path(m, ZeroNoise{}, x.data(), f.data()))
        throw GuardViolation(std::string(g->what) + " on the noise-free path", 0, g->step,
                             m.grid.time(g->step));
}

inline std::size_t block_count(std::size_t n_paths) { return (n_paths + kBlockPaths - 1) / kBlockPaths; }

/**
 * Runs make(b) for every block b and folds the results with merge(partial)
 * in increasing block order, independent of `workers`. A block whose result
 * reports failed() stops later blocks; the failure of the lowest failing block
 * is returned.
 */
template <class Partial, class Make, class Merge>
std::optional<Partial> run_blocks(std::size_t n_blocks, unsigned workers, Make make, Merge merge) {
    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    if (workers <= 1 || n_blocks <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) {
            Partial p = make(b);
            if (p.failed()) return p;
            merge(p);
        }
        return std::nullopt;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> fail_block{kNone};
    std::mutex mu;
    std::map<std::size_t, Partial> ready;
    std::size_t merged = 0;
    std::optional<Partial> failure;
    std::exception_ptr error;

    auto worker = [&] {
        try {
            for (;;) {
                const std::size_t b = next.fetch_add(1);
                if (b >= n_blocks || b > fail_block.load()) return;
                Partial p = make(b);
                std::lock_guard<std::mutex> lock(mu);
                if (p.failed()) {
                    if (b < fail_block.load()) {
                        fail_block.store(b);
                        failure = std::move(p);
                    }
                    continue;
                }
                ready.emplace(b, std::move(p));
                while (!ready.empty() && ready.begin()->first == merged && merged < fail_block.load()) {
                    merge(ready.begin()->second);
                    ready.erase(ready.begin());
                    ++merged;
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(mu);
            if (!error) error = std::current_exception();
            fail_block.store(0);
        }
    };
    std::vector<std::thread> pool;
    const unsigned n = static_cast<unsigned>(std::min<std::size_t>(workers, n_blocks));
    pool.reserve(n);
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return failure;
}

}  // namespace engine_detail

// --- path matrices -----------------------------------------------------------

/// Simulated paths, row-major n_paths x (n_steps + 1).
struct PathEnsemble {
    TimeGrid grid;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    ModelKind model = ModelKind::SupplyDemandSimple;
    std::vector<double> log_price;
    std::vector<double> driver;  ///< f paths, stochastic_f only
    Curve reference;             ///< noise-free log price path
    Curve reference_driver;

    std::size_t width() const noexcept { return grid.size(); }

    std::span<const double> log_price_row(std::size_t p) const {
        return {log_price.data() + p * width(), width()};
    }
    std::span<const double> driver_row(std::size_t p) const { return {driver.data() + p * width(), width()}; }

    /// The simulated path: f for stochastic_f runs, log price otherwise.
    std::span<const double> path(std::size_t p) const {
        return model == ModelKind::StochasticF ? driver_row(p) : log_price_row(p);
    }
};

namespace engine_detail {

struct MatrixBlock {
    std::optional<GuardViolation> guard;
    bool failed() const noexcept { return guard.has_value(); }
};

inline GuardViolation make_guard(const Prepared& m, std::size_t path, const Guard& g) {
    return GuardViolation(g.what, path, g.step, m.grid.time(g.step));
}

}  // namespace engine_detail

/// Euler-Maruyama ensemble. Throws GuardViolation for the lowest (path, step)
/// that leaves the admissible region, ValidationError for an invalid scenario.
inline PathEnsemble simulate(const Scenario& s, unsigned workers = 1) {
    using namespace engine_detail;
    require_valid(s);
    const Prepared m = prepare(s);
    const std::size_t w = s.grid.size();
    if (s.n_paths > kMaxMatrixEntries / w)
        throw ValidationError("path matrix too large; use the streaming summaries");
    PathEnsemble e;
    e.grid = s.grid;
    e.n_paths = s.n_paths;
    e.seed = s.seed;
    e.model = s.model;
    reference_path(m, e.reference, e.reference_driver);
    e.log_price.assign(s.n_paths * w, 0.0);
    if (m.has_driver()) e.driver.assign(s.n_paths * w, 0.0);
    else e.reference_driver.clear();

    auto make = [&](std::size_t b) {
        MatrixBlock out;
        const std::size_t end = std::min(s.n_paths, (b + 1) * kBlockPaths);
        for (std::size_t p = b * kBlockPaths; p < end; ++p) {
            NormalStream z(s.seed, StreamId::Ensemble, p);
            double* f = m.has_driver() ? e.driver.data() + p * w : nullptr;
            if (auto g = run_path(m, [&] { return z.next(); }, e.log_price.data() + p * w, f)) {
                out.guard = make_guard(m, p, *g);
                break;
            }
        }
        return out;
    };
    if (auto fail = run_blocks<MatrixBlock>(block_count(s.n_paths), workers, make, [](MatrixBlock&) {}))
        throw *fail->guard;
    return e;
}

// --- streaming summaries -----------------------------------------------------

namespace engine_detail {

/// Per-grid-point power sums of one block (or of the whole run).
struct SummarySums {
    std::vector<PowerSums> level;      ///< X(t_k)
    std::vector<PowerSums> increment;  ///< X(t_k+1) - X(t_k), k < n
    std::vector<PowerSums> jensen;     ///< exp(X(t_m) - X(t_k))
    std::vector<PowerSums> driver;     ///< f(t_k), stochastic_f only
    std::optional<GuardViolation> guard;

    bool failed() const noexcept { return guard.has_value(); }

    SummarySums& operator+=(const SummarySums& o) {
        auto add = [](std::vector<PowerSums>& a, const std::vector<PowerSums>& b) {
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
        };
        add(level, o.level);
        add(increment, o.increment);
        add(jensen, o.jensen);
        add(driver, o.driver);
        return *this;
    }
};

struct SumLayout {
    bool level = true;
    bool increment = true;
    std::optional<std::size_t> jensen_index;
    bool driver = false;
};

inline SummarySums empty_sums(std::size_t width, const SumLayout& l) {
    SummarySums s;
    if (l.level) s.level.resize(width);
    if (l.increment) s.increment.resize(width - 1);
    if (l.jensen_index) s.jensen.resize(width);
    if (l.driver) s.driver.resize(width);
    return s;
}

/// Adds one path. Deviations are taken from the noise-free reference so a
/// noise-free run accumulates exact zeros.
inline void accumulate_path(SummarySums& s, const SumLayout& l, std::span<const double> x,
                            std::span<const double> f, const Curve& ref, const Curve& ref_f) {
    const std::size_t n = std::max(x.size(), f.size());
    if (l.level)
        for (std::size_t k = 0; k < n; ++k) s.level[k].add_deviation(x[k] - ref[k]);
    if (l.increment)
        for (std::size_t k = 0; k + 1 < n; ++k)
            s.increment[k].add_deviation((x[k + 1] - x[k]) - (ref[k + 1] - ref[k]));
    if (l.jensen_index) {
        const std::size_t m = *l.jensen_index;
        for (std::size_t k = 0; k < n; ++k)
            s.jensen[k].add_deviation(std::exp(x[m] - x[k]) - std::exp(ref[m] - ref[k]));
    }
    if (l.driver)
        for (std::size_t k = 0; k < n; ++k) s.driver[k].add_deviation(f[k] - ref_f[k]);
}

}  // namespace engine_detail

/// Cross-path statistics per grid point, reduced in a fixed block order.
struct EnsembleSummary {
    TimeGrid grid;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    ModelKind model = ModelKind::SupplyDemandSimple;
    Curve reference;
    Curve mean_x, var_x, se_mean_x, se_var_x;
    Curve volhat, se_volhat;  ///< last point repeats the final increment
    std::optional<std::size_t> jensen_index;
    Curve jensen_mean, jensen_se;
    Curve mean_f, var_f, se_var_f;  ///< stochastic_f only
};

struct SummaryOptions {
    std::optional<std::size_t> jensen_index;  ///< grid index of t_m
    unsigned workers = 1;
};

namespace engine_detail {

inline void moments_to_curves(const std::vector<PowerSums>& sums, const Curve& ref, Curve& mean, Curve& var,
                              Curve* se_mean, Curve* se_var) {
    const std::size_t n = sums.size();
    mean.resize(n);
    var.resize(n);
    if (se_mean) se_mean->resize(n);
    if (se_var) se_var->resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const SampleMoments m = moments_from(sums[k], ref[k]);
        mean[k] = m.mean;
        var[k] = m.variance;
        if (se_mean) (*se_mean)[k] = m.se_mean;
        if (se_var) (*se_var)[k] = m.se_variance;
    }
}

inline void volatility_from(const std::vector<PowerSums>& inc, double dt, Curve& vol, Curve& se) {
    const std::size_t n = inc.size() + 1;
    vol.assign(n, 0.0);
    se.assign(n, 0.0);
    for (std::size_t k = 0; k < inc.size(); ++k) {
        const SampleMoments m = moments_from(inc[k], 0.0);
        vol[k] = m.variance / dt;
        se[k] = m.se_variance / dt;
    }
    vol[n - 1] = vol[n - 2];
    se[n - 1] = se[n - 2];
}

}  // namespace engine_detail

/// Simulates the scenario path by path and keeps only per-grid-point sums,
/// so memory is independent of n_paths. Throws like simulate().
inline EnsembleSummary summarize(const Scenario& s, const SummaryOptions& opt = {}) {
    using namespace engine_detail;
    require_valid(s);
    const Prepared m = prepare(s);
    const std::size_t w = s.grid.size();
    EnsembleSummary out;
    out.grid = s.grid;
    out.n_paths = s.n_paths;
    out.seed = s.seed;
    out.model = s.model;
    out.jensen_index = opt.jensen_index;
    if (opt.jensen_index && *opt.jensen_index >= w) throw std::out_of_range("summarize: jensen index off grid");
    Curve ref_f;
    reference_path(m, out.reference, ref_f);
    const SumLayout layout{true, true, opt.jensen_index, m.has_driver()};

    SummarySums total = empty_sums(w, layout);
    auto make = [&](std::size_t b) {
        SummarySums part = empty_sums(w, layout);
        std::vector<double> x(w), f(w);
        const std::size_t end = std::min(s.n_paths, (b + 1) * kBlockPaths);
        for (std::size_t p = b * kBlockPaths; p < end; ++p) {
            NormalStream z(s.seed, StreamId::Ensemble, p);
            if (auto g = run_path(m, [&] { return z.next(); }, x.data(), f.data())) {
                part.guard = make_guard(m, p, *g);
                break;
            }
            accumulate_path(part, layout, x, f, out.reference, ref_f);
        }
        return part;
    };
    if (auto fail = run_blocks<SummarySums>(block_count(s.n_paths), opt.workers, make,
                                            [&](SummarySums& p) { total += p; }))
        throw *fail->guard;

    moments_to_curves(total.level, out.reference, out.mean_x, out.var_x, &out.se_mean_x, &out.se_var_x);
    volatility_from(total.increment, s.grid.dt, out.volhat, out.se_volhat);
    if (opt.jensen_index) {
        Curve ref_ratio(w), var_unused;
        for (std::size_t k = 0; k < w; ++k)
            ref_ratio[k] = std::exp(out.reference[*opt.jensen_index] - out.reference[k]);
        moments_to_curves(total.jensen, ref_ratio, out.jensen_mean, var_unused, &out.jensen_se, nullptr);
    }
    if (m.has_driver()) moments_to_curves(total.driver, ref_f, out.mean_f, out.var_f, nullptr, &out.se_var_f);
    return out;
}

// --- estimators on a path matrix ----------------------------------------------

struct IncrementStats {
    double t = 0.0;
    double dt = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    double std_error_mean = 0.0;
    double std_error_var = 0.0;
};

/// Statistics of X(t + dt) - X(t) across paths; t and t + dt must be grid points.
inline IncrementStats estimate_increment_stats(const PathEnsemble& e, double t, double dt) {
    const auto i0 = e.grid.index_of(t);
    const auto i1 = e.grid.index_of(t + dt);
    if (!i0 || !i1 || *i1 <= *i0)
        throw std::out_of_range("estimate_increment_stats: t and t+dt must be distinct grid points");
    const double ref = e.reference[*i1] - e.reference[*i0];
    PowerSums total;
    for (std::size_t b = 0; b < engine_detail::block_count(e.n_paths); ++b) {
        PowerSums part;
        const std::size_t end = std::min(e.n_paths, (b + 1) * kBlockPaths);
        for (std::size_t p = b * kBlockPaths; p < end; ++p) {
            const auto x = e.log_price_row(p);
            part.add_deviation((x[*i1] - x[*i0]) - ref);
        }
        total += part;
    }
    const SampleMoments m = moments_from(total, ref);
    return {t, dt, m.mean, m.variance, m.se_mean, m.se_variance};
}

struct VolatilityEstimate {
    Curve vol;
    Curve se;
};

/// Vhat(t_k) = Var[X(t_k+1) - X(t_k)] / dt per grid point. Bit-identical to
/// the volhat of summarize() for the same scenario.
inline VolatilityEstimate estimate_limiting_volatility(const PathEnsemble& e) {
    using namespace engine_detail;
    if (e.grid.n_steps < 2) throw std::invalid_argument("estimate_limiting_volatility: need >= 2 steps");
    const SumLayout layout{false, true, std::nullopt, false};
    SummarySums total = empty_sums(e.width(), layout);
    for (std::size_t b = 0; b < block_count(e.n_paths); ++b) {
        SummarySums part = empty_sums(e.width(), layout);
        const std::size_t end = std::min(e.n_paths, (b + 1) * kBlockPaths);
        for (std::size_t p = b * kBlockPaths; p < end; ++p)
            accumulate_path(part, layout, e.log_price_row(p), {}, e.reference, e.reference_driver);
        total += part;
    }
    VolatilityEstimate v;
    volatility_from(total.increment, e.grid.dt, v.vol, v.se);
    return v;
}

struct JensenResult {
    std::size_t anchor = 0;
    Curve mean;
    Curve se;
    std::vector<double> flagged_times;  ///< t with mean < 1 - 4 SE

    bool ok() const noexcept { return flagged_times.empty(); }
};

inline JensenResult jensen_from(const TimeGrid& grid, std::size_t anchor, Curve mean, Curve se) {
    JensenResult r{anchor, std::move(mean), std::move(se), {}};
    for (std::size_t k = 0; k < r.mean.size(); ++k)
        if (r.mean[k] < 1.0 - 4.0 * r.se[k]) r.flagged_times.push_back(grid.time(k));
    return r;
}

/// E[P(t_m)/P(t)] = E exp(X(t_m) - X(t)) per grid t.
inline JensenResult jensen_check(const PathEnsemble& e, double tm) {
    using namespace engine_detail;
    const auto anchor = e.grid.index_of(tm);
    if (!anchor) throw std::out_of_range("jensen_check: t_m must be a grid point");
    const SumLayout layout{false, false, anchor, false};
    SummarySums total = empty_sums(e.width(), layout);
    for (std::size_t b = 0; b < block_count(e.n_paths); ++b) {
        SummarySums part = empty_sums(e.width(), layout);
        const std::size_t end = std::min(e.n_paths, (b + 1) * kBlockPaths);
        for (std::size_t p = b * kBlockPaths; p < end; ++p)
            accumulate_path(part, layout, e.log_price_row(p), {}, e.reference, e.reference_driver);
        total += part;
    }
    Curve ref_ratio(e.width()), mean, var, se;
    for (std::size_t k = 0; k < e.width(); ++k) ref_ratio[k] = std::exp(e.reference[*anchor] - e.reference[k]);
    moments_to_curves(total.jensen, ref_ratio, mean, var, &se, nullptr);
    return jensen_from(e.grid, *anchor, std::move(mean), std::move(se));
}

inline JensenResult jensen_check(const EnsembleSummary& s) {
    if (!s.jensen_index) throw std::invalid_argument("jensen_check: summary has no anchor");
    return jensen_from(s.grid, *s.jensen_index, s.jensen_mean, s.jensen_se);
}

// --- stochastic f ---------------------------------------------------------------

struct StochasticFResult {
    TimeGrid grid;
    std::optional<PathEnsemble> paths;  ///< kept when the matrix fits the cap
    Curve mean_f, var_f, se_var_f;
    Curve target_var;  ///< int_{t0}^t sigma_f^2 ds
};

/// Paths of df = mu_f dt + sigma_f dW from f(t0) = f0 with the ensemble noise
/// streams, so they coincide with the f paths of a stochastic_f price run
/// whose mean path has derivative mu_f.
inline StochasticFResult simulate_stochastic_f(const FunctionSpec& mu_f, const FunctionSpec& sigma_f, double f0,
                                               const TimeGrid& grid, std::size_t n, std::uint64_t seed,
                                               unsigned workers = 1) {
    using namespace engine_detail;
    if (n < 1) throw ValidationError("simulate_stochastic_f: n must be at least 1");
    const Curve mu = mu_f.sample(grid);
    const Curve sf = sigma_f.sample(grid);
    for (std::size_t k = 0; k < grid.size(); ++k)
        if (!std::isfinite(mu[k]) || !std::isfinite(sf[k]))
            throw ValidationError("simulate_stochastic_f: non-finite mu_f or sigma_f");
    const std::size_t w = grid.size();
    const double sqrt_dt = std::sqrt(grid.dt);
    auto run = [&](auto&& noise, double* f) {
        double F = f0;
        f[0] = F;
        for (std::size_t k = 0; k < grid.n_steps; ++k) {
            F = F + mu[k] * grid.dt + sf[k] * sqrt_dt * noise();
            f[k + 1] = F;
        }
    };
    StochasticFResult out;
    out.grid = grid;
    Curve ref(w);
    run(ZeroNoise{}, ref.data());
    const bool keep = n <= kMaxMatrixEntries / w;
    if (keep) {
        PathEnsemble e;
        e.grid = grid;
        e.n_paths = n;
        e.seed = seed;
        e.model = ModelKind::StochasticF;
        e.driver.assign(n * w, 0.0);
        e.reference_driver = ref;
        out.paths = std::move(e);
    }
    const SumLayout layout{false, false, std::nullopt, true};
    SummarySums total = empty_sums(w, layout);
    auto make = [&](std::size_t b) {
        SummarySums part = empty_sums(w, layout);
        std::vector<double> f(w);
        const std::size_t end = std::min(n, (b + 1) * kBlockPaths);
        for (std::size_t p = b * kBlockPaths; p < end; ++p) {
            NormalStream z(seed, StreamId::Ensemble, p);
            double* dst = keep ? out.paths->driver.data() + p * w : f.data();
            run([&] { return z.next(); }, dst);
            accumulate_path(part, layout, {}, std::span<const double>(dst, w), ref, ref);
        }
        return part;
    };
    run_blocks<SummarySums>(block_count(n), workers, make, [&](SummarySums& p) { total += p; });
    moments_to_curves(total.driver, ref, out.mean_f, out.var_f, nullptr, &out.se_var_f);
    out.target_var = stochastic_f_variance(sigma_f, grid);
    return out;
}

// --- two independent noise sources -------------------------------------------------

/// X(T) moments when the diffusion splits into independent parts,
/// dX = a dt + g(f) (sigma_a dW_a + sigma_b dW_b), for the models with a
/// deterministic f. Its variance matches the single-noise model with
/// sigma^2 = sigma_a^2 + sigma_b^2.
inline SampleMoments two_noise_terminal_moments(const Scenario& s, double sigma_a, double sigma_b,
                                                unsigned workers = 1) {
    using namespace engine_detail;
    if (s.model == ModelKind::Valuation || s.model == ModelKind::StochasticF)
        throw std::invalid_argument("two_noise_terminal_moments: model needs a deterministic f");
    require_valid(s);
    const Prepared m = prepare(s);
    const double dt = s.grid.dt;
    auto run = [&](auto&& noise) {
        double X = m.y0;
        for (std::size_t k = 0; k < m.grid.n_steps; ++k) {
            const StepCoefficients c = coefficients(m.model, m.drift[k], 1.0, X, m.power);
            if (c.guard) throw GuardViolation(c.guard, 0, k, m.grid.time(k));
            const double za = noise();
            const double zb = noise();
            X = X + c.a * dt + c.b * m.sqrt_dt * (sigma_a * za + sigma_b * zb);
        }
        return X;
    };
    const double ref = run(ZeroNoise{});
    struct Part {
        PowerSums sums;
        bool failed() const noexcept { return false; }
    };
    PowerSums total;
    auto make = [&](std::size_t b) {
        Part part;
        const std::size_t end = std::min(s.n_paths, (b + 1) * kBlockPaths);
        for (std::size_t p = b * kBlockPaths; p < end; ++p) {
            NormalStream z(s.seed, StreamId::Ensemble, p);
            part.sums.add_deviation(run([&] { return z.next(); }) - ref);
        }
        return part;
    };
    run_blocks<Part>(block_count(s.n_paths), workers, make, [&](Part& p) { total += p.sums; });
    return moments_from(total, ref);
}

// --- variance decomposition scaling ---------------------------------------------------

struct ScalingPoint {
    double dt = 0.0;
    double v1 = 0.0;  ///< Var of int a ds
    double v2 = 0.0;  ///< 2 Cov(int a ds, int b dW)
    double v3 = 0.0;  ///< E (int b dW)^2
    double se_v1 = 0.0;
    double se_v2 = 0.0;
    double se_v3 = 0.0;
};

struct ScalingFit {
    double slope = 0.0;
    double slope_se = 0.0;
    bool degenerate = false;  ///< every estimate exactly zero
    bool conclusive = false;  ///< every |estimate| above twice its standard error
};

struct ScalingReport {
    double t = 0.0;
    std::size_t substeps = 0;
    std::vector<ScalingPoint> points;
    ScalingFit v1, v2, v3;
};

struct ScalingOptions {
    double t_offset = 0.5;  ///< evaluation time t = t0 + t_offset (a grid point)
    std::size_t substeps = 16;
    unsigned workers = 1;
};

namespace engine_detail {

inline ScalingFit fit_scaling(const std::vector<ScalingPoint>& pts, double ScalingPoint::*val,
                              double ScalingPoint::*se) {
    ScalingFit fit;
    fit.degenerate = std::all_of(pts.begin(), pts.end(), [&](const ScalingPoint& p) { return p.*val == 0.0; });
    fit.conclusive = !fit.degenerate && std::all_of(pts.begin(), pts.end(), [&](const ScalingPoint& p) {
        return std::abs(p.*val) > 2.0 * p.*se;
    });
    if (!fit.conclusive) return fit;
    std::vector<double> x, y;
    for (const auto& p : pts) {
        x.push_back(std::log(p.dt));
        y.push_back(std::log(std::abs(p.*val)));
    }
    const LinearFit lf = fit_line(x, y);
    fit.slope = lf.slope;
    fit.slope_se = lf.slope_se;
    return fit;
}

}  // namespace engine_detail

/**
 * Monte Carlo V1, V2, V3 over (t, t + dt) for each dt in `dt_list`. Paths
 * are advanced on the scenario grid to t, then each interval is resolved
 * with `substeps` Euler steps on its own noise stream. A, B deviations are
 * centered on the noise-free values, so a deterministic integrand gives
 * V1 = V2 = 0 exactly.
 */
inline ScalingReport variance_term_scaling(const Scenario& s, const std::vector<double>& dt_list,
                                           const ScalingOptions& opt = {}) {
    using namespace engine_detail;
    require_valid(s);
    if (dt_list.size() < 2) throw std::invalid_argument("variance_term_scaling: need at least two dt values");
    const Prepared m = prepare(s);
    const auto t_index = s.grid.index_of(s.grid.t0 + opt.t_offset);
    if (!t_index) throw std::out_of_range("variance_term_scaling: evaluation time is not a grid point");
    const double t_eval = s.grid.time(*t_index);
    const std::size_t K = opt.substeps;
    const int power = m.power;
    const bool driven = m.has_driver();

    // Valuation and stochastic_f carry state; every other model is a
    // function of time only, so A is deterministic for them.
    auto interval = [&](double X, double F, double span, auto&& noise, double& A, double& B) -> const char* {
        const double h = span / static_cast<double>(K);
        const double sh = std::sqrt(h);
        A = 0.0;
        B = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            const double t = t_eval + h * static_cast<double>(j);
            const double fval = driven ? F : s.drift(t);
            const StepCoefficients c = coefficients(m.model, fval, s.sigma(t), X, power);
            if (c.guard) return c.guard;
            const double z = noise();
            A += c.a * h;
            B += c.b * sh * z;
            X = X + c.a * h + c.b * sh * z;
            if (driven) F = F + s.drift.derivative(t) * h + (*s.sigma_f)(t) * sh * z;
        }
        return nullptr;
    };

    Curve ref_x, ref_f;
    reference_path(m, ref_x, ref_f);
    const double ref_X = ref_x[*t_index];
    const double ref_F = driven ? ref_f[*t_index] : 0.0;
    std::vector<double> ref_A(dt_list.size());
    for (std::size_t i = 0; i < dt_list.size(); ++i) {
        double A = 0.0, B = 0.0;
        if (const char* g = interval(ref_X, ref_F, dt_list[i], ZeroNoise{}, A, B))
            throw GuardViolation(std::string(g) + " on the noise-free path", 0, 0, t_eval);
        ref_A[i] = A;
    }

    struct Part {
        std::vector<CrossSums> sums;
        std::optional<GuardViolation> guard;
        bool failed() const noexcept { return guard.has_value(); }
    };
    std::vector<CrossSums> total(dt_list.size());
    Prepared prefix = m;
    prefix.grid.n_steps = *t_index;
    auto make = [&](std::size_t b) {
        Part part;
        part.sums.resize(dt_list.size());
        std::vector<double> x(prefix.grid.size()), f(prefix.grid.size());
        const std::size_t end = std::min(s.n_paths, (b + 1) * kBlockPaths);
        for (std::size_t p = b * kBlockPaths; p < end && !part.guard; ++p) {
            NormalStream z(s.seed, StreamId::Ensemble, p);
            if (auto g = run_path(prefix, [&] { return z.next(); }, x.data(), f.data())) {
                part.guard = make_guard(m, p, *g);
                break;
            }
            for (std::size_t i = 0; i < dt_list.size(); ++i) {
                NormalStream zi(s.seed, static_cast<std::uint32_t>(StreamId::ScalingInterval) + i, p);
                double A = 0.0, B = 0.0;
                if (const char* g = interval(x.back(), f.back(), dt_list[i], [&] { return zi.next(); }, A, B)) {
                    part.guard = GuardViolation(g, p, *t_index, t_eval);
                    break;
                }
                part.sums[i].add(A - ref_A[i], B);
            }
        }
        return part;
    };
    if (auto fail = run_blocks<Part>(block_count(s.n_paths), opt.workers, make, [&](Part& p) {
            for (std::size_t i = 0; i < total.size(); ++i) total[i] += p.sums[i];
        }))
        throw *fail->guard;

    ScalingReport rep;
    rep.t = t_eval;
    rep.substeps = K;
    for (std::size_t i = 0; i < dt_list.size(); ++i) {
        const CrossSums& c = total[i];
        const double n = c.n;
        const double ma = c.sa / n, mb = c.sb / n;
        ScalingPoint pt;
        pt.dt = dt_list[i];
        pt.v1 = std::max(0.0, (c.saa - n * ma * ma) / (n - 1.0));
        const double cov = (c.sab - n * ma * mb) / (n - 1.0);
        pt.v2 = 2.0 * cov;
        pt.v3 = c.sbb / n;
        pt.se_v1 = pt.v1 * std::sqrt(2.0 / (n - 1.0));
        pt.se_v2 = 2.0 * std::sqrt(std::max(0.0, c.saabb / n - cov * cov) / n);
        pt.se_v3 = std::sqrt(std::max(0.0, c.sbbbb / n - pt.v3 * pt.v3) / n);
        rep.points.push_back(pt);
    }
    rep.v1 = fit_scaling(rep.points, &ScalingPoint::v1, &ScalingPoint::se_v1);
    rep.v2 = fit_scaling(rep.points, &ScalingPoint::v2, &ScalingPoint::se_v2);
    rep.v3 = fit_scaling(rep.points, &ScalingPoint::v3, &ScalingPoint::se_v3);
    return rep;
}

}  // namespace sdvol
