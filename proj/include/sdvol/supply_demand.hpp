#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdvol/quadrature.hpp"
#include "sdvol/rng.hpp"
#include "sdvol/stats.hpp"

namespace sdvol {

/// Jointly normal demand D and supply S with common variance sigma1^2 and
/// correlation rho in [-1, 0].
class BivariatePair {
public:
    BivariatePair(double mu_d, double mu_s, double sigma1, double rho = -1.0)
        : mu_d_(mu_d), mu_s_(mu_s), sigma1_(sigma1), rho_(rho) {
        if (!(mu_s > 0.0)) throw std::invalid_argument("BivariatePair: mu_s must be positive");
        if (!(sigma1 >= 0.0)) throw std::invalid_argument("BivariatePair: sigma1 must be >= 0");
        if (!(rho >= -1.0 && rho <= 1.0))
            throw std::invalid_argument("BivariatePair: covariance not positive semidefinite (|rho| > 1)");
        if (rho > 0.0) throw std::invalid_argument("BivariatePair: rho must lie in [-1, 0]");
    }

    double mu_d() const noexcept { return mu_d_; }
    double mu_s() const noexcept { return mu_s_; }
    double sigma1() const noexcept { return sigma1_; }
    double rho() const noexcept { return rho_; }
    double mean_ratio() const noexcept { return mu_d_ / mu_s_; }

private:
    double mu_d_, mu_s_, sigma1_, rho_;
};

struct DemandSupply {
    double demand;
    double supply;
};

/// n draws of (D, S). At rho = -1 each draw is one normal mirrored, so
/// D + S = mu_d + mu_s up to rounding.
inline std::vector<DemandSupply> sample_supply_demand(const BivariatePair& pair, std::size_t n,
                                                      std::uint64_t seed) {
    std::vector<DemandSupply> out;
    out.reserve(n);
    const double s1 = pair.sigma1();
    const double rho = pair.rho();
    const double ortho = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    for (std::size_t i = 0; i < n; ++i) {
        NormalStream z(seed, StreamId::SupplyDemandSampler, i);
        const double z1 = z.next();
        const double shock = s1 * z1;
        double supply_shock;
        if (rho == -1.0)
            supply_shock = -shock;
        else
            supply_shock = s1 * (rho * z1 + ortho * z.next());
        out.push_back({pair.mu_d() + shock, pair.mu_s() + supply_shock});
    }
    return out;
}

/// Exact density of D/S for perfectly anticorrelated D and S.
inline double ratio_density_exact(double x, const BivariatePair& pair) {
    if (pair.rho() != -1.0)
        throw std::invalid_argument("ratio_density_exact: formula holds for rho = -1 only");
    if (x == -1.0) throw std::domain_error("ratio_density_exact: singular at x = -1");
    const double r = pair.mean_ratio();
    const double scale = pair.sigma1() / pair.mu_s();
    if (scale == 0.0) throw std::domain_error("ratio_density_exact: degenerate (sigma1 = 0)");
    const double xp1 = x + 1.0;
    const double u = (x - r) / (scale * xp1);
    return (1.0 + r) / (std::sqrt(2.0 * std::numbers::pi) * scale * xp1 * xp1) * std::exp(-0.5 * u * u);
}

/// The exact density with its limiting value 0 at the pole x = -1, for quadrature.
inline double ratio_density_exact_or_limit(double x, const BivariatePair& pair) {
    return x == -1.0 ? 0.0 : ratio_density_exact(x, pair);
}

/// sigma_Rq^2 = (sigma1 / mu_s)^2 (mu_d / mu_s + 1)^2, the approximate variance of D/S.
inline double sigma_rq_squared(const BivariatePair& pair) {
    const double scale = pair.sigma1() / pair.mu_s();
    const double k = pair.mean_ratio() + 1.0;
    return scale * scale * k * k;
}

inline double sigma_rq(const BivariatePair& pair) { return std::sqrt(sigma_rq_squared(pair)); }

/// First-order form 4 sigma1^2 (1 + 4 delta) for mu_d = 1 + delta, mu_s = 1 - delta.
inline double sigma_rq_squared_near_equilibrium(double sigma1, double delta) {
    return 4.0 * sigma1 * sigma1 * (1.0 + 4.0 * delta);
}

/// Normal approximation to the density of D/S: mean mu_d/mu_s, variance sigma_Rq^2.
inline double ratio_density_approx(double x, const BivariatePair& pair) {
    const double s = sigma_rq(pair);
    if (s == 0.0) throw std::domain_error("ratio_density_approx: degenerate (sigma1 = 0)");
    const double u = (x - pair.mean_ratio()) / s;
    return std::exp(-0.5 * u * u) / (std::sqrt(2.0 * std::numbers::pi) * s);
}

/// Integration window mean +- half_width * sigma_Rq used by the density checks.
struct DensityWindow {
    double lo;
    double hi;
};

inline DensityWindow density_window(const BivariatePair& pair, double half_width = 10.0) {
    const double s = sigma_rq(pair);
    return {pair.mean_ratio() - half_width * s, pair.mean_ratio() + half_width * s};
}

/// Mass of the exact density on the window, by composite Simpson.
inline double exact_density_mass(const BivariatePair& pair, std::size_t panels = 4000) {
    const auto w = density_window(pair);
    return composite_simpson([&](double x) { return ratio_density_exact_or_limit(x, pair); }, w.lo, w.hi,
                             panels);
}

/// Total variation distance between the exact density and its normal approximation on the window.
inline double exact_vs_approx_tv(const BivariatePair& pair, std::size_t panels = 4000) {
    const auto w = density_window(pair);
    return 0.5 * composite_simpson(
                     [&](double x) {
                         return std::abs(ratio_density_exact_or_limit(x, pair) - ratio_density_approx(x, pair));
                     },
                     w.lo, w.hi, panels);
}

struct ChiSquareResult {
    double statistic = 0.0;
    double dof = 0.0;
    double p_value = 0.0;
    std::size_t bins = 0;
    std::size_t outside = 0;  ///< draws that fell outside the binned window
};

/// Pearson chi-square of sampled D/S ratios against the exact density,
/// `bins` equal-width bins on the +-`half_width` sigma_Rq window plus one
/// pooled bin for everything outside it.
inline ChiSquareResult ratio_histogram_chi_square(const BivariatePair& pair,
                                                  const std::vector<DemandSupply>& draws,
                                                  std::size_t bins = 50, double half_width = 4.0) {
    const auto w = density_window(pair, half_width);
    const double width = (w.hi - w.lo) / static_cast<double>(bins);
    std::vector<double> observed(bins + 1, 0.0);
    for (const auto& d : draws) {
        const double x = d.demand / d.supply;
        const double pos = (x - w.lo) / width;
        if (pos >= 0.0 && pos < static_cast<double>(bins))
            observed[static_cast<std::size_t>(pos)] += 1.0;
        else
            observed[bins] += 1.0;
    }
    const double n = static_cast<double>(draws.size());
    ChiSquareResult res;
    res.bins = bins;
    res.outside = static_cast<std::size_t>(observed[bins]);
    double inside_prob = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        const double lo = w.lo + width * static_cast<double>(b);
        const double p = composite_simpson([&](double x) { return ratio_density_exact_or_limit(x, pair); }, lo,
                                           lo + width, 64);
        inside_prob += p;
        const double expected = n * p;
        const double diff = observed[b] - expected;
        res.statistic += diff * diff / expected;
    }
    const double expected_out = n * std::max(0.0, 1.0 - inside_prob);
    std::size_t cells = bins;
    if (expected_out >= 5.0) {
        const double diff = observed[bins] - expected_out;
        res.statistic += diff * diff / expected_out;
        ++cells;
    }
    res.dof = static_cast<double>(cells - 1);
    res.p_value = chi_square_p_value(res.statistic, res.dof);
    return res;
}

// --- G functions and SDE coefficient identification -----------------------

/// G maps D/S to relative price change: G(1) = 0, G' > 0.
enum class GKind {
    Symmetric,     ///< x - 1/x, G(1/x) = -G(x)
    Simple,        ///< x - 1
    TopApprox,     ///< x - 1 with diffusion sigma x   (D >= S regime)
    BottomApprox,  ///< 1 - 1/x with diffusion sigma/x (S >= D regime)
};

inline void require_positive_ratio(double x, const char* who) {
    if (!(x > 0.0)) throw std::domain_error(std::string(who) + ": ratio must be positive");
}

inline double g_eval(GKind kind, double x) {
    require_positive_ratio(x, "g_eval");
    switch (kind) {
        case GKind::Symmetric: return x - 1.0 / x;
        case GKind::Simple:
        case GKind::TopApprox: return x - 1.0;
        case GKind::BottomApprox: return 1.0 - 1.0 / x;
    }
    return 0.0;
}

inline double g_prime(GKind kind, double x) {
    require_positive_ratio(x, "g_prime");
    switch (kind) {
        case GKind::Symmetric: return 1.0 + 1.0 / (x * x);
        case GKind::Simple:
        case GKind::TopApprox: return 1.0;
        case GKind::BottomApprox: return 1.0 / (x * x);
    }
    return 0.0;
}

/// Drift a and diffusion b of d log P = a dt + b dW for a given D/S.
struct Coefficients {
    double drift;
    double diffusion;
};

inline Coefficients drift_diffusion_coeffs(GKind kind, double ratio, double sigma) {
    require_positive_ratio(ratio, "drift_diffusion_coeffs");
    const double a = g_eval(kind, ratio);
    if (kind == GKind::Symmetric) {
        const double inv = 1.0 / ratio;
        return {a, 0.5 * sigma * (ratio * g_prime(kind, ratio) + inv * g_prime(kind, inv))};
    }
    return {a, sigma * ratio * g_prime(kind, ratio)};
}

}  // namespace sdvol
