#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace sdvol {

/// Power sums of (x - ref) up to fourth order. Merging is plain addition, so
/// folding partial sums in a fixed order gives bit-identical results.
struct PowerSums {
    double n = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    double s3 = 0.0;
    double s4 = 0.0;

    void add_deviation(double d) noexcept {
        const double d2 = d * d;
        n += 1.0;
        s1 += d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
    }

    PowerSums& operator+=(const PowerSums& o) noexcept {
        n += o.n;
        s1 += o.s1;
        s2 += o.s2;
        s3 += o.s3;
        s4 += o.s4;
        return *this;
    }
};

/// Mean and unbiased variance of a sample with their standard errors.
struct SampleMoments {
    double n = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    double se_mean = 0.0;
    double se_variance = 0.0;
};

/// Moments from power sums about `ref`. The variance standard error uses the
/// fourth-moment formula Var(s^2) ~ (m4 - s^4 (n-3)/(n-1)) / n, which reduces
/// to 2 s^4 / (n-1) for normal data.
inline SampleMoments moments_from(const PowerSums& p, double ref) noexcept {
    SampleMoments m;
    m.n = p.n;
    if (p.n < 1.0) return m;
    const double mu = p.s1 / p.n;  // mean deviation from ref
    m.mean = ref + mu;
    if (p.n < 2.0) return m;
    const double r2 = p.s2 / p.n, r3 = p.s3 / p.n, r4 = p.s4 / p.n;
    const double c2 = std::max(0.0, r2 - mu * mu);
    const double c4 = std::max(0.0, r4 - 4.0 * mu * r3 + 6.0 * mu * mu * r2 - 3.0 * mu * mu * mu * mu);
    m.variance = c2 * p.n / (p.n - 1.0);
    m.se_mean = std::sqrt(m.variance / p.n);
    const double s4 = m.variance * m.variance;
    const double var_of_var = (c4 - s4 * (p.n - 3.0) / (p.n - 1.0)) / p.n;
    m.se_variance = std::sqrt(std::max(0.0, var_of_var));
    return m;
}

inline SampleMoments sample_moments(std::span<const double> xs) {
    if (xs.empty()) return {};
    const double ref = xs.front();
    PowerSums p;
    for (double x : xs) p.add_deviation(x - ref);
    return moments_from(p, ref);
}

/// Running sums for a sample covariance, also about fixed references.
struct CrossSums {
    double n = 0.0;
    double sa = 0.0;
    double sb = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    double sab = 0.0;
    double saabb = 0.0;  // for the standard error of the covariance
    double sbbbb = 0.0;  // for the standard error of the raw second moment of b

    void add(double a, double b) noexcept {
        n += 1.0;
        sa += a;
        sb += b;
        saa += a * a;
        sbb += b * b;
        sab += a * b;
        saabb += a * a * b * b;
        sbbbb += b * b * b * b;
    }

    CrossSums& operator+=(const CrossSums& o) noexcept {
        n += o.n;
        sa += o.sa;
        sb += o.sb;
        saa += o.saa;
        sbb += o.sbb;
        sab += o.sab;
        saabb += o.saabb;
        sbbbb += o.sbbbb;
        return *this;
    }
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_line: need at least two paired points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_line: x values are all equal");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (x.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - f.intercept - f.slope * x[i];
            rss += r * r;
        }
        f.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
    }
    return f;
}

/// Upper tail probability of a chi-square statistic.
inline double chi_square_p_value(double statistic, double dof) {
    if (!(dof > 0.0)) throw std::invalid_argument("chi_square_p_value: dof must be positive");
    if (statistic <= 0.0) return 1.0;
    return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

}  // namespace sdvol
