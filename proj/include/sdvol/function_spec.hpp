#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sdvol/grid.hpp"

namespace sdvol {

enum class Family { Constant, Linear, QuadraticBump, GaussianBump, Exponential, Tabulated };
enum class DerivativeMode { Analytic, CentralDifference };

inline std::string_view family_name(Family f) {
    switch (f) {
        case Family::Constant: return "constant";
        case Family::Linear: return "linear";
        case Family::QuadraticBump: return "quadratic_bump";
        case Family::GaussianBump: return "gaussian_bump";
        case Family::Exponential: return "exponential";
        case Family::Tabulated: return "tabulated";
    }
    return "unknown";
}

inline std::optional<Family> family_from_name(std::string_view name) {
    for (Family f : {Family::Constant, Family::Linear, Family::QuadraticBump, Family::GaussianBump,
                     Family::Exponential, Family::Tabulated})
        if (family_name(f) == name) return f;
    return std::nullopt;
}

/**
 * A deterministic function of time with a derivative.
 *
 * Parameter layout per family:
 *   constant        a                      -> a
 *   linear          a, b                   -> a + b t
 *   quadratic_bump  a, b, t_m              -> a - b (t - t_m)^2
 *   gaussian_bump   base, amp, t_m, width  -> base + amp exp(-(t - t_m)^2 / (2 width^2))
 *   exponential     a, k                   -> a exp(k t)
 *   tabulated       t_1, v_1, t_2, v_2 ... -> piecewise linear, clamped outside [t_1, t_n]
 *
 * Tabulated functions are always differentiated by central differences.
 */
class FunctionSpec {
public:
    FunctionSpec() : FunctionSpec(Family::Constant, {0.0}) {}

    FunctionSpec(Family family, std::vector<double> params,
                 DerivativeMode mode = DerivativeMode::Analytic)
        : family_(family), params_(std::move(params)), mode_(mode) {
        check_arity();
        if (family_ == Family::Tabulated) mode_ = DerivativeMode::CentralDifference;
    }

    static FunctionSpec constant(double a) { return {Family::Constant, {a}}; }
    static FunctionSpec linear(double a, double b) { return {Family::Linear, {a, b}}; }
    static FunctionSpec quadratic_bump(double a, double b, double t_m) {
        return {Family::QuadraticBump, {a, b, t_m}};
    }
    static FunctionSpec gaussian_bump(double base, double amp, double t_m, double width) {
        return {Family::GaussianBump, {base, amp, t_m, width}};
    }
    static FunctionSpec exponential(double a, double k) { return {Family::Exponential, {a, k}}; }
    static FunctionSpec tabulated(std::span<const double> times, std::span<const double> values) {
        if (times.size() != values.size())
            throw std::invalid_argument("tabulated: times and values differ in length");
        std::vector<double> p;
        p.reserve(2 * times.size());
        for (std::size_t i = 0; i < times.size(); ++i) {
            p.push_back(times[i]);
            p.push_back(values[i]);
        }
        return {Family::Tabulated, std::move(p)};
    }

    Family family() const noexcept { return family_; }
    std::span<const double> params() const noexcept { return params_; }
    DerivativeMode derivative_mode() const noexcept { return mode_; }
    bool is_constant() const noexcept { return family_ == Family::Constant; }

    double value(double t) const {
        const auto& p = params_;
        switch (family_) {
            case Family::Constant: return p[0];
            case Family::Linear: return p[0] + p[1] * t;
            case Family::QuadraticBump: {
                const double u = t - p[2];
                return p[0] - p[1] * u * u;
            }
            case Family::GaussianBump: {
                const double u = (t - p[2]) / p[3];
                return p[0] + p[1] * std::exp(-0.5 * u * u);
            }
            case Family::Exponential: return p[0] * std::exp(p[1] * t);
            case Family::Tabulated: return interpolate(t);
        }
        return 0.0;
    }

    double derivative(double t) const {
        if (mode_ == DerivativeMode::CentralDifference) {
            const double h = difference_step();
            return (value(t + h) - value(t - h)) / (2.0 * h);
        }
        const auto& p = params_;
        switch (family_) {
            case Family::Constant: return 0.0;
            case Family::Linear: return p[1];
            case Family::QuadraticBump: return -2.0 * p[1] * (t - p[2]);
            case Family::GaussianBump: {
                const double u = (t - p[2]) / p[3];
                return -p[1] * u / p[3] * std::exp(-0.5 * u * u);
            }
            case Family::Exponential: return p[0] * p[1] * std::exp(p[1] * t);
            case Family::Tabulated: break;
        }
        return 0.0;
    }

    double operator()(double t) const { return value(t); }

    Curve sample(const TimeGrid& grid) const {
        Curve out(grid.size());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = value(grid.time(k));
        return out;
    }

    Curve sample_derivative(const TimeGrid& grid) const {
        Curve out(grid.size());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = derivative(grid.time(k));
        return out;
    }

    /// Empty when the family's shape constraints hold, else a description of the violation.
    std::string shape_violation() const {
        switch (family_) {
            case Family::QuadraticBump:
                if (!(params_[1] > 0.0)) return "quadratic_bump requires b > 0";
                break;
            case Family::GaussianBump:
                if (!(params_[3] > 0.0)) return "gaussian_bump requires width > 0";
                break;
            case Family::Tabulated:
                for (std::size_t i = 2; i < params_.size(); i += 2)
                    if (!(params_[i] > params_[i - 2])) return "tabulated times must increase strictly";
                break;
            default: break;
        }
        for (double v : params_)
            if (!std::isfinite(v)) return "non-finite parameter";
        return {};
    }

    /// Whether a tabulated function covers [a, b]; closed forms cover everything.
    bool covers(double a, double b) const noexcept {
        if (family_ != Family::Tabulated) return true;
        return params_.front() <= a && params_[params_.size() - 2] >= b;
    }

    bool operator==(const FunctionSpec&) const = default;

private:
    void check_arity() const {
        std::size_t want = 0;
        switch (family_) {
            case Family::Constant: want = 1; break;
            case Family::Linear: want = 2; break;
            case Family::QuadraticBump: want = 3; break;
            case Family::GaussianBump: want = 4; break;
            case Family::Exponential: want = 2; break;
            case Family::Tabulated:
                if (params_.size() < 4 || params_.size() % 2 != 0)
                    throw std::invalid_argument(
                        "tabulated: params must hold at least two (t, value) pairs");
                return;
        }
        if (params_.size() != want)
            throw std::invalid_argument(std::string(family_name(family_)) + ": expected " +
                                        std::to_string(want) + " params, got " +
                                        std::to_string(params_.size()));
    }

    double difference_step() const noexcept {
        if (family_ == Family::Tabulated) {
            double min_gap = params_[2] - params_[0];
            for (std::size_t i = 4; i < params_.size(); i += 2)
                min_gap = std::min(min_gap, params_[i] - params_[i - 2]);
            return std::min(1e-5, 0.25 * min_gap);
        }
        return 1e-5;
    }

    double interpolate(double t) const noexcept {
        const std::size_t n = params_.size() / 2;
        auto knot = [&](std::size_t i) { return params_[2 * i]; };
        auto val = [&](std::size_t i) { return params_[2 * i + 1]; };
        if (t <= knot(0)) return val(0);
        if (t >= knot(n - 1)) return val(n - 1);
        std::size_t lo = 0, hi = n - 1;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            (knot(mid) <= t ? lo : hi) = mid;
        }
        const double w = (t - knot(lo)) / (knot(hi) - knot(lo));
        return val(lo) + w * (val(hi) - val(lo));
    }

    Family family_;
    std::vector<double> params_;
    DerivativeMode mode_;
};

}  // namespace sdvol
