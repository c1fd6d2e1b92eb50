#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sdvol {

/// Malformed scenario configuration text (unknown key, bad number, missing key).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A scenario that parses but violates one of its invariants.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A simulated path left the admissible region (1 + f <= 0, non-positive
/// valuation diffusion factor, or a non-finite state).
class GuardViolation : public std::runtime_error {
public:
    GuardViolation(const std::string& what, std::size_t path, std::size_t step, double time)
        : std::runtime_error(what + " (path " + std::to_string(path) + ", step " +
                             std::to_string(step) + ", t=" + std::to_string(time) + ")"),
          path_(path), step_(step), time_(time) {}

    std::size_t path() const noexcept { return path_; }
    std::size_t step() const noexcept { return step_; }
    double time() const noexcept { return time_; }

private:
    std::size_t path_;
    std::size_t step_;
    double time_;
};

}  // namespace sdvol
