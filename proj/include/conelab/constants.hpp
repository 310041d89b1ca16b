#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace conelab {

/// Error with a stable machine-readable code ("grid_mismatch", "not_normalized", ...).
class error : public std::runtime_error {
public:
    error(std::string code, const std::string& detail)
        : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}
    explicit error(std::string code) : std::runtime_error(code), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

inline constexpr double pi = 3.14159265358979323846;

/// Volume of the unit n-sphere, vol(S^n) = 2 pi^{(n+1)/2} / Gamma((n+1)/2).
inline double sphere_volume(int n) {
    if (n < 1) throw error("bad_dimension", "sphere_volume needs n >= 1");
    return 2.0 * std::pow(pi, 0.5 * (n + 1)) / std::tgamma(0.5 * (n + 1));
}

/// Volume of the unit n-ball, omega_n = pi^{n/2} / Gamma(n/2 + 1).
inline double ball_volume(int n) {
    if (n < 1) throw error("bad_dimension", "ball_volume needs n >= 1");
    return std::pow(pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

/// Flat-threshold entropy constant in dimension 3 (the neck value 1 - log 2).
inline const double eta3 = 1.0 - std::log(2.0);

/// x log x extended by its limit 0 at x = 0.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

} // namespace conelab
