#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fracvol/errors.hpp"
#include "fracvol/fbm.hpp"
#include "fracvol/grid.hpp"

namespace fracvol {

/// Log-normal volatility driven by fractional noise at observation scale delta:
///   log sigma_t = beta + (k/delta) (B_H(t) - B_H(t-delta)),
///   sigma_t = theta exp((k/delta) X_t - (k/delta)^2 delta^2H / 2),
/// with theta = E[sigma_t] = exp(beta + k^2 delta^(2H-2) / 2).
/// theta is the primary parameter; beta is derived.
struct VolParams {
    double theta = 0.2;
    double k = 0.0;
    double delta = 1.0 / 252.0;
    HurstParameter h{0.85};

    void validate() const {
        if (!(theta > 0.0) || !std::isfinite(theta)) throw DomainError("VolParams: theta must be positive");
        if (!(k >= 0.0) || !std::isfinite(k)) throw DomainError("VolParams: k must be nonnegative");
        if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("VolParams: delta must be positive");
    }

    /// Var[log sigma_t] = k^2 delta^(2H-2).
    double log_variance() const { return k * k * std::pow(delta, 2.0 * h.value() - 2.0); }
    double beta() const;
};

inline double theta_from_beta(double beta, double k, double delta, HurstParameter h) {
    if (!(delta > 0.0)) throw DomainError("theta_from_beta: delta must be positive");
    return std::exp(beta + 0.5 * k * k * std::pow(delta, 2.0 * h.value() - 2.0));
}

inline double beta_from_theta(double theta, double k, double delta, HurstParameter h) {
    if (!(delta > 0.0)) throw DomainError("beta_from_theta: delta must be positive");
    if (!(theta > 0.0)) throw DomainError("beta_from_theta: theta must be positive");
    return std::log(theta) - 0.5 * k * k * std::pow(delta, 2.0 * h.value() - 2.0);
}

inline double VolParams::beta() const { return beta_from_theta(theta, k, delta, h); }

/// k such that k^2 delta^(2H-2) equals the given log-volatility variance.
inline double k_for_log_variance(double log_variance, double delta, HurstParameter h) {
    if (!(log_variance >= 0.0)) throw DomainError("log-volatility variance must be nonnegative");
    return std::sqrt(log_variance) * std::pow(delta, 1.0 - h.value());
}

struct VolPath {
    TimeGrid grid;
    std::vector<double> sigma;
};

/// sigma_i = theta exp((k/delta) x_i - (k/delta)^2 delta^2H / 2).
inline double volatility_from_noise(double noise, const VolParams& p) {
    const double scale = p.k / p.delta;
    return p.theta * std::exp(scale * noise - 0.5 * scale * scale * std::pow(p.delta, 2.0 * p.h.value()));
}

inline VolPath volatility_path(const FractionalNoise& fnoise, const VolParams& p) {
    p.validate();
    if (std::abs(fnoise.delta - p.delta) > 1e-12 * p.delta)
        throw DomainError("volatility_path: noise delta " + std::to_string(fnoise.delta) +
                          " does not match params delta " + std::to_string(p.delta));
    if (fnoise.h.value() != p.h.value())
        throw DomainError("volatility_path: noise H does not match params H");
    VolPath out{fnoise.grid, std::vector<double>(fnoise.values.size())};
    for (std::size_t i = 0; i < out.sigma.size(); ++i) out.sigma[i] = volatility_from_noise(fnoise.values[i], p);
    return out;
}

/// E[int_0^t sigma_s^2 ds] = theta^2 exp(k^2 delta^(2H-2)) t.
inline double expected_integrated_variance(const VolParams& p, double t) {
    if (t < 0.0) throw DomainError("expected_integrated_variance: t must be nonnegative");
    return p.theta * p.theta * std::exp(p.log_variance()) * t;
}

/// Trapezoidal int sigma^2 dt over a sampled volatility path.
inline double integrated_variance(std::span<const double> sigma, double dt) {
    if (sigma.size() < 2) return 0.0;
    double acc = 0.5 * (sigma.front() * sigma.front() + sigma.back() * sigma.back());
    for (std::size_t i = 1; i + 1 < sigma.size(); ++i) acc += sigma[i] * sigma[i];
    return acc * dt;
}

}  // namespace fracvol
