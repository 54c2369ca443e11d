#pragma once

// Girsanov densities and numerical martingale experiments.
//
//   eta_T  = exp(sum gamma dB - 1/2 sum gamma^2 dt),  gamma = (r - mu)/sigma
//   eta'_T = exp(W_T - T/2)
//   eta*_T = eta_T eta'_T
//
// Under the measure with density eta_T the discounted price is a
// martingale. In the independent variant eta*_T also defines such a
// measure, and the two price volatility risk differently.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fracvol/errors.hpp"
#include "fracvol/market_sim.hpp"
#include "fracvol/numerics.hpp"
#include "fracvol/option.hpp"
#include "fracvol/vol_model.hpp"

namespace fracvol {

struct MeasureWeights {
    std::vector<double> eta_T;
    std::vector<double> eta_prime_T;  // empty when the ensemble has no volatility driver record
    std::vector<double> eta_star_T;
};

struct MartingaleReport {
    double statistic = 0.0;  // (estimate - target) / stderr
    double estimate = 0.0;
    double stderr = 0.0;
    std::size_t n_paths = 0;
    double target = 0.0;

    bool passes(double threshold = 3.0) const { return std::abs(statistic) < threshold; }
};

/// gamma_i = (r - mu_i) / sigma_i at each point of the volatility path.
inline std::vector<double> market_price_of_risk(const MarketParams& params, const VolPath& sigma) {
    std::vector<double> gamma(sigma.sigma.size());
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        const double s = sigma.sigma[i];
        if (!(s > 0.0)) throw DomainError("market_price_of_risk: sigma must be positive (index " + std::to_string(i) + ")");
        const auto& dp = params.drift_path;
        const double mu = dp.empty() ? params.mu : dp[std::min(i, dp.size() - 1)];
        gamma[i] = (params.r - mu) / s;
    }
    return gamma;
}

/// exp(sum gamma_i dB_i - 1/2 sum gamma_i^2 dt), accumulated in log space.
inline double stochastic_exponential(std::span<const double> gamma, std::span<const double> dB, double dt) {
    if (gamma.size() != dB.size())
        throw DomainError("stochastic_exponential: gamma has " + std::to_string(gamma.size()) + " entries, dB has " +
                          std::to_string(dB.size()));
    long double a = 0.0L, b = 0.0L;
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        a += static_cast<long double>(gamma[i]) * dB[i];
        b += static_cast<long double>(gamma[i]) * gamma[i] * dt;
    }
    return std::exp(static_cast<double>(a - 0.5L * b));
}

inline std::vector<double> eta_prime(std::span<const double> w_T, double T) {
    std::vector<double> out(w_T.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(w_T[i] - 0.5 * T);
    return out;
}

inline std::vector<double> eta_star(std::span<const double> eta_T, std::span<const double> w_T, double T) {
    if (eta_T.size() != w_T.size()) throw DomainError("eta_star: eta_T and W_T lengths differ");
    std::vector<double> out(eta_T.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = eta_T[i] * std::exp(w_T[i] - 0.5 * T);
    return out;
}

/// Densities at the horizon of a P-ensemble.
inline MeasureWeights measure_weights(const Ensemble& ens) {
    if (ens.measure != Measure::P) throw DomainError("measure_weights: Girsanov weights need a P-ensemble");
    MeasureWeights w;
    w.eta_T.reserve(ens.size());
    bool has_w = true;
    for (const auto& p : ens.paths) {
        w.eta_T.push_back(std::exp(p.log_eta));
        has_w = has_w && p.has_w;
    }
    if (has_w) {
        std::vector<double> wt;
        wt.reserve(ens.size());
        for (const auto& p : ens.paths) wt.push_back(p.w_T);
        w.eta_prime_T = eta_prime(wt, ens.horizon());
        w.eta_star_T = eta_star(w.eta_T, wt, ens.horizon());
    }
    return w;
}

/// eta*_T for an ensemble; fails when the volatility driver was not recorded
/// (identified variant, or an exact fBm sampler).
inline std::vector<double> eta_star(const Ensemble& ens) {
    auto w = measure_weights(ens);
    if (w.eta_star_T.empty())
        throw DomainError("eta_star: ensemble has no volatility-driver record (needs independent variant, kernel driver)");
    return w.eta_star_T;
}

/// mean(weights * payoff) against `target`, with the standard error of the
/// per-path products.
inline MartingaleReport martingale_test(std::span<const double> weights, std::span<const double> payoff, double target) {
    if (weights.size() != payoff.size()) throw DomainError("martingale_test: weights and payoff lengths differ");
    if (weights.size() < 100) throw DomainError("martingale_test: need at least 100 paths");
    std::vector<double> x(weights.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = weights[i] * payoff[i];
    const auto est = mean_estimate(x);
    if (!(est.stderr > 0.0)) throw DataError("martingale_test: degenerate input (zero variance)");
    return {(est.mean - target) / est.stderr, est.mean, est.stderr, x.size(), target};
}

inline std::vector<double> discounted_terminal(const Ensemble& ens) {
    const double df = std::exp(-ens.params.r * ens.horizon());
    std::vector<double> z;
    z.reserve(ens.size());
    for (const auto& p : ens.paths) z.push_back(df * p.s_T);
    return z;
}

inline std::vector<double> discounted_payoffs(const Ensemble& ens, const OptionSpec& claim) {
    require_maturity_matches(claim, ens);
    const double df = std::exp(-ens.params.r * ens.horizon());
    std::vector<double> out;
    out.reserve(ens.size());
    for (const auto& p : ens.paths) out.push_back(df * payoff(claim, p));
    return out;
}

inline PriceEstimate weighted_price(std::span<const double> weights, std::span<const double> values) {
    std::vector<double> x(values.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = weights[i] * values[i];
    const auto est = mean_estimate(x);
    return {est.mean, est.stderr, x.size()};
}

struct IncompletenessReport {
    PriceEstimate price_Q;
    PriceEstimate price_Qstar;
    double difference = 0.0;  // price_Q - price_Qstar
    double joint_stderr = 0.0;
    double statistic = 0.0;
    MartingaleReport stock_Q;  // discounted S_T against s0
    MartingaleReport stock_Qstar;

    bool prices_differ(double threshold = 3.0) const { return std::abs(statistic) > threshold; }
};

/// Prices `claim` under Q (weights eta_T) and Q* (weights eta*_T) from one
/// P-ensemble of the independent variant. The joint standard error comes
/// from the per-path differences, so the shared sampling noise cancels.
inline IncompletenessReport incompleteness_demo(const Ensemble& ens, const OptionSpec& claim) {
    if (ens.variant != ModelVariant::independent)
        throw DomainError("incompleteness_demo: needs an independent-variant ensemble");
    const auto w = measure_weights(ens);
    if (w.eta_star_T.empty()) throw DomainError("incompleteness_demo: ensemble has no volatility-driver record");
    const auto values = discounted_payoffs(ens, claim);
    IncompletenessReport rep;
    rep.price_Q = weighted_price(w.eta_T, values);
    rep.price_Qstar = weighted_price(w.eta_star_T, values);
    std::vector<double> d(values.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = (w.eta_T[i] - w.eta_star_T[i]) * values[i];
    const auto de = mean_estimate(d);
    rep.difference = de.mean;
    rep.joint_stderr = de.stderr;
    rep.statistic = de.stderr > 0.0 ? de.mean / de.stderr : 0.0;
    const auto z = discounted_terminal(ens);
    rep.stock_Q = martingale_test(w.eta_T, z, ens.params.s0);
    rep.stock_Qstar = martingale_test(w.eta_star_T, z, ens.params.s0);
    return rep;
}

struct TiltCheck {
    double scale = 1.0;
    MartingaleReport report;
};

struct CompletenessReport {
    MartingaleReport canonical;  // discounted S_T under the canonical tilt
    std::vector<TiltCheck> perturbed;
    PriceEstimate claim_price;  // claim under the canonical measure
};

/// Density of the tilt c * gamma from the per-path sums:
/// exp(c sum gamma dB - c^2/2 sum gamma^2 dt).
inline std::vector<double> scaled_tilt_weights(const Ensemble& ens, double scale) {
    std::vector<double> w;
    w.reserve(ens.size());
    for (const auto& p : ens.paths) w.push_back(std::exp(scale * p.gamma_dB - 0.5 * scale * scale * p.gamma_sq_dt));
    return w;
}

/// Identified variant: the canonical tilt gamma = (r - mu)/sigma makes the
/// discounted price a martingale; scaled tilts do not.
inline CompletenessReport completeness_demo(const Ensemble& ens, const OptionSpec& claim,
                                            const std::vector<double>& scales = {1.5, 0.5}) {
    if (ens.variant != ModelVariant::identified)
        throw DomainError("completeness_demo: needs an identified-variant ensemble");
    if (ens.measure != Measure::P) throw DomainError("completeness_demo: needs a P-ensemble");
    const auto z = discounted_terminal(ens);
    const auto w = scaled_tilt_weights(ens, 1.0);
    CompletenessReport rep;
    rep.canonical = martingale_test(w, z, ens.params.s0);
    for (double c : scales) rep.perturbed.push_back({c, martingale_test(scaled_tilt_weights(ens, c), z, ens.params.s0)});
    rep.claim_price = weighted_price(w, discounted_payoffs(ens, claim));
    return rep;
}

struct ProfilePoint {
    double t = 0.0;
    MartingaleReport report;
};

/// Discounted-price mean at every grid time after t_0, against s0. Under Q
/// the plain mean is used; under P each path is weighted by eta_T (valid at
/// every t because eta is a martingale). Paths are simulated in chunks so
/// memory stays bounded; the result equals a single-shot run.
inline std::vector<ProfilePoint> discounted_martingale_profile(ModelVariant variant, Measure measure,
                                                               const MarketParams& params, const TimeGrid& grid,
                                                               std::size_t n_paths, const RngStream& seed,
                                                               SimulationOptions options = {},
                                                               std::size_t chunk = 10000) {
    if (n_paths < 100) throw DomainError("discounted_martingale_profile: need at least 100 paths");
    const std::size_t n = grid.n_points;
    std::vector<CompensatedSum> sum(n), sum_sq(n);
    options.record_paths = true;
    const std::uint64_t base = options.first_path;
    for (std::size_t done = 0; done < n_paths; done += chunk) {
        const std::size_t count = std::min(chunk, n_paths - done);
        options.first_path = base + done;
        const auto ens = simulate_ensemble(variant, measure, params, grid, count, seed, options);
        for (const auto& p : ens.paths) {
            const double w = measure == Measure::P ? std::exp(p.log_eta) : 1.0;
            for (std::size_t i = 1; i < n; ++i) {
                const double z = w * p.S[i] * std::exp(-params.r * (grid.time(i) - grid.t_start));
                sum[i] += z;
                sum_sq[i] += z * z;
            }
        }
    }
    std::vector<ProfilePoint> out;
    const double nn = static_cast<double>(n_paths);
    for (std::size_t i = 1; i < n; ++i) {
        const double mean = sum[i].value() / nn;
        const double var = std::max(0.0, (sum_sq[i].value() - nn * mean * mean) / (nn - 1.0));
        const double se = std::sqrt(var / nn);
        out.push_back({grid.time(i), {se > 0.0 ? (mean - params.s0) / se : 0.0, mean, se, n_paths, params.s0}});
    }
    return out;
}

struct PricingConsistency {
    PriceEstimate direct_Q;      // plain mean over a Q-ensemble
    PriceEstimate weighted_P;    // eta_T-weighted mean over a P-ensemble
    double joint_stderr = 0.0;   // from paired per-path differences
    double statistic = 0.0;
};

/// Cross-validates the drift change: the eta-weighted P price of `claim`
/// matches the direct Q price. Both ensembles use the same streams.
inline PricingConsistency girsanov_cross_check(ModelVariant variant, const MarketParams& params, const TimeGrid& grid,
                                               const OptionSpec& claim, std::size_t n_paths, const RngStream& seed,
                                               SimulationOptions options = {}) {
    options.record_paths = false;
    options.record_increments = false;
    const auto ens_q = simulate_ensemble(variant, Measure::Q, params, grid, n_paths, seed, options);
    const auto ens_p = simulate_ensemble(variant, Measure::P, params, grid, n_paths, seed, options);
    const auto vq = discounted_payoffs(ens_q, claim);
    const auto vp = discounted_payoffs(ens_p, claim);
    const auto w = measure_weights(ens_p).eta_T;
    PricingConsistency out;
    out.direct_Q = weighted_price(std::vector<double>(n_paths, 1.0), vq);
    out.weighted_P = weighted_price(w, vp);
    std::vector<double> d(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) d[i] = w[i] * vp[i] - vq[i];
    const auto de = mean_estimate(d);
    out.joint_stderr = de.stderr;
    out.statistic = de.stderr > 0.0 ? de.mean / de.stderr : 0.0;
    return out;
}

}  // namespace fracvol
