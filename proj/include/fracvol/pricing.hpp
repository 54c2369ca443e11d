#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fracvol/errors.hpp"
#include "fracvol/market_sim.hpp"
#include "fracvol/numerics.hpp"
#include "fracvol/option.hpp"
#include "fracvol/parallel.hpp"

namespace fracvol {

inline double black_scholes(double s0, double strike, double r, double sigma, double maturity, OptionKind kind) {
    if (!(s0 > 0.0)) throw DomainError("black_scholes: s0 must be positive");
    if (!(strike > 0.0)) throw DomainError("black_scholes: strike must be positive");
    if (!(sigma > 0.0)) throw DomainError("black_scholes: sigma must be positive");
    if (!(maturity > 0.0)) throw DomainError("black_scholes: maturity must be positive");
    if (kind == OptionKind::realized_variance) throw DomainError("black_scholes: only call and put are supported");
    const double sd = sigma * std::sqrt(maturity);
    const double d1 = (std::log(s0 / strike) + (r + 0.5 * sigma * sigma) * maturity) / sd;
    const double d2 = d1 - sd;
    const double df = std::exp(-r * maturity);
    if (kind == OptionKind::call) return s0 * normal_cdf(d1) - strike * df * normal_cdf(d2);
    return strike * df * normal_cdf(-d2) - s0 * normal_cdf(-d1);
}

/// Step size used for pricing grids; defaults to the observation scale.
struct PricingOptions {
    double dt = 0.0;  // 0 means params.vol.delta
    VolDriver vol_driver = VolDriver::kernel;
    bool antithetic = true;
    bool cell_residual = true;
};

inline TimeGrid pricing_grid(const MarketParams& params, double maturity, const PricingOptions& opt) {
    const double dt = opt.dt > 0.0 ? opt.dt : params.vol.delta;
    const std::size_t steps = steps_in(maturity, dt, "maturity");
    return TimeGrid{0.0, dt, steps + 1};
}

/// Discounted Monte Carlo prices of several claims with a common maturity,
/// all read off one Q-ensemble. With antithetic sampling the standard error
/// is computed over pair averages, and an odd path count is rounded up.
inline std::vector<PriceEstimate> mc_prices(ModelVariant variant, const MarketParams& params,
                                            std::span<const OptionSpec> specs, std::size_t n_paths,
                                            const RngStream& seed, const PricingOptions& opt = {}) {
    if (specs.empty()) throw DomainError("mc_prices: no claims");
    if (n_paths == 0) throw DomainError("mc_prices: n_paths must be at least 1");
    for (const auto& s : specs) {
        s.validate();
        if (std::abs(s.maturity - specs[0].maturity) > 1e-12 * specs[0].maturity)
            throw DomainError("mc_prices: claims must share a maturity");
    }
    const TimeGrid grid = pricing_grid(params, specs[0].maturity, opt);
    SimulationOptions so;
    so.vol_driver = opt.vol_driver;
    so.antithetic = opt.antithetic;
    so.cell_residual = opt.cell_residual;
    so.record_paths = false;
    const std::size_t total = opt.antithetic ? 2 * ((n_paths + 1) / 2) : n_paths;
    const auto ens = simulate_ensemble(variant, Measure::Q, params, grid, total, seed, so);
    const double df = std::exp(-params.r * specs[0].maturity);
    std::vector<PriceEstimate> out;
    const std::size_t group = opt.antithetic ? 2 : 1;
    std::vector<double> x(total / group);
    for (const auto& s : specs) {
        for (std::size_t g = 0; g < x.size(); ++g) {
            double acc = 0.0;
            for (std::size_t j = 0; j < group; ++j) acc += payoff(s, ens.paths[g * group + j]);
            x[g] = df * acc / static_cast<double>(group);
        }
        const auto est = mean_estimate(x);
        out.push_back({est.mean, est.stderr, total});
    }
    return out;
}

inline PriceEstimate mc_price(ModelVariant variant, const MarketParams& params, const OptionSpec& spec,
                              std::size_t n_paths, const RngStream& seed, const PricingOptions& opt = {}) {
    return mc_prices(variant, params, std::span<const OptionSpec>(&spec, 1), n_paths, seed, opt)[0];
}

inline constexpr double kImpliedVolLow = 1e-6;
inline constexpr double kImpliedVolHigh = 5.0;

/// Black-Scholes implied volatility by bisection on [1e-6, 5].
inline double implied_vol(double price, double s0, double strike, double r, double maturity, OptionKind kind,
                          double tol = 1e-8) {
    if (kind == OptionKind::realized_variance) throw DomainError("implied_vol: only call and put are supported");
    double lo = kImpliedVolLow, hi = kImpliedVolHigh;
    const double p_lo = black_scholes(s0, strike, r, lo, maturity, kind);
    const double p_hi = black_scholes(s0, strike, r, hi, maturity, kind);
    if (!(price >= p_lo && price <= p_hi))
        throw DomainError("implied_vol: price " + std::to_string(price) + " outside attainable range [" +
                          std::to_string(p_lo) + ", " + std::to_string(p_hi) + "]");
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (black_scholes(s0, strike, r, mid, maturity, kind) < price)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Central-difference vega.
inline double numerical_vega(double s0, double strike, double r, double sigma, double maturity, OptionKind kind) {
    const double h = std::min(1e-4, 0.5 * sigma);
    return (black_scholes(s0, strike, r, sigma + h, maturity, kind) -
            black_scholes(s0, strike, r, sigma - h, maturity, kind)) /
           (2.0 * h);
}

struct SmilePoint {
    double strike = 0.0;
    double implied_vol = 0.0;
    double stderr = 0.0;  // price stderr / vega
};

/// Implied volatilities across strikes from one Q-ensemble. Each strike uses
/// its out-of-the-money claim (put below the forward, call above).
inline std::vector<SmilePoint> smile_curve(ModelVariant variant, const MarketParams& params,
                                           std::span<const double> strikes, double maturity, std::size_t n_paths,
                                           const RngStream& seed, const PricingOptions& opt = {}) {
    if (strikes.empty()) throw DomainError("smile_curve: no strikes");
    for (std::size_t i = 0; i < strikes.size(); ++i) {
        if (!(strikes[i] > 0.0)) throw DomainError("smile_curve: strikes must be positive");
        if (i > 0 && !(strikes[i] > strikes[i - 1])) throw DomainError("smile_curve: strikes must be strictly increasing");
    }
    const double forward = params.s0 * std::exp(params.r * maturity);
    std::vector<OptionSpec> specs;
    for (double k : strikes) specs.push_back({k < forward ? OptionKind::put : OptionKind::call, k, maturity});
    const auto prices = mc_prices(variant, params, specs, n_paths, seed, opt);
    std::vector<SmilePoint> out(strikes.size());
    parallel_for(strikes.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto& s = specs[i];
            double iv = 0.0;
            try {
                iv = implied_vol(prices[i].value, params.s0, s.strike, params.r, maturity, s.kind);
            } catch (const DomainError& e) {
                throw DataError("smile_curve: price at strike " + std::to_string(s.strike) +
                                " cannot be inverted: " + e.what());
            }
            const double vega = numerical_vega(params.s0, s.strike, params.r, iv, maturity, s.kind);
            out[i] = {s.strike, iv, vega > 0.0 ? prices[i].stderr / vega : INFINITY};
        }
    });
    return out;
}

}  // namespace fracvol
