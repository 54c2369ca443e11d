#pragma once

// Stylized-fact statistics and moment-based calibration.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fracvol/errors.hpp"
#include "fracvol/fbm.hpp"
#include "fracvol/numerics.hpp"
#include "fracvol/vol_model.hpp"

namespace fracvol {

enum class LeverageNormalization { raw, normalized };

/// L(tau) = <r(t+tau)^2 r(t)> - <r(t+tau)^2><r(t)> for tau in [-tau_max, tau_max].
/// The normalized curve divides by <r^2>^(3/2), which makes it invariant
/// under rescaling of the returns.
struct LeverageCurve {
    std::vector<int> taus;
    std::vector<double> values;
    std::vector<double> stderrs;
    LeverageNormalization normalization = LeverageNormalization::normalized;

    double at(int tau) const { return values.at(static_cast<std::size_t>(tau - taus.front())); }
    double stderr_at(int tau) const { return stderrs.at(static_cast<std::size_t>(tau - taus.front())); }
};

namespace detail {

inline double mean_square(std::span<const double> r) {
    CompensatedSum s;
    for (double x : r) s += x * x;
    return s.value() / static_cast<double>(r.size());
}

/// Time-averaged raw L(tau) over one series.
inline double leverage_raw(std::span<const double> r, int tau) {
    const std::size_t lag = static_cast<std::size_t>(std::abs(tau));
    const std::size_t n = r.size() - lag;
    CompensatedSum a, b, c;
    for (std::size_t i = 0; i < n; ++i) {
        // tau >= 0: (t, t+tau) = (i, i+lag); tau < 0: (t, t+tau) = (i+lag, i)
        const double now = tau >= 0 ? r[i] : r[i + lag];
        const double later = tau >= 0 ? r[i + lag] : r[i];
        a += later * later * now;
        b += later * later;
        c += now;
    }
    const double nn = static_cast<double>(n);
    return a.value() / nn - (b.value() / nn) * (c.value() / nn);
}

}  // namespace detail

/// Leverage curve of a single series; stderr by batch means over contiguous blocks.
inline LeverageCurve leverage_correlation(std::span<const double> returns, int tau_max,
                                          LeverageNormalization norm = LeverageNormalization::normalized) {
    if (tau_max < 0) throw DomainError("leverage_correlation: tau_max must be nonnegative");
    const std::size_t need = 4 * static_cast<std::size_t>(std::max(tau_max, 1));
    if (returns.size() < need)
        throw DomainError("leverage_correlation: series of length " + std::to_string(returns.size()) +
                          " is shorter than 4 * tau_max = " + std::to_string(need));
    const double ms = detail::mean_square(returns);
    if (!(ms > 0.0)) throw DataError("leverage_correlation: zero-variance returns");
    const double scale = norm == LeverageNormalization::normalized ? 1.0 / std::pow(ms, 1.5) : 1.0;
    const std::size_t batches =
        std::clamp<std::size_t>(returns.size() / (2 * static_cast<std::size_t>(std::max(tau_max, 1))), 2, 20);
    const std::size_t len = returns.size() / batches;
    LeverageCurve out;
    out.normalization = norm;
    std::vector<double> per_batch(batches);
    for (int tau = -tau_max; tau <= tau_max; ++tau) {
        out.taus.push_back(tau);
        out.values.push_back(scale * detail::leverage_raw(returns, tau));
        for (std::size_t b = 0; b < batches; ++b)
            per_batch[b] = scale * detail::leverage_raw(returns.subspan(b * len, len), tau);
        out.stderrs.push_back(mean_estimate(per_batch).stderr);
    }
    return out;
}

/// Per-path time averages, ensemble-averaged; stderr across paths.
inline LeverageCurve leverage_ensemble(const std::vector<std::vector<double>>& returns, int tau_max,
                                       LeverageNormalization norm = LeverageNormalization::normalized) {
    if (returns.size() < 2) throw DomainError("leverage_ensemble: need at least two series");
    LeverageCurve out;
    out.normalization = norm;
    std::vector<std::vector<double>> curves(static_cast<std::size_t>(2 * tau_max + 1));
    for (const auto& r : returns) {
        if (r.size() < 4 * static_cast<std::size_t>(std::max(tau_max, 1)))
            throw DomainError("leverage_ensemble: series shorter than 4 * tau_max");
        const double ms = detail::mean_square(r);
        if (!(ms > 0.0)) throw DataError("leverage_ensemble: zero-variance returns");
        const double scale = norm == LeverageNormalization::normalized ? 1.0 / std::pow(ms, 1.5) : 1.0;
        for (int tau = -tau_max; tau <= tau_max; ++tau)
            curves[static_cast<std::size_t>(tau + tau_max)].push_back(scale * detail::leverage_raw(r, tau));
    }
    for (int tau = -tau_max; tau <= tau_max; ++tau) {
        const auto est = mean_estimate(curves[static_cast<std::size_t>(tau + tau_max)]);
        out.taus.push_back(tau);
        out.values.push_back(est.mean);
        out.stderrs.push_back(est.stderr);
    }
    return out;
}

/// Sample autocorrelation at lags 1..max_lag.
inline std::vector<double> acf(std::span<const double> x, std::size_t max_lag) {
    if (x.size() <= max_lag)
        throw DomainError("acf: series of length " + std::to_string(x.size()) + " too short for lag " +
                          std::to_string(max_lag));
    CompensatedSum s;
    for (double v : x) s += v;
    const double mean = s.value() / static_cast<double>(x.size());
    CompensatedSum c0;
    for (double v : x) c0 += (v - mean) * (v - mean);
    if (!(c0.value() > 0.0)) throw DataError("acf: constant series");
    std::vector<double> out(max_lag);
    for (std::size_t l = 1; l <= max_lag; ++l) {
        CompensatedSum c;
        for (std::size_t i = 0; i + l < x.size(); ++i) c += (x[i] - mean) * (x[i + l] - mean);
        out[l - 1] = c.value() / c0.value();
    }
    return out;
}

/// Sample kurtosis minus 3 (moment estimator, central moments with 1/n).
inline double excess_kurtosis(std::span<const double> x) {
    if (x.size() < 100) throw DomainError("excess_kurtosis: need at least 100 observations");
    CompensatedSum s;
    for (double v : x) s += v;
    const double n = static_cast<double>(x.size());
    const double mean = s.value() / n;
    CompensatedSum m2, m4;
    for (double v : x) {
        const double d = (v - mean) * (v - mean);
        m2 += d;
        m4 += d * d;
    }
    const double var = m2.value() / n;
    if (!(var > 0.0)) throw DataError("excess_kurtosis: zero variance");
    return m4.value() / n / (var * var) - 3.0;
}

/// Excess kurtosis with a batch-means standard error.
inline MeanEstimate excess_kurtosis_batched(std::span<const double> x, std::size_t batches = 20) {
    const double full = excess_kurtosis(x);
    if (batches < 2 || x.size() / batches < 100)
        throw DomainError("excess_kurtosis_batched: need at least 100 observations per batch");
    const std::size_t len = x.size() / batches;
    std::vector<double> per(batches);
    for (std::size_t b = 0; b < batches; ++b) per[b] = excess_kurtosis(x.subspan(b * len, len));
    return {full, mean_estimate(per).stderr, x.size()};
}

/// Mean and standard error at each index across equally long curves.
struct CurveEstimate {
    std::vector<double> mean;
    std::vector<double> stderr;
};

inline CurveEstimate ensemble_mean(const std::vector<std::vector<double>>& curves) {
    if (curves.empty()) throw DomainError("ensemble_mean: no curves");
    const std::size_t n = curves.front().size();
    CurveEstimate out{std::vector<double>(n), std::vector<double>(n)};
    std::vector<double> col(curves.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < curves.size(); ++c) {
            if (curves[c].size() != n) throw DomainError("ensemble_mean: curves differ in length");
            col[c] = curves[c][i];
        }
        const auto est = mean_estimate(col);
        out.mean[i] = est.mean;
        out.stderr[i] = est.stderr;
    }
    return out;
}

// ----------------------------------------------------------------------------
// Calibration

namespace detail {

/// psi'(m/2) for integer m >= 1.
inline double trigamma_half(std::size_t m) {
    constexpr double pi2 = std::numbers::pi * std::numbers::pi;
    if (m % 2 == 0) {
        double s = pi2 / 6.0;
        for (std::size_t k = 1; k < m / 2; ++k) s -= 1.0 / static_cast<double>(k * k);
        return s;
    }
    double s = pi2 / 2.0;
    for (std::size_t k = 1; k <= m / 2; ++k) s -= 4.0 / std::pow(2.0 * static_cast<double>(k) - 1.0, 2);
    return s;
}

/// E[sqrt(chi^2_m / m)].
inline double chi_mean_factor(std::size_t m) {
    const double md = static_cast<double>(m);
    return std::sqrt(2.0 / md) * std::exp(std::lgamma(0.5 * (md + 1.0)) - std::lgamma(0.5 * md));
}

/// Mean correlation of fractional noise (scale delta = m steps) over all
/// pairs of points inside one window of m steps.
inline double window_smoothing(std::size_t m, double h) {
    double acc = 0.0;
    const double md = static_cast<double>(m);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t l = 0; l < m; ++l) {
            const double s = std::abs(static_cast<double>(j) - static_cast<double>(l)) / md;
            acc += 0.5 * (std::pow(s + 1.0, 2 * h) + std::pow(std::abs(s - 1.0), 2 * h) - 2.0 * std::pow(s, 2 * h));
        }
    return acc / (md * md);
}

}  // namespace detail

struct CalibrationDiagnostics {
    std::size_t window = 0;      // delta / dt
    std::size_t n_windows = 0;
    double h_stderr = 0.0;
    double log_vol_variance_raw = 0.0;   // sample variance of log sigma-hat
    double proxy_noise_variance = 0.0;   // psi'(m/2)/4
    double smoothing_factor = 1.0;
    double log_vol_variance = 0.0;       // corrected estimate of k^2 delta^(2H-2)
    bool volatility_detected = true;
    std::vector<double> block_sizes;
    std::vector<double> block_variances;
};

struct CalibrationResult {
    double h_hat = 0.5;
    double k_hat = 0.0;
    double theta_hat = 0.0;
    double beta_hat = 0.0;
    double delta_used = 0.0;
    CalibrationDiagnostics diagnostics;
};

/// Moment-based calibration from a price series sampled every dt.
///  1. sigma-hat: root-mean-square centred return per unit time over
///     non-overlapping windows of length delta.
///  2. H from the aggregated-variance estimator on log sigma-hat, with the
///     known proxy noise psi'(m/2)/4 removed.
///  3. k from Var[log sigma] = k^2 delta^(2H-2), correcting for the proxy
///     noise, the averaging inside each window and the finite sample.
///  4. theta = mean(sigma-hat) / E[sqrt(chi^2_m/m)]; beta from theta.
inline CalibrationResult calibrate(std::span<const double> prices, double dt, double delta) {
    if (!(dt > 0.0)) throw DomainError("calibrate: dt must be positive");
    if (prices.size() < 512) throw DomainError("calibrate: need at least 512 prices");
    const std::size_t m = steps_in(delta, dt, "delta");
    const std::size_t n_ret = prices.size() - 1;
    const std::size_t n_win = n_ret / m;
    if (m > n_ret) throw DomainError("calibrate: window delta longer than the series");
    if (n_win < 64) throw DomainError("calibrate: need at least 64 windows of length delta");
    for (double p : prices)
        if (!(p > 0.0) || !std::isfinite(p)) throw DataError("calibrate: prices must be positive and finite");

    // Returns are centred on the whole-series mean so the drift does not
    // leak into the volatility proxy.
    const double mean_ret = std::log(prices[n_win * m] / prices[0]) / static_cast<double>(n_win * m);
    std::vector<double> sig(n_win), logsig(n_win);
    for (std::size_t w = 0; w < n_win; ++w) {
        double ss = 0.0;
        for (std::size_t i = w * m; i < (w + 1) * m; ++i) {
            const double r = std::log(prices[i + 1] / prices[i]) - mean_ret;
            ss += r * r;
        }
        if (!(ss > 0.0)) throw DataError("calibrate: degenerate prices (zero returns over a whole window)");
        sig[w] = std::sqrt(ss / (static_cast<double>(m) * dt));
        logsig[w] = std::log(sig[w]);
    }

    CalibrationResult res;
    res.delta_used = delta;
    auto& dg = res.diagnostics;
    dg.window = m;
    dg.n_windows = n_win;
    dg.proxy_noise_variance = detail::trigamma_half(m) / 4.0;

    HurstOptions hopt;
    hopt.min_block = 2;
    hopt.noise_variance = dg.proxy_noise_variance;
    const auto var_est = mean_estimate(logsig);
    dg.log_vol_variance_raw = var_est.stderr * var_est.stderr * static_cast<double>(n_win);
    try {
        const auto he = estimate_hurst(logsig, delta, hopt);
        res.h_hat = he.value;
        dg.h_stderr = he.stderr;
        dg.block_sizes = he.block_sizes;
        dg.block_variances = he.block_variances;
    } catch (const DataError&) {
        // Proxy noise dominates every aggregation level: no volatility signal.
        dg.volatility_detected = false;
    }

    if (dg.volatility_detected) {
        dg.smoothing_factor = detail::window_smoothing(m, res.h_hat);
        const double finite = 1.0 - std::pow(static_cast<double>(n_win), 2.0 * res.h_hat - 2.0);
        dg.log_vol_variance =
            std::max(0.0, (dg.log_vol_variance_raw - dg.proxy_noise_variance) / (dg.smoothing_factor * finite));
        res.k_hat = std::sqrt(dg.log_vol_variance) * std::pow(delta, 1.0 - res.h_hat);
        if (!(dg.log_vol_variance > 0.0)) dg.volatility_detected = false;
    }

    CompensatedSum s;
    for (double v : sig) s += v;
    res.theta_hat = s.value() / static_cast<double>(n_win) / detail::chi_mean_factor(m);
    res.beta_hat = beta_from_theta(res.theta_hat, res.k_hat, delta, HurstParameter(res.h_hat));
    return res;
}

}  // namespace fracvol
