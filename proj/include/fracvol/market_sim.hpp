#pragma once

// Coupled price/volatility simulation.
//
//   dS_t = mu S_t dt + sigma_t S_t dB_t,   sigma_t from the fractional noise
//   B_H(t) - B_H(t - delta) of a volatility driver W.
//
// independent: B and W are distinct streams.
// identified:  W = coupling * B, with B_H built from W by the kernel, so the
//              price and the volatility share one Brownian source.
//
// Prices step exactly in log with volatility frozen over each step.

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fracvol/errors.hpp"
#include "fracvol/fbm.hpp"
#include "fracvol/grid.hpp"
#include "fracvol/kernel.hpp"
#include "fracvol/parallel.hpp"
#include "fracvol/rng.hpp"
#include "fracvol/vol_model.hpp"

namespace fracvol {

enum class ModelVariant { independent, identified };
enum class Measure { P, Q };

/// How the fBm behind the volatility is generated. `kernel` builds it from a
/// recorded Brownian driver; the exact samplers are only available for the
/// independent variant and leave no driver to weight with.
enum class VolDriver { kernel, circulant, cholesky };

inline std::string to_string(ModelVariant v) { return v == ModelVariant::independent ? "independent" : "identified"; }
inline std::string to_string(Measure m) { return m == Measure::P ? "P" : "Q"; }
inline std::string to_string(VolDriver d) {
    switch (d) {
        case VolDriver::kernel: return "kernel";
        case VolDriver::circulant: return "circulant";
        case VolDriver::cholesky: return "cholesky";
    }
    return "?";
}

inline ModelVariant parse_variant(const std::string& s) {
    if (s == "independent") return ModelVariant::independent;
    if (s == "identified") return ModelVariant::identified;
    throw DomainError("unknown variant '" + s + "' (expected independent or identified)");
}
inline Measure parse_measure(const std::string& s) {
    if (s == "P") return Measure::P;
    if (s == "Q") return Measure::Q;
    throw DomainError("unknown measure '" + s + "' (expected P or Q)");
}
inline VolDriver parse_vol_driver(const std::string& s) {
    if (s == "kernel") return VolDriver::kernel;
    if (s == "circulant") return VolDriver::circulant;
    if (s == "cholesky") return VolDriver::cholesky;
    throw DomainError("unknown vol driver '" + s + "' (expected kernel, circulant or cholesky)");
}

struct MarketParams {
    VolParams vol;
    double mu = 0.1;
    double r = 0.03;
    double s0 = 100.0;
    /// Sign linking the volatility driver to the price driver in the
    /// identified variant: W = coupling * B. Negative values give the
    /// negative leverage correlation.
    double coupling = -1.0;
    /// Optional per-step drift under P; overrides mu when non-empty.
    std::vector<double> drift_path;

    void validate() const {
        vol.validate();
        if (!(s0 > 0.0) || !std::isfinite(s0)) throw DomainError("MarketParams: s0 must be positive");
        if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("MarketParams: r must be nonnegative");
        if (!std::isfinite(mu)) throw DomainError("MarketParams: mu must be finite");
        if (coupling != 1.0 && coupling != -1.0) throw DomainError("MarketParams: coupling must be +1 or -1");
        for (double d : drift_path)
            if (!std::isfinite(d)) throw DomainError("MarketParams: drift path must be finite");
    }

    double drift_at(std::size_t step) const { return drift_path.empty() ? mu : drift_path[step]; }
};

struct SimulationOptions {
    VolDriver vol_driver = VolDriver::kernel;
    /// Pairs (2q, 2q+1) share stream q; the second path negates every normal.
    bool antithetic = false;
    bool record_paths = true;        // S and sigma per grid point
    bool record_increments = false;  // dB and (when available) dW per step
    /// Stream id of the first path, so an ensemble can be produced in chunks.
    std::uint64_t first_path = 0;
    /// Kernel driver only: add the within-cell residual (lane 2) so the
    /// volatility fBm has its exact law on the grid. Off gives the plain
    /// cell-averaged sum.
    bool cell_residual = true;
};

/// One simulated path. Vectors are empty unless recorded; the scalar
/// summaries are always filled.
struct PathRecord {
    std::vector<double> S, sigma, dB, dW;
    double s_T = 0.0;
    double integrated_variance = 0.0;  // trapezoidal int_0^T sigma^2 dt
    double w_T = 0.0;                  // volatility driver at T (independent, kernel driver)
    bool has_w = false;
    /// Girsanov pieces for gamma = (r - mu)/sigma against the price driver:
    /// gamma_dB = sum gamma dB, gamma_sq_dt = sum gamma^2 dt, log_eta = gamma_dB - gamma_sq_dt/2.
    double gamma_dB = 0.0;
    double gamma_sq_dt = 0.0;
    double log_eta = 0.0;
};

struct Ensemble {
    TimeGrid grid;
    ModelVariant variant = ModelVariant::independent;
    Measure measure = Measure::P;
    MarketParams params;
    RngStream seed;
    SimulationOptions options;
    std::vector<PathRecord> paths;

    std::size_t size() const { return paths.size(); }
    double horizon() const { return grid.t_end() - grid.t_start; }
};

namespace detail {

/// Stream id and sign for path p under the antithetic pairing rule.
inline std::pair<std::uint64_t, double> path_stream(std::size_t p, const SimulationOptions& opt) {
    const std::uint64_t idx = opt.first_path + p;
    if (!opt.antithetic) return {idx, 1.0};
    return {idx / 2, (idx % 2 == 0) ? 1.0 : -1.0};
}

struct SimulationSetup {
    TimeGrid grid;
    TimeGrid fbm_grid;       // starts at t_start - delta
    std::size_t n_steps = 0;
    std::size_t lag = 0;     // delta / dt
    std::shared_ptr<const KernelMatrix> kernel;
    std::shared_ptr<const KernelResidual> residual;
    std::optional<FbmSampler> sampler;
    double kernel_scale = 0.0;  // dt^(H - 1/2)
    double residual_scale = 0.0;  // dt^H
};

inline PathRecord simulate_path(const SimulationSetup& su, ModelVariant variant, Measure measure,
                                const MarketParams& mp, const SimulationOptions& opt, std::uint64_t seed,
                                std::size_t p) {
    const auto [stream, sign] = path_stream(p, opt);
    const RngStream rng{seed, stream};
    const std::size_t n = su.n_steps, m = su.lag;
    const double dt = su.grid.dt, sqdt = std::sqrt(dt);
    const VolParams& vp = mp.vol;

    std::vector<double> zb(n);
    auto eng_b = rng.engine(0);
    fill_normal(eng_b, zb);
    for (auto& z : zb) z *= sign * sqdt;

    // Volatility driver increments over [-delta, T] when the kernel is used,
    // otherwise the exact fBm path.
    std::vector<double> dw;
    std::vector<double> bh;
    std::vector<double> zr;
    auto eng_w = rng.engine(1);
    if (su.kernel) {
        dw.assign(m + n, 0.0);
        const std::size_t own = variant == ModelVariant::independent ? m + n : m;
        std::vector<double> zw(own);
        fill_normal(eng_w, zw);
        for (std::size_t j = 0; j < own; ++j) dw[j] = sign * sqdt * zw[j];
        if (variant == ModelVariant::identified)
            for (std::size_t j = 0; j < m; ++j) dw[j] *= mp.coupling;
        bh.assign(m + n + 1, 0.0);
        if (su.residual) {
            zr.resize(m + n);
            auto eng_r = rng.engine(2);
            fill_normal(eng_r, zr);
            if (sign < 0)
                for (auto& x : zr) x = -x;
        }
    } else {
        std::vector<double> z(su.sampler->normals_per_path());
        fill_normal(eng_w, z);
        if (sign < 0)
            for (auto& x : z) x = -x;
        bh = su.sampler->sample_from_normals(z).values;
    }

    const double scale = vp.k / vp.delta;
    const double log_theta_shift = std::log(vp.theta) - 0.5 * scale * scale * std::pow(vp.delta, 2.0 * vp.h.value());
    // B_H rows are filled lazily: row l needs dw[0..l-1].
    std::size_t rows_done = su.kernel ? 1 : bh.size();
    const auto ensure_row = [&](std::size_t l) {
        for (; rows_done <= l; ++rows_done) {
            bh[rows_done] = su.kernel_scale * su.kernel->apply_row(rows_done, dw);
            if (su.residual) bh[rows_done] += su.residual_scale * su.residual->apply_row(rows_done, zr);
        }
    };
    const auto sigma_at = [&](std::size_t i) {
        ensure_row(i + m);
        return std::exp(log_theta_shift + scale * (bh[i + m] - bh[i]));
    };

    PathRecord rec;
    if (opt.record_paths) {
        rec.S.resize(n + 1);
        rec.sigma.resize(n + 1);
        rec.S[0] = mp.s0;
    }
    if (opt.record_increments) rec.dB.resize(n);

    double log_s = std::log(mp.s0);
    long double a_sum = 0.0L, b_sum = 0.0L;
    double iv = 0.0;
    double sigma = sigma_at(0);
    for (std::size_t i = 0; i < n; ++i) {
        if (opt.record_paths) rec.sigma[i] = sigma;
        iv += (i == 0 ? 0.5 : 1.0) * sigma * sigma;
        const double mu_p = mp.drift_at(i);
        const double gamma = (mp.r - mu_p) / sigma;
        const double drift = measure == Measure::P ? mu_p : mp.r;
        const double db = zb[i];
        log_s += (drift - 0.5 * sigma * sigma) * dt + sigma * db;
        if (opt.record_paths) rec.S[i + 1] = std::exp(log_s);
        if (opt.record_increments) rec.dB[i] = db;
        a_sum += static_cast<long double>(gamma) * db;
        b_sum += static_cast<long double>(gamma) * gamma * dt;
        if (su.kernel && variant == ModelVariant::identified) {
            // The P-Brownian motion behind the price; under Q it is the
            // Q-Brownian driver shifted by the market price of risk.
            const double w_inc = measure == Measure::P ? db : db + gamma * dt;
            dw[m + i] = mp.coupling * w_inc;
        }
        sigma = sigma_at(i + 1);
    }
    if (opt.record_paths) rec.sigma[n] = sigma;
    iv += 0.5 * sigma * sigma;

    rec.s_T = std::exp(log_s);
    rec.integrated_variance = iv * dt;
    rec.gamma_dB = static_cast<double>(a_sum);
    rec.gamma_sq_dt = static_cast<double>(b_sum);
    rec.log_eta = static_cast<double>(a_sum - 0.5L * b_sum);
    if (su.kernel && variant == ModelVariant::independent) {
        long double w = 0.0L;
        for (std::size_t i = 0; i < n; ++i) w += dw[m + i];
        rec.w_T = static_cast<double>(w);
        rec.has_w = true;
    }
    if (opt.record_increments && su.kernel) rec.dW.assign(dw.begin() + static_cast<std::ptrdiff_t>(m), dw.end());
    return rec;
}

}  // namespace detail

/// Simulates n_paths paths on `grid` (price window [t_start, t_end]). The
/// volatility needs fBm over [t_start - delta, t_end]; that pre-history is
/// generated internally. Deterministic in (seed.seed, path index) and
/// independent of the worker count.
inline Ensemble simulate_ensemble(ModelVariant variant, Measure measure, const MarketParams& params,
                                  const TimeGrid& grid, std::size_t n_paths, const RngStream& seed,
                                  const SimulationOptions& options = {}) {
    params.validate();
    grid.validate();
    if (n_paths == 0) throw DomainError("simulate_ensemble: n_paths must be at least 1");
    if (grid.n_points < 2) throw DomainError("simulate_ensemble: grid needs at least one step");
    const std::size_t n_steps = grid.n_points - 1;
    if (!params.drift_path.empty() && params.drift_path.size() != n_steps)
        throw DomainError("simulate_ensemble: drift path has " + std::to_string(params.drift_path.size()) +
                          " entries, grid has " + std::to_string(n_steps) + " steps");
    const std::size_t lag = steps_in(params.vol.delta, grid.dt, "delta");

    detail::SimulationSetup su;
    su.grid = grid;
    su.n_steps = n_steps;
    su.lag = lag;
    su.fbm_grid = TimeGrid{grid.t_start - params.vol.delta, grid.dt, n_steps + lag + 1};
    if (variant == ModelVariant::identified && options.vol_driver != VolDriver::kernel)
        throw DomainError("simulate_ensemble: the identified variant requires the kernel vol driver");
    if (options.vol_driver == VolDriver::kernel) {
        params.vol.h.require_kernel();
        su.kernel = KernelMatrix::shared(params.vol.h, su.fbm_grid.n_points);
        su.kernel_scale = std::pow(grid.dt, params.vol.h.value() - 0.5);
        if (options.cell_residual) {
            su.residual = KernelResidual::shared(params.vol.h, su.fbm_grid.n_points);
            su.residual_scale = std::pow(grid.dt, params.vol.h.value());
        }
    } else {
        su.sampler.emplace(su.fbm_grid, params.vol.h,
                           options.vol_driver == VolDriver::circulant ? FbmMethod::circulant : FbmMethod::cholesky);
    }

    Ensemble ens{grid, variant, measure, params, seed, options, std::vector<PathRecord>(n_paths)};
    parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p)
            ens.paths[p] = detail::simulate_path(su, variant, measure, params, options, seed.seed, p);
    });
    return ens;
}

/// Z_i = S_i exp(-r (t_i - t_0)).
inline std::vector<double> discounted_path(std::span<const double> s, const TimeGrid& grid, double r) {
    if (s.size() != grid.n_points) throw DomainError("discounted_path: length does not match grid");
    std::vector<double> z(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) z[i] = s[i] * std::exp(-r * (grid.time(i) - grid.t_start));
    return z;
}

/// r_i = log S_{i+lag} - log S_i.
inline std::vector<double> log_returns(std::span<const double> s, std::size_t lag = 1) {
    if (lag < 1 || lag >= s.size())
        throw DomainError("log_returns: lag " + std::to_string(lag) + " out of range for series of length " +
                          std::to_string(s.size()));
    std::vector<double> out(s.size() - lag);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(s[i] > 0.0) || !(s[i + lag] > 0.0)) throw DataError("log_returns: nonpositive price");
        out[i] = std::log(s[i + lag]) - std::log(s[i]);
    }
    return out;
}

}  // namespace fracvol
