#pragma once

// Fractional Brownian motion on uniform grids: the covariance oracle, exact
// samplers (Cholesky and circulant embedding), fractional noise at an
// observation scale, and an aggregated-variance Hurst estimator.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "fracvol/errors.hpp"
#include "fracvol/grid.hpp"
#include "fracvol/numerics.hpp"
#include "fracvol/rng.hpp"

namespace fracvol {

class HurstParameter {
public:
    explicit HurstParameter(double h) : h_(h) {
        if (!(h > 0.0 && h < 1.0)) throw DomainError("Hurst parameter must lie in (0, 1), got " + std::to_string(h));
    }

    double value() const { return h_; }
    operator double() const { return h_; }

    /// The kernel representation B_H = int K_H dW exists only for h > 1/2.
    void require_kernel() const {
        if (!(h_ > 0.5)) throw DomainError("kernel representation requires H > 1/2, got " + std::to_string(h_));
    }

private:
    double h_;
};

/// B_H sampled on a grid with B_H(t_start) = 0. When built from a Brownian
/// path, `driver` holds that path's cell increments dW_j.
struct FbmPath {
    TimeGrid grid;
    std::vector<double> values;
    HurstParameter h{0.5};
    std::shared_ptr<const std::vector<double>> driver;
};

/// Cov[B_H(s), B_H(t)] = (s^2H + t^2H - |t-s|^2H) / 2.
inline double fbm_covariance(double s, double t, HurstParameter h) {
    if (s < 0.0 || t < 0.0) throw DomainError("fbm_covariance: times must be nonnegative");
    const double twoh = 2.0 * h.value();
    return 0.5 * (std::pow(s, twoh) + std::pow(t, twoh) - std::pow(std::abs(t - s), twoh));
}

/// Autocovariance of unit-step fractional Gaussian noise at integer lag.
inline double fgn_autocovariance(double lag, HurstParameter h) {
    const double twoh = 2.0 * h.value();
    lag = std::abs(lag);
    return 0.5 * (std::pow(lag + 1.0, twoh) + std::pow(std::abs(lag - 1.0), twoh) - 2.0 * std::pow(lag, twoh));
}

enum class FbmMethod { cholesky, circulant };

/// Precomputed exact sampler for one (grid, h, method). Build once, then
/// draw as many independent paths as needed.
class FbmSampler {
public:
    /// Eigenvalues of the circulant embedding in [-kClampTolerance, 0) are
    /// clamped to zero; anything more negative is an embedding failure.
    static constexpr double kClampTolerance = 1e-12;

    FbmSampler(TimeGrid grid, HurstParameter h, FbmMethod method) : grid_(grid), h_(h), method_(method) {
        grid_.validate();
        if (method_ == FbmMethod::cholesky)
            build_cholesky();
        else
            build_circulant();
    }

    const TimeGrid& grid() const { return grid_; }
    HurstParameter hurst() const { return h_; }
    FbmMethod method() const { return method_; }

    /// Normal variates consumed per path.
    std::size_t normals_per_path() const {
        return method_ == FbmMethod::cholesky ? grid_.n_points - 1 : embedding_.size();
    }

    /// Path from caller-supplied standard normals (normals_per_path() of them).
    FbmPath sample_from_normals(std::span<const double> z) const {
        if (z.size() != normals_per_path()) throw DomainError("FbmSampler: wrong number of normals");
        FbmPath path{grid_, std::vector<double>(grid_.n_points, 0.0), h_, nullptr};
        const std::size_t n = grid_.n_points - 1;
        if (method_ == FbmMethod::cholesky) {
            const Eigen::Map<const Eigen::VectorXd> zv(z.data(), static_cast<Eigen::Index>(n));
            const Eigen::VectorXd x = chol_.triangularView<Eigen::Lower>() * zv;
            for (std::size_t i = 0; i < n; ++i) path.values[i + 1] = x[static_cast<Eigen::Index>(i)];
            return path;
        }
        const std::size_t m = embedding_.size();
        const std::size_t half = m / 2;
        std::vector<std::complex<double>> spec(m);
        spec[0] = {embedding_[0] * z[0], 0.0};
        spec[half] = {embedding_[half] * z[1], 0.0};
        for (std::size_t k = 1; k < half; ++k) {
            const double a = embedding_[k] * (1.0 / std::numbers::sqrt2);
            spec[k] = {a * z[2 * k], a * z[2 * k + 1]};
            spec[m - k] = std::conj(spec[k]);
        }
        std::vector<std::complex<double>> out;
        Eigen::FFT<double> fft;
        fft.fwd(out, spec);
        const double scale = std::pow(grid_.dt, h_.value());
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += scale * out[i].real();
            path.values[i + 1] = acc;
        }
        return path;
    }

    FbmPath sample(const RngStream& rng, std::uint32_t lane = 0) const {
        std::vector<double> z(normals_per_path());
        auto engine = rng.engine(lane);
        fill_normal(engine, z);
        return sample_from_normals(z);
    }

private:
    void build_cholesky() {
        const std::size_t n = grid_.n_points - 1;
        Eigen::MatrixXd cov(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                const double c = fbm_covariance((i + 1) * grid_.dt, (j + 1) * grid_.dt, h_);
                cov(i, j) = c;
                cov(j, i) = c;
            }
        const double scale = cov.diagonal().mean();
        for (double jitter : {0.0, 1e-12, 1e-10}) {
            Eigen::MatrixXd a = cov;
            a.diagonal().array() += jitter * scale;
            Eigen::LLT<Eigen::MatrixXd> llt(a);
            if (llt.info() == Eigen::Success) {
                chol_ = llt.matrixL();
                return;
            }
        }
        throw NumericalError("fBm covariance is not positive definite after jitter");
    }

    void build_circulant() {
        const std::size_t n = grid_.n_points - 1;
        std::size_t half = 1;
        while (half < n) half *= 2;
        const std::size_t m = 2 * half;
        std::vector<std::complex<double>> row(m);
        for (std::size_t k = 0; k <= half; ++k) row[k] = fgn_autocovariance(static_cast<double>(k), h_);
        for (std::size_t k = 1; k < half; ++k) row[m - k] = row[k];
        std::vector<std::complex<double>> eig;
        Eigen::FFT<double> fft;
        fft.fwd(eig, row);
        embedding_.resize(m);
        for (std::size_t k = 0; k < m; ++k) {
            double lambda = eig[k].real();
            if (lambda < 0.0) {
                if (lambda < -kClampTolerance)
                    throw NumericalError("circulant embedding has negative eigenvalue " + std::to_string(lambda));
                lambda = 0.0;
            }
            embedding_[k] = std::sqrt(lambda / static_cast<double>(m));
        }
    }

    TimeGrid grid_;
    HurstParameter h_;
    FbmMethod method_;
    Eigen::MatrixXd chol_;
    std::vector<double> embedding_;  // sqrt(lambda_k / m)
};

inline FbmPath sample_fbm(const TimeGrid& grid, HurstParameter h, const RngStream& rng, FbmMethod method) {
    return FbmSampler(grid, h, method).sample(rng);
}

/// Increments B_H(t) - B_H(t - delta) at a fixed observation scale.
struct FractionalNoise {
    TimeGrid grid;  // times t of the increments
    std::vector<double> values;
    double delta = 0.0;
    HurstParameter h{0.5};
};

inline FractionalNoise fractional_noise(const FbmPath& path, double delta) {
    path.grid.validate();
    if (path.values.size() != path.grid.n_points) throw DomainError("fractional_noise: path length does not match grid");
    const std::size_t lag = steps_in(delta, path.grid.dt, "delta");
    if (lag >= path.grid.n_points)
        throw DomainError("fractional_noise: grid has insufficient pre-history for delta = " + std::to_string(delta));
    FractionalNoise out{{path.grid.time(lag), path.grid.dt, path.grid.n_points - lag}, {}, delta, path.h};
    out.values.resize(out.grid.n_points);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = path.values[i + lag] - path.values[i];
    return out;
}

struct HurstEstimate {
    double value = 0.0;
    double stderr = 0.0;
    std::vector<double> block_sizes;
    std::vector<double> block_variances;
};

struct HurstOptions {
    std::size_t min_block = 1;
    /// Minimum number of blocks at the largest aggregation level.
    std::size_t min_blocks = 8;
    /// Variance of additive white noise in the series; its contribution
    /// noise/b is removed from every aggregated variance before the fit.
    double noise_variance = 0.0;
};

/// Aggregated-variance estimator for a stationary noise series (fGn-like).
///
/// For dyadic block sizes b the series is cut into K = n/b blocks and the
/// sample variance S_b of the block means is formed. Under fGn
///   E[S_b] = sigma^2 b^(2H-2) * K/(K-1) * (1 - K^(2H-2)),
/// the last two factors being the finite-sample bias of centring on the
/// sample mean. log S_b is regressed on log b with weights (K-1)/2 (the
/// inverse variance of log S_b), iterating the bias correction to a fixed
/// point in H. The slope is 2H - 2. `dt` sets no scale (the estimator is
/// scale free) and is checked for validity only.
inline HurstEstimate estimate_hurst(std::span<const double> series, double dt, const HurstOptions& opts = {}) {
    if (!(dt > 0.0)) throw DomainError("estimate_hurst: dt must be positive");
    const std::size_t n = series.size();
    if (n < 64) throw DomainError("estimate_hurst: series too short (need >= 64 points)");
    const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    if (*hi - *lo <= 0.0) throw DataError("estimate_hurst: degenerate (constant) series");

    std::vector<std::size_t> blocks;
    const std::size_t b0 = std::max<std::size_t>(1, opts.min_block);
    for (std::size_t b = b0; n / b >= opts.min_blocks; b *= 2) blocks.push_back(b);
    for (std::size_t b = blocks.empty() ? b0 : blocks.back() * 2; blocks.size() < 5 && n / b >= 4; b *= 2)
        blocks.push_back(b);
    if (blocks.size() < 5) throw DomainError("estimate_hurst: series too short for five aggregation levels");

    HurstEstimate est;
    std::vector<double> logb, logs, count, weight;
    for (std::size_t b : blocks) {
        const std::size_t k = n / b;
        std::vector<double> means(k);
        for (std::size_t j = 0; j < k; ++j) {
            CompensatedSum s;
            for (std::size_t i = 0; i < b; ++i) s += series[j * b + i];
            means[j] = s.value() / static_cast<double>(b);
        }
        const double var = std::pow(mean_estimate(means).stderr, 2) * static_cast<double>(k);
        const double signal = var - opts.noise_variance / static_cast<double>(b);
        est.block_sizes.push_back(static_cast<double>(b));
        est.block_variances.push_back(var);
        if (!(signal > 0.0)) continue;
        logb.push_back(std::log(static_cast<double>(b)));
        logs.push_back(std::log(signal));
        count.push_back(static_cast<double>(k));
        weight.push_back((static_cast<double>(k) - 1.0) / 2.0);
    }
    if (logb.size() < 3) throw DataError("estimate_hurst: too few aggregation levels above the noise floor");

    double h = 0.5;
    LineFit fit;
    std::vector<double> y(logb.size());
    for (int iter = 0; iter < 200; ++iter) {
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double k = count[i];
            y[i] = logs[i] - std::log(k / (k - 1.0) * (1.0 - std::pow(k, 2.0 * h - 2.0)));
        }
        fit = fit_line(logb, y, weight);
        const double next = std::clamp(1.0 + fit.slope / 2.0, 0.01, 0.99);
        const bool done = std::abs(next - h) < 1e-12;
        h = next;
        if (done) break;
    }
    est.value = h;
    est.stderr = fit.slope_stderr / 2.0;
    return est;
}

/// Standard Brownian path W on `grid` with W(t_start) = 0.
inline SampledPath brownian_path(const TimeGrid& grid, const RngStream& rng, std::uint32_t lane = 0) {
    grid.validate();
    SampledPath path{grid, std::vector<double>(grid.n_points, 0.0)};
    std::vector<double> z(grid.n_points - 1);
    auto engine = rng.engine(lane);
    fill_normal(engine, z);
    const double sd = std::sqrt(grid.dt);
    for (std::size_t i = 0; i < z.size(); ++i) path.values[i + 1] = path.values[i] + sd * z[i];
    return path;
}

}  // namespace fracvol
