#pragma once

// Kernel representation B_H(t) = int_0^t K_H(t,s) dW_s for H > 1/2 with
//   K_H(t,s) = C_H s^(1/2-H) int_s^t (u-s)^(H-3/2) u^(H-1/2) du.
// The inner integral is desingularised by u = s + v^(1/(H-1/2)), which turns
// it into (1/a) int_0^{(t-s)^a} (s + v^(1/a))^a dv with a = H - 1/2, and is
// then evaluated by Gauss-Legendre. C_H is fixed numerically so that
// int_0^1 K_H(1,s)^2 ds = 1.

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "fracvol/errors.hpp"
#include "fracvol/fbm.hpp"
#include "fracvol/grid.hpp"
#include "fracvol/numerics.hpp"
#include "fracvol/rng.hpp"

namespace fracvol {

inline constexpr int kDefaultKernelNodes = 64;

namespace detail {

/// Gauss-Legendre rule mapped to [0, 1].
inline QuadratureRule unit_rule(int n) {
    QuadratureRule r = gauss_legendre(n);
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
        r.nodes[i] = 0.5 * (r.nodes[i] + 1.0);
        r.weights[i] *= 0.5;
    }
    return r;
}

/// int_s^t (u-s)^(a-1) u^a du, 0 <= s < t.
inline double inner_integral(double t, double s, double a, const QuadratureRule& unit) {
    const double upper = std::pow(t - s, a);
    const double inv_a = 1.0 / a;
    double acc = 0.0;
    for (std::size_t k = 0; k < unit.nodes.size(); ++k) {
        const double v = upper * unit.nodes[k];
        acc += unit.weights[k] * std::pow(s + std::pow(v, inv_a), a);
    }
    return acc * upper * inv_a;
}

/// int_lo^hi (u-s)^(a-1) u^a du for an interval well separated from s.
inline double inner_increment(double lo, double hi, double s, double a, const QuadratureRule& unit) {
    const double len = hi - lo;
    double acc = 0.0;
    for (std::size_t k = 0; k < unit.nodes.size(); ++k) {
        const double u = lo + len * unit.nodes[k];
        acc += unit.weights[k] * std::pow(u - s, a - 1.0) * std::pow(u, a);
    }
    return acc * len;
}

/// Rule on [0, 1/2] for integrands x^(-b) (c0 + c1 x^(2a) + ...): dyadic panels
/// [2^-(k+1), 2^-k] for k = 1..levels, then x = eps y^p on [0, eps] with
/// p = 1/(1-b), which absorbs the leading singular term.
inline QuadratureRule graded_left_rule(double b, int levels, const QuadratureRule& panel) {
    QuadratureRule out;
    for (int lvl = 1; lvl <= levels; ++lvl) {
        const double hi = std::ldexp(1.0, -lvl), lo = 0.5 * hi;
        for (std::size_t i = 0; i < panel.nodes.size(); ++i) {
            out.nodes.push_back(lo + (hi - lo) * panel.nodes[i]);
            out.weights.push_back((hi - lo) * panel.weights[i]);
        }
    }
    const double eps = std::ldexp(1.0, -levels - 1);
    const double p = 1.0 / (1.0 - b);
    for (std::size_t i = 0; i < panel.nodes.size(); ++i) {
        const double y = panel.nodes[i];
        out.nodes.push_back(eps * std::pow(y, p));
        out.weights.push_back(panel.weights[i] * eps * p * std::pow(y, p - 1.0));
    }
    return out;
}

inline double normalization_integral(double h, int nodes) {
    const double a = h - 0.5;
    const QuadratureRule unit = unit_rule(nodes);
    const auto k2 = [&](double s) {
        const double k = std::pow(s, -a) * inner_integral(1.0, s, a, unit);
        return k * k;
    };
    double left = 0.0;
    const QuadratureRule graded = graded_left_rule(2.0 * a, 48, unit_rule(24));
    for (std::size_t i = 0; i < graded.nodes.size(); ++i) left += graded.weights[i] * k2(graded.nodes[i]);
    // [1/2, 1]: s = 1 - w^4 / 2 smooths the (1-s)^(2a) endpoint.
    double right = 0.0;
    for (std::size_t i = 0; i < unit.nodes.size(); ++i) {
        const double w = unit.nodes[i];
        const double s = 1.0 - 0.5 * w * w * w * w;
        right += unit.weights[i] * k2(s) * 2.0 * w * w * w;
    }
    return left + right;
}

}  // namespace detail

/// C_H for the given quadrature order; computed once per (h, nodes).
inline double kernel_normalization(HurstParameter h, int nodes = kDefaultKernelNodes) {
    h.require_kernel();
    static std::mutex mutex;
    static std::map<std::pair<double, int>, double> cache;
    const std::lock_guard lock(mutex);
    const auto key = std::pair{h.value(), nodes};
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    const double c = 1.0 / std::sqrt(detail::normalization_integral(h.value(), nodes));
    cache.emplace(key, c);
    return c;
}

inline double kernel_value(double t, double s, HurstParameter h, int nodes = kDefaultKernelNodes) {
    h.require_kernel();
    if (!(s > 0.0)) throw DomainError("kernel_value: requires s > 0");
    if (!(s < t)) throw DomainError("kernel_value: requires s < t");
    const double a = h.value() - 0.5;
    static thread_local std::map<int, QuadratureRule> rules;
    auto it = rules.find(nodes);
    if (it == rules.end()) it = rules.emplace(nodes, detail::unit_rule(nodes)).first;
    return kernel_normalization(h, nodes) * std::pow(s, -a) * detail::inner_integral(t, s, a, it->second);
}

/// Cell-averaged kernel on the unit grid: entry (i, j), 0 <= j < i < n, is
/// int_j^{j+1} K_H(i, x) dx. On a grid of step dt the cell average of
/// K_H(t_i, .) over cell j equals dt^(H-1/2) times this entry, by the
/// self-similarity K_H(ct, cs) = c^(H-1/2) K_H(t, s).
class KernelMatrix {
public:
    KernelMatrix(HurstParameter h, std::size_t n, int nodes = kDefaultKernelNodes)
        : h_(h), n_(n), nodes_(nodes) {
        h.require_kernel();
        if (n < 2) throw DomainError("KernelMatrix: need at least two grid points");
        data_.assign(n * (n - 1) / 2, 0.0);
        build();
    }

    /// Shared matrix with at least `n` points; rows do not depend on n, so a
    /// larger cached matrix serves smaller grids.
    static std::shared_ptr<const KernelMatrix> shared(HurstParameter h, std::size_t n, int nodes = kDefaultKernelNodes) {
        static std::mutex mutex;
        static std::map<std::pair<double, int>, std::shared_ptr<const KernelMatrix>> cache;
        const std::lock_guard lock(mutex);
        auto& slot = cache[{h.value(), nodes}];
        if (!slot || slot->size() < n) slot = std::make_shared<const KernelMatrix>(h, n, nodes);
        return slot;
    }

    std::size_t size() const { return n_; }
    HurstParameter hurst() const { return h_; }

    /// Entries (i, 0..i-1).
    std::span<const double> row(std::size_t i) const { return {data_.data() + offset(i), i}; }
    double at(std::size_t i, std::size_t j) const { return data_[offset(i) + j]; }

    /// sum_j M(i,j) dW_j over the first i cells.
    double apply_row(std::size_t i, std::span<const double> dw) const {
        const auto r = row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) acc += r[j] * dw[j];
        return acc;
    }

private:
    static std::size_t offset(std::size_t i) { return i * (i - 1) / 2; }
    double& ref(std::size_t i, std::size_t j) { return data_[offset(i) + j]; }

    static constexpr std::size_t kNear = 3;  // entries with i - j <= kNear are integrated directly
    static constexpr int kOuter = 6;         // outer nodes per cell in the far field
    static constexpr int kStep = 4;          // nodes per unit step of the cumulative inner integral
    static constexpr int kNearOuter = 32;

    void build() {
        const double a = h_.value() - 0.5;
        const double c = kernel_normalization(h_, nodes_);
        const QuadratureRule inner = detail::unit_rule(nodes_);
        const QuadratureRule near_outer = detail::unit_rule(kNearOuter);
        const QuadratureRule outer = detail::unit_rule(kOuter);
        const QuadratureRule step = detail::unit_rule(kStep);

        // Column 0: x^(-a) singularity at the origin, so the left half of the
        // cell uses the graded rule.
        const QuadratureRule graded = detail::graded_left_rule(a, 40, detail::unit_rule(16));
        {
            std::vector<double> xs = graded.nodes, ws = graded.weights;
            for (std::size_t k = 0; k < near_outer.nodes.size(); ++k) {
                xs.push_back(0.5 + 0.5 * near_outer.nodes[k]);
                ws.push_back(near_outer.weights[k] * 0.5);
            }
            integrate_column(0, xs, ws, c, a, inner, step);
        }

        // Row 1 of column 0 also has the (1-x)^a endpoint; redo its right half.
        {
            double acc = 0.0;
            for (std::size_t k = 0; k < graded.nodes.size(); ++k) {
                const double x = graded.nodes[k];
                acc += graded.weights[k] * std::pow(x, -a) * detail::inner_integral(1.0, x, a, inner);
            }
            for (std::size_t k = 0; k < near_outer.nodes.size(); ++k) {
                const double w = near_outer.nodes[k];
                const double xr = 1.0 - 0.5 * w * w * w * w;
                acc += near_outer.weights[k] * 2.0 * w * w * w * std::pow(xr, -a) *
                       detail::inner_integral(1.0, xr, a, inner);
            }
            ref(1, 0) = c * acc;
        }

        // Step tables: lag_table[d][q][r] = (d + f_r - e_q)^(a-1) * w_r,
        // pos_table[t][r] = (t + f_r)^a.
        std::vector<double> lag_table(n_ * kOuter * kStep, 0.0), pos_table(n_ * kStep);
        for (std::size_t t = 0; t < n_; ++t)
            for (int r = 0; r < kStep; ++r) pos_table[t * kStep + r] = std::pow(t + step.nodes[r], a);
        for (std::size_t d = kNear; d < n_; ++d)
            for (int q = 0; q < kOuter; ++q)
                for (int r = 0; r < kStep; ++r)
                    lag_table[(d * kOuter + q) * kStep + r] =
                        step.weights[r] * std::pow(d + step.nodes[r] - outer.nodes[q], a - 1.0);

        // Columns j >= 1.
        std::vector<double> xs(kOuter), ws(kOuter);
        for (std::size_t j = 1; j + 1 < n_; ++j) {
            for (std::size_t d = 1; d <= kNear && j + d < n_; ++d)
                ref(j + d, j) = near_cell(j + d, j, c, a, inner, near_outer);
            if (j + kNear + 1 >= n_) continue;
            for (int q = 0; q < kOuter; ++q) {
                xs[q] = static_cast<double>(j) + outer.nodes[q];
                ws[q] = outer.weights[q];
            }
            integrate_far(j, xs, ws, c, a, inner, lag_table, pos_table);
        }
    }

    // Cell j against row i for j >= 1, i - j <= kNear.
    double near_cell(std::size_t i, std::size_t j, double c, double a, const QuadratureRule& inner,
                     const QuadratureRule& rule) const {
        const double t = static_cast<double>(i);
        double acc = 0.0;
        if (i == j + 1) {
            // x = t - w^4 removes the (t-x)^a endpoint behaviour.
            for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
                const double w = rule.nodes[k];
                const double x = t - w * w * w * w;
                acc += rule.weights[k] * 4.0 * w * w * w * std::pow(x, -a) * detail::inner_integral(t, x, a, inner);
            }
        } else {
            for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
                const double x = static_cast<double>(j) + rule.nodes[k];
                acc += rule.weights[k] * std::pow(x, -a) * detail::inner_integral(t, x, a, inner);
            }
        }
        return c * acc;
    }

    // Far field of column j >= 1: rows i >= j + kNear + 1, with I(t, x)
    // accumulated one unit step at a time from t = j + kNear. With x = j + e_q
    // and u = t + f_r the step integrand factors into tables indexed by
    // t - j and t, so no powers are evaluated here.
    void integrate_far(std::size_t j, const std::vector<double>& xs, const std::vector<double>& ws, double c,
                       double a, const QuadratureRule& inner, const std::vector<double>& lag_table,
                       const std::vector<double>& pos_table) {
        for (std::size_t q = 0; q < xs.size(); ++q) {
            const double x = xs[q];
            const double factor = c * ws[q] * std::pow(x, -a);
            double integral = detail::inner_integral(static_cast<double>(j + kNear), x, a, inner);
            for (std::size_t t = j + kNear; t + 1 < n_; ++t) {
                const double* lag = &lag_table[((t - j) * kOuter + q) * kStep];
                const double* pos = &pos_table[t * kStep];
                double inc = 0.0;
                for (int r = 0; r < kStep; ++r) inc += lag[r] * pos[r];
                integral += inc;
                ref(t + 1, j) += factor * integral;
            }
        }
    }

    void integrate_column(std::size_t j, const std::vector<double>& xs, const std::vector<double>& ws, double c,
                          double a, const QuadratureRule& inner, const QuadratureRule& step) {
        for (std::size_t q = 0; q < xs.size(); ++q) {
            const double x = xs[q];
            const double factor = c * ws[q] * std::pow(x, -a);
            double integral = 0.0;
            for (std::size_t t = j + 1; t < n_; ++t) {
                integral = (t <= j + kNear + 1)
                               ? detail::inner_integral(static_cast<double>(t), x, a, inner)
                               : integral + detail::inner_increment(static_cast<double>(t - 1),
                                                                    static_cast<double>(t), x, a, step);
                ref(t, j) += factor * integral;
            }
        }
    }

    HurstParameter h_;
    std::size_t n_;
    int nodes_;
    std::vector<double> data_;
};

/// The cell-averaged sum only sees the grid increments of W. What it misses,
/// R_i = B_H(t_i) - dt^(H-1/2) sum_j M(i,j) dW_j, comes from the path of W
/// inside the cells and is therefore independent of every grid increment.
/// R is Gaussian with covariance Cov_fBm - M M^T (unit grid, scale dt^H);
/// this class holds its lower Cholesky factor. Adding L z with z independent
/// standard normals restores the exact joint law of (dW, B_H) on the grid.
class KernelResidual {
public:
    KernelResidual(const KernelMatrix& kernel, std::size_t n) : n_(n) {
        if (n < 2 || n > kernel.size()) throw DomainError("KernelResidual: grid size outside the kernel matrix");
        const std::size_t dim = n - 1;
        const HurstParameter h = kernel.hurst();
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
        Eigen::MatrixXd c(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
        for (std::size_t i = 1; i < n; ++i) {
            const auto r = kernel.row(i);
            for (std::size_t j = 0; j < i; ++j) m(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j)) = r[j];
            for (std::size_t k = 1; k <= i; ++k)
                c(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(k - 1)) =
                    fbm_covariance(static_cast<double>(i), static_cast<double>(k), h);
        }
        c.selfadjointView<Eigen::Lower>().rankUpdate(m, -1.0);
        m.resize(0, 0);
        Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(c);
        if (llt.info() != Eigen::Success) {
            // Rounding can leave tiny negative eigenvalues; clip them.
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
            const Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0);
            c = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
            c.diagonal().array() += 1e-12 * c.diagonal().maxCoeff();
            llt.compute(c);
            if (llt.info() != Eigen::Success) throw DataError("KernelResidual: residual covariance is not positive");
        }
        const Eigen::MatrixXd l = llt.matrixL();
        data_.resize(dim * (dim + 1) / 2);
        for (std::size_t i = 1; i < n; ++i)
            for (std::size_t k = 0; k < i; ++k)
                data_[offset(i) + k] = l(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(k));
    }

    /// Factor for at least `n` points; leading blocks of a larger factor are
    /// the factors of the smaller grids.
    static std::shared_ptr<const KernelResidual> shared(HurstParameter h, std::size_t n,
                                                        int nodes = kDefaultKernelNodes) {
        static std::mutex mutex;
        static std::map<std::pair<double, int>, std::shared_ptr<const KernelResidual>> cache;
        const auto kernel = KernelMatrix::shared(h, n, nodes);
        const std::lock_guard lock(mutex);
        auto& slot = cache[{h.value(), nodes}];
        if (!slot || slot->size() < n) slot = std::make_shared<const KernelResidual>(*kernel, n);
        return slot;
    }

    std::size_t size() const { return n_; }

    /// Residual at point i (unit grid) from normals z[0..i-1].
    double apply_row(std::size_t i, std::span<const double> z) const {
        const double* r = data_.data() + offset(i);
        double acc = 0.0;
        for (std::size_t k = 0; k < i; ++k) acc += r[k] * z[k];
        return acc;
    }

    /// Residual variance at point i, the part of i^(2H) the cell averages miss.
    double variance(std::size_t i) const {
        const double* r = data_.data() + offset(i);
        double acc = 0.0;
        for (std::size_t k = 0; k < i; ++k) acc += r[k] * r[k];
        return acc;
    }

private:
    static std::size_t offset(std::size_t i) { return i * (i - 1) / 2; }

    std::size_t n_;
    std::vector<double> data_;
};

/// B_H(t_i) ~ dt^(H-1/2) sum_{j<i} M(i,j) dW_j, the cell-averaged discretisation
/// of the kernel integral driven by the increments of `bm_path`. This is the
/// conditional mean of B_H given the grid increments; its variance falls short
/// of t^(2H) by KernelResidual::variance. The returned path keeps the
/// increments as its driver.
inline FbmPath sample_fbm_from_bm(const SampledPath& bm_path, HurstParameter h) {
    h.require_kernel();
    bm_path.validate();
    const std::size_t n = bm_path.grid.n_points;
    auto dw = std::make_shared<std::vector<double>>(n - 1);
    for (std::size_t j = 0; j + 1 < n; ++j) (*dw)[j] = bm_path.values[j + 1] - bm_path.values[j];
    const auto kernel = KernelMatrix::shared(h, n);
    const double scale = std::pow(bm_path.grid.dt, h.value() - 0.5);
    FbmPath out{bm_path.grid, std::vector<double>(n, 0.0), h, dw};
    for (std::size_t i = 1; i < n; ++i) out.values[i] = scale * kernel->apply_row(i, *dw);
    return out;
}

/// As above plus the within-cell residual drawn from `within_cell` (lane 2),
/// which makes the law of the path exactly fBm on the grid while keeping
/// the same driver.
inline FbmPath sample_fbm_from_bm(const SampledPath& bm_path, HurstParameter h, const RngStream& within_cell) {
    FbmPath out = sample_fbm_from_bm(bm_path, h);
    const std::size_t n = bm_path.grid.n_points;
    const auto resid = KernelResidual::shared(h, n);
    std::vector<double> z(n - 1);
    auto eng = within_cell.engine(2);
    fill_normal(eng, z);
    const double scale = std::pow(bm_path.grid.dt, h.value());
    for (std::size_t i = 1; i < n; ++i) out.values[i] += scale * resid->apply_row(i, z);
    return out;
}

}  // namespace fracvol
