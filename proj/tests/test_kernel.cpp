#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <vector>

#include "fracvol/kernel.hpp"
#include "fracvol/numerics.hpp"

using namespace fracvol;

namespace {

// Closed-form normalisation: C_H^2 = H (2H - 1) / B(2 - 2H, H - 1/2).
double closed_form_constant(double h) { return std::sqrt(h * (2 * h - 1) / std::beta(2 - 2 * h, h - 0.5)); }

// Kernel by adaptive tanh-sinh quadrature on the raw (singular) integrand.
double oracle_kernel(double t, double s, double h) {
    boost::math::quadrature::tanh_sinh<double> ts;
    const double a = h - 0.5;
    // The two-argument form supplies the signed distance to the nearest
    // endpoint (negative on the left half), so u - s stays accurate next to
    // the singularity.
    const auto f = [&](double u, double uc) {
        const double us = uc < 0 ? -uc : u - s;
        return std::pow(us, a - 1) * std::pow(u, a);
    };
    return closed_form_constant(h) * std::pow(s, -a) * ts.integrate(f, s, t);
}

// Cell average int_j^{j+1} K(i, x) dx by nested quadrature.
double oracle_cell(std::size_t i, std::size_t j, double h) {
    boost::math::quadrature::tanh_sinh<double> ts(8);
    return ts.integrate([&](double x) { return oracle_kernel(double(i), x, h); }, double(j), double(j + 1));
}

}  // namespace

TEST(KernelNormalization, MatchesClosedForm) {
    for (double h : {0.55, 0.6, 0.7, 0.75, 0.85, 0.95}) {
        const double c = kernel_normalization(HurstParameter(h));
        EXPECT_NEAR(c / closed_form_constant(h), 1.0, 1e-8) << "h=" << h;
    }
}

TEST(KernelValue, MatchesIndependentQuadrature) {
    for (double h : {0.6, 0.85}) {
        for (auto [t, s] : {std::pair{1.0, 0.5}, {1.0, 0.01}, {1.0, 0.999}, {3.0, 1.0}, {0.2, 0.1}}) {
            const double got = kernel_value(t, s, HurstParameter(h));
            EXPECT_NEAR(got / oracle_kernel(t, s, h), 1.0, 1e-7) << "h=" << h << " t=" << t << " s=" << s;
        }
    }
}

TEST(KernelValue, ScalingLaw) {
    const HurstParameter h(0.8);
    const double c = 2.7;
    EXPECT_NEAR(kernel_value(c * 1.3, c * 0.4, h), std::pow(c, 0.3) * kernel_value(1.3, 0.4, h), 1e-10);
}

TEST(KernelValue, SquareIntegralIsVariance) {
    // int_0^t K(t,s)^2 ds = t^2H, checked with an independent quadrature rule.
    boost::math::quadrature::tanh_sinh<double> ts(8);
    for (double h : {0.65, 0.85}) {
        const double t = 1.7;
        const double v = ts.integrate([&](double s) {
            const double k = kernel_value(t, s, HurstParameter(h));
            return k * k;
        }, 0.0, t);
        EXPECT_NEAR(v / std::pow(t, 2 * h), 1.0, 1e-6) << "h=" << h;
    }
}

TEST(KernelValue, DomainErrors) {
    EXPECT_THROW(kernel_value(1.0, 1.0, HurstParameter(0.7)), DomainError);
    EXPECT_THROW(kernel_value(1.0, 0.0, HurstParameter(0.7)), DomainError);
    EXPECT_THROW(kernel_value(1.0, 0.5, HurstParameter(0.4)), DomainError);
    EXPECT_THROW(KernelMatrix(HurstParameter(0.5), 4), DomainError);
}

TEST(KernelMatrix, CellAveragesMatchNestedQuadrature) {
    for (double h : {0.6, 0.85}) {
        const KernelMatrix m(HurstParameter(h), 64);
        for (auto [i, j] : {std::pair<std::size_t, std::size_t>{1, 0}, {2, 0}, {2, 1}, {5, 0}, {5, 4}, {10, 3},
                            {10, 9}, {40, 0}, {63, 20}, {63, 58}, {63, 62}}) {
            EXPECT_NEAR(m.at(i, j) / oracle_cell(i, j, h), 1.0, 2e-6) << "h=" << h << " i=" << i << " j=" << j;
        }
    }
}

TEST(KernelMatrix, RowSumsMatchClosedForm) {
    // sum_j M(i,j) = int_0^i K(i,x) dx = C_H B(1-a, a) i^(a+1) / (a+1).
    for (double h : {0.6, 0.85}) {
        const double a = h - 0.5;
        const KernelMatrix m(HurstParameter(h), 300);
        for (std::size_t i = 1; i < 300; ++i) {
            double sum = 0.0;
            for (double x : m.row(i)) sum += x;
            const double target = closed_form_constant(h) * std::beta(1 - a, a) * std::pow(double(i), a + 1) / (a + 1);
            ASSERT_NEAR(sum / target, 1.0, 1e-6) << "h=" << h << " i=" << i;
        }
    }
}

TEST(KernelMatrix, RowEnergyBelowVariance) {
    // Cell averaging can only lose L2 mass: sum_j M(i,j)^2 <= i^2H.
    const HurstParameter h(0.85);
    const KernelMatrix m(h, 200);
    for (std::size_t i : {1, 2, 10, 100, 199}) {
        double e = 0.0;
        for (double x : m.row(i)) e += x * x;
        EXPECT_LE(e, std::pow(double(i), 2 * h.value()) * (1 + 1e-9)) << "i=" << i;
    }
}

TEST(KernelMatrix, SharedCacheReturnsConsistentEntries) {
    const HurstParameter h(0.72);
    const auto big = KernelMatrix::shared(h, 50);
    const auto small = KernelMatrix::shared(h, 20);
    ASSERT_GE(small->size(), 20u);
    for (std::size_t i = 1; i < 20; ++i)
        for (std::size_t j = 0; j < i; ++j) EXPECT_DOUBLE_EQ(small->at(i, j), big->at(i, j));
}

TEST(SampleFbmFromBm, EnsembleVarianceAndDriver) {
    const HurstParameter h(0.8);
    const TimeGrid grid{0.0, 0.25, 33};
    const KernelMatrix m(h, 33);
    std::vector<double> end_sq, cross;
    for (std::size_t p = 0; p < 4000; ++p) {
        const auto bm = brownian_path(grid, {12, p});
        const auto f = sample_fbm_from_bm(bm, h);
        ASSERT_TRUE(f.driver);
        ASSERT_EQ(f.driver->size(), 32u);
        EXPECT_DOUBLE_EQ((*f.driver)[3], bm.values[4] - bm.values[3]);
        end_sq.push_back(f.values.back() * f.values.back());
        cross.push_back(f.values.back() * bm.values.back());
    }
    // Target is the discretised variance dt^2a sum M^2, which is exact for this scheme.
    double e = 0.0, c = 0.0;
    for (double x : m.row(32)) {
        e += x * x;
        c += x;
    }
    const double scale = std::pow(grid.dt, 0.3);
    const auto v = mean_estimate(end_sq);
    EXPECT_NEAR(v.mean, scale * scale * e * grid.dt, 4 * v.stderr);
    // E[B_H(T) W(T)] = int_0^T K(T,s) ds, discretised as dt^(a+1) sum M.
    const auto x = mean_estimate(cross);
    EXPECT_NEAR(x.mean, scale * c * grid.dt, 4 * x.stderr);
}

TEST(KernelResidual, ClosesTheVarianceGap) {
    const HurstParameter h(0.85);
    const auto m = KernelMatrix::shared(h, 300);
    const auto r = KernelResidual::shared(h, 300);
    for (std::size_t i : {1, 2, 7, 64, 299}) {
        double e = 0.0;
        for (double x : m->row(i)) e += x * x;
        EXPECT_GT(r->variance(i), 0.0);
        EXPECT_NEAR((e + r->variance(i)) / std::pow(double(i), 1.7), 1.0, 1e-10) << "i=" << i;
    }
}

TEST(SampleFbmFromBm, WithinCellResidualGivesExactVariance) {
    // dt = 1/8 puts t = 0.5, 1, 2 at points 4, 8, 16, where the plain cell
    // average is 8 to 12 percent short.
    const HurstParameter h(0.85);
    const TimeGrid grid{0.0, 0.125, 17};
    std::vector<std::vector<double>> sq(3), cross(3);
    const std::size_t idx[3] = {4, 8, 16};
    for (std::size_t p = 0; p < 20000; ++p) {
        const auto bm = brownian_path(grid, {13, p});
        const auto f = sample_fbm_from_bm(bm, h, RngStream{13, p});
        for (int k = 0; k < 3; ++k) {
            sq[k].push_back(f.values[idx[k]] * f.values[idx[k]]);
            cross[k].push_back(f.values[idx[k]] * bm.values[idx[k]]);
        }
    }
    const double a = 0.35;
    for (int k = 0; k < 3; ++k) {
        const double t = grid.time(idx[k]);
        const auto v = mean_estimate(sq[k]);
        EXPECT_NEAR(v.mean, std::pow(t, 1.7), 3 * v.stderr) << "t=" << t;
        // The residual is independent of W, so E[B_H(t) W(t)] keeps the exact
        // value int_0^t K(t,s) ds.
        const double target = closed_form_constant(0.85) * std::beta(1 - a, a) * std::pow(t, a + 1) / (a + 1);
        const auto x = mean_estimate(cross[k]);
        EXPECT_NEAR(x.mean, target, 3 * x.stderr) << "t=" << t;
    }
}
