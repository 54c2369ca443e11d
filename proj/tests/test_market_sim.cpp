#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "fracvol/market_sim.hpp"
#include "fracvol/numerics.hpp"

using namespace fracvol;

namespace {

MarketParams params_with_log_variance(double v, double delta = 0.1, double h = 0.85) {
    MarketParams p;
    p.vol = VolParams{0.2, k_for_log_variance(v, delta, HurstParameter(h)), delta, HurstParameter(h)};
    p.mu = 0.1;
    p.r = 0.03;
    p.s0 = 100.0;
    return p;
}

struct WorkerOverride {
    explicit WorkerOverride(const char* n) { setenv(kWorkersEnv, n, 1); }
    ~WorkerOverride() { unsetenv(kWorkersEnv); }
};

}  // namespace

TEST(SimulateEnsemble, DriftlessGbmIsMartingale) {
    auto p = params_with_log_variance(0.0);
    p.r = 0.0;
    const TimeGrid grid{0.0, 0.1, 11};
    const auto ens = simulate_ensemble(ModelVariant::independent, Measure::Q, p, grid, 20000, {1, 0});
    std::vector<double> st;
    for (const auto& path : ens.paths) st.push_back(path.s_T);
    const auto est = mean_estimate(st);
    EXPECT_LT(std::abs(est.mean - p.s0), 3 * est.stderr);
}

TEST(SimulateEnsemble, GbmTerminalLogPriceMoments) {
    const auto p = params_with_log_variance(0.0);
    const TimeGrid grid{0.0, 0.1, 11};
    const auto ens = simulate_ensemble(ModelVariant::independent, Measure::P, p, grid, 20000, {2, 0});
    std::vector<double> x, x2, x4;
    const double T = 1.0, var = 0.04 * T, mean = (p.mu - 0.02) * T;
    for (const auto& path : ens.paths) {
        const double d = std::log(path.s_T / p.s0) - mean;
        x.push_back(d);
        x2.push_back(d * d);
        x4.push_back(d * d * d * d);
    }
    const auto m1 = mean_estimate(x), m2 = mean_estimate(x2), m4 = mean_estimate(x4);
    EXPECT_NEAR(m1.mean, 0.0, 4 * m1.stderr);
    EXPECT_NEAR(m2.mean, var, 4 * m2.stderr);
    EXPECT_NEAR(m4.mean, 3 * var * var, 4 * m4.stderr);  // Gaussian fourth moment
}

TEST(SimulateEnsemble, IdentifiedCouplingSignsTheReturnVolatilityCorrelation) {
    for (double coupling : {1.0, -1.0}) {
        auto p = params_with_log_variance(0.25);
        p.coupling = coupling;
        const TimeGrid grid{0.0, 0.1, 41};
        SimulationOptions opt;
        opt.record_increments = true;
        const auto ens = simulate_ensemble(ModelVariant::identified, Measure::P, p, grid, 2000, {3, 0}, opt);
        std::vector<double> prod;
        for (const auto& path : ens.paths)
            for (std::size_t i = 0; i + 1 < path.dB.size(); ++i)
                prod.push_back(path.dB[i] * (std::log(path.sigma[i + 1]) - std::log(path.sigma[i])));
        const auto est = mean_estimate(prod);
        EXPECT_GT(coupling * est.mean, 5 * est.stderr) << "coupling=" << coupling;
    }
}

TEST(SimulateEnsemble, IndependentVariantHasNoReturnVolatilityCorrelation) {
    const auto p = params_with_log_variance(0.25);
    SimulationOptions opt;
    opt.record_increments = true;
    const auto ens =
        simulate_ensemble(ModelVariant::independent, Measure::P, p, TimeGrid{0.0, 0.1, 41}, 2000, {3, 0}, opt);
    std::vector<double> prod;
    for (const auto& path : ens.paths)
        for (std::size_t i = 0; i + 1 < path.dB.size(); ++i)
            prod.push_back(path.dB[i] * (std::log(path.sigma[i + 1]) - std::log(path.sigma[i])));
    const auto est = mean_estimate(prod);
    EXPECT_LT(std::abs(est.mean), 4 * est.stderr);
}

TEST(SimulateEnsemble, VariantsCoincideWhenKIsZero) {
    const auto p = params_with_log_variance(0.0);
    const TimeGrid grid{0.0, 0.1, 21};
    const auto a = simulate_ensemble(ModelVariant::independent, Measure::P, p, grid, 50, {4, 0});
    const auto b = simulate_ensemble(ModelVariant::identified, Measure::P, p, grid, 50, {4, 0});
    for (std::size_t i = 0; i < 50; ++i) {
        EXPECT_EQ(a.paths[i].S, b.paths[i].S);
        for (double s : a.paths[i].sigma) EXPECT_DOUBLE_EQ(s, 0.2);
    }
}

TEST(SimulateEnsemble, PositiveForCoarseStepsAndLargeVolatility) {
    auto p = params_with_log_variance(1.0, 0.5);
    p.vol.theta = 1.0;
    const auto ens = simulate_ensemble(ModelVariant::identified, Measure::P, p, TimeGrid{0.0, 0.5, 21}, 200, {5, 0});
    for (const auto& path : ens.paths)
        for (double s : path.S) ASSERT_GT(s, 0.0);
}

TEST(SimulateEnsemble, DeterministicAndWorkerCountIndependent) {
    const auto p = params_with_log_variance(0.25);
    const TimeGrid grid{0.0, 0.05, 41};
    Ensemble one, many;
    {
        WorkerOverride w("1");
        one = simulate_ensemble(ModelVariant::identified, Measure::Q, p, grid, 64, {6, 0});
    }
    {
        WorkerOverride w("4");
        many = simulate_ensemble(ModelVariant::identified, Measure::Q, p, grid, 64, {6, 0});
    }
    for (std::size_t i = 0; i < 64; ++i) {
        EXPECT_EQ(one.paths[i].S, many.paths[i].S);
        EXPECT_EQ(one.paths[i].sigma, many.paths[i].sigma);
        EXPECT_EQ(one.paths[i].log_eta, many.paths[i].log_eta);
    }
}

TEST(SimulateEnsemble, ChunkedRunEqualsSingleRun) {
    const auto p = params_with_log_variance(0.25);
    const TimeGrid grid{0.0, 0.1, 11};
    const auto whole = simulate_ensemble(ModelVariant::independent, Measure::P, p, grid, 30, {7, 0});
    SimulationOptions opt;
    opt.first_path = 10;
    const auto tail = simulate_ensemble(ModelVariant::independent, Measure::P, p, grid, 20, {7, 0}, opt);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(whole.paths[10 + i].S, tail.paths[i].S);
}

TEST(SimulateEnsemble, AntitheticPairsNegateDrivers) {
    const auto p = params_with_log_variance(0.25);
    SimulationOptions opt;
    opt.antithetic = true;
    opt.record_increments = true;
    const auto ens = simulate_ensemble(ModelVariant::independent, Measure::P, p, TimeGrid{0.0, 0.1, 11}, 4, {8, 0}, opt);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_DOUBLE_EQ(ens.paths[0].dB[i], -ens.paths[1].dB[i]);
        EXPECT_DOUBLE_EQ(ens.paths[0].dW[i], -ens.paths[1].dW[i]);
    }
    EXPECT_NE(ens.paths[0].dB[0], ens.paths[2].dB[0]);
}

TEST(SimulateEnsemble, QMartingaleAtEveryGridTime) {
    const auto p = params_with_log_variance(0.25);
    const TimeGrid grid{0.0, 0.1, 11};
    for (auto variant : {ModelVariant::independent, ModelVariant::identified}) {
        const auto ens = simulate_ensemble(variant, Measure::Q, p, grid, 20000, {9, 0});
        for (std::size_t i = 1; i < grid.n_points; ++i) {
            std::vector<double> z;
            for (const auto& path : ens.paths) z.push_back(path.S[i] * std::exp(-p.r * grid.time(i)));
            const auto est = mean_estimate(z);
            EXPECT_LT(std::abs(est.mean - p.s0), 4 * est.stderr) << "i=" << i;
        }
    }
}

TEST(SimulateEnsemble, ExactSamplerDriverMatchesKernelInDistribution) {
    const auto p = params_with_log_variance(0.25, 0.1);
    const TimeGrid grid{0.0, 0.1, 6};
    SimulationOptions circ;
    circ.vol_driver = VolDriver::circulant;
    const auto a = simulate_ensemble(ModelVariant::independent, Measure::P, p, grid, 20000, {10, 0}, circ);
    std::vector<double> s;
    for (const auto& path : a.paths) s.push_back(path.sigma[3]);
    const auto est = mean_estimate(s);
    EXPECT_NEAR(est.mean, 0.2, 4 * est.stderr);
    EXPECT_FALSE(a.paths[0].has_w);
}

TEST(SimulateEnsemble, Errors) {
    auto p = params_with_log_variance(0.25);
    const TimeGrid grid{0.0, 0.1, 11};
    EXPECT_THROW(simulate_ensemble(ModelVariant::independent, Measure::P, p, grid, 0, {1, 0}), DomainError);
    EXPECT_THROW(simulate_ensemble(ModelVariant::independent, Measure::P, p, TimeGrid{0.0, 0.03, 11}, 1, {1, 0}),
                 DomainError);
    SimulationOptions circ;
    circ.vol_driver = VolDriver::circulant;
    EXPECT_THROW(simulate_ensemble(ModelVariant::identified, Measure::P, p, grid, 1, {1, 0}, circ), DomainError);
    auto low = p;
    low.vol.h = HurstParameter(0.4);
    EXPECT_THROW(simulate_ensemble(ModelVariant::identified, Measure::P, low, grid, 1, {1, 0}), DomainError);
    EXPECT_NO_THROW(simulate_ensemble(ModelVariant::independent, Measure::P, low, grid, 1, {1, 0}, circ));
    auto bad = p;
    bad.s0 = 0.0;
    EXPECT_THROW(simulate_ensemble(ModelVariant::independent, Measure::P, bad, grid, 1, {1, 0}), DomainError);
    bad = p;
    bad.drift_path = {0.1, 0.1};
    EXPECT_THROW(simulate_ensemble(ModelVariant::independent, Measure::P, bad, grid, 1, {1, 0}), DomainError);
}

TEST(DiscountedPath, Examples) {
    const TimeGrid grid{0.0, 0.5, 3};
    const std::vector<double> s{100.0, 100.0, 100.0};
    EXPECT_EQ(discounted_path(s, grid, 0.0), s);
    const auto z = discounted_path(s, grid, 0.1);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(z[i], 100.0 * std::exp(-0.1 * 0.5 * i));
}

TEST(LogReturns, Examples) {
    const std::vector<double> flat(10, 5.0);
    for (double r : log_returns(flat, 1)) EXPECT_EQ(r, 0.0);
    const std::vector<double> s{1.0, 2.0, 3.5, 3.0, 4.0};
    const auto r1 = log_returns(s, 1), r2 = log_returns(s, 2);
    for (std::size_t i = 0; i < r2.size(); ++i) EXPECT_NEAR(r2[i], r1[i] + r1[i + 1], 1e-15);
    EXPECT_THROW(log_returns(s, 0), DomainError);
    EXPECT_THROW(log_returns(s, 5), DomainError);
}

TEST(LogReturns, GbmMean) {
    const auto p = params_with_log_variance(0.0);
    const TimeGrid grid{0.0, 0.1, 21};
    const auto ens = simulate_ensemble(ModelVariant::independent, Measure::P, p, grid, 5000, {11, 0});
    std::vector<double> r;
    for (const auto& path : ens.paths) r.push_back(log_returns(path.S, 3)[5]);
    const auto est = mean_estimate(r);
    EXPECT_NEAR(est.mean, (p.mu - 0.02) * 3 * 0.1, 4 * est.stderr);
}
