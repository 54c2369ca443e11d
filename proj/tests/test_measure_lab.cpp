#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fracvol/measure_lab.hpp"

using namespace fracvol;

namespace {

MarketParams default_params(double log_variance) {
    MarketParams p;
    const double delta = 0.1;
    p.vol = VolParams{0.2, k_for_log_variance(log_variance, delta, HurstParameter(0.85)), delta, HurstParameter(0.85)};
    return p;
}

const TimeGrid kGrid{0.0, 0.1, 11};

}  // namespace

TEST(MarketPriceOfRisk, Examples) {
    auto p = default_params(0.25);
    const VolPath vol{kGrid, std::vector<double>{0.1, 0.2, 0.4}};
    const auto g = market_price_of_risk(p, vol);
    EXPECT_DOUBLE_EQ(g[0], (0.03 - 0.1) / 0.1);
    EXPECT_DOUBLE_EQ(g[2], (0.03 - 0.1) / 0.4);
    p.mu = p.r;
    for (double x : market_price_of_risk(p, vol)) EXPECT_EQ(x, 0.0);
    const VolPath bad{kGrid, std::vector<double>{0.1, 0.0}};
    EXPECT_THROW(market_price_of_risk(p, bad), DomainError);
}

TEST(StochasticExponential, Examples) {
    const std::vector<double> zero(5, 0.0), db{0.1, -0.2, 0.05, 0.0, 0.3};
    EXPECT_EQ(stochastic_exponential(zero, db, 0.01), 1.0);
    const std::vector<double> g{1.0, 2.0, 0.5, 1.0, -1.0};
    const double expected = std::exp(0.1 - 0.4 + 0.025 + 0.0 - 0.3 - 0.5 * 0.01 * (1 + 4 + 0.25 + 1 + 1));
    EXPECT_NEAR(stochastic_exponential(g, db, 0.01), expected, 1e-14);
    EXPECT_THROW(stochastic_exponential(g, std::vector<double>(4, 0.0), 0.01), DomainError);
}

TEST(StochasticExponential, AgreesWithEnsembleSummary) {
    SimulationOptions opt;
    opt.record_increments = true;
    const auto p = default_params(0.25);
    const auto ens = simulate_ensemble(ModelVariant::independent, Measure::P, p, kGrid, 5, {1, 0}, opt);
    for (const auto& path : ens.paths) {
        const VolPath vol{kGrid, std::vector<double>(path.sigma.begin(), path.sigma.end() - 1)};
        const auto g = market_price_of_risk(p, vol);
        EXPECT_NEAR(stochastic_exponential(g, path.dB, kGrid.dt), std::exp(path.log_eta), 1e-12);
    }
}

TEST(MeasureWeights, MeanOneAndPositive) {
    const auto p = default_params(0.25);
    for (auto variant : {ModelVariant::independent, ModelVariant::identified}) {
        const auto ens = simulate_ensemble(variant, Measure::P, p, kGrid, 20000, {2, 0});
        const auto w = measure_weights(ens);
        for (double x : w.eta_T) ASSERT_GT(x, 0.0);
        const auto e = mean_estimate(w.eta_T);
        EXPECT_LT(std::abs(e.mean - 1.0), 4 * e.stderr);
        if (variant == ModelVariant::independent) {
            const auto ep = mean_estimate(w.eta_prime_T), es = mean_estimate(w.eta_star_T);
            EXPECT_LT(std::abs(ep.mean - 1.0), 4 * ep.stderr);
            EXPECT_LT(std::abs(es.mean - 1.0), 4 * es.stderr);
            for (double x : w.eta_star_T) ASSERT_GT(x, 0.0);
        } else {
            EXPECT_TRUE(w.eta_star_T.empty());
            EXPECT_THROW(eta_star(ens), DomainError);
        }
    }
}

TEST(MeasureWeights, RequiresPEnsemble) {
    const auto ens = simulate_ensemble(ModelVariant::independent, Measure::Q, default_params(0.25), kGrid, 10, {3, 0});
    EXPECT_THROW(measure_weights(ens), DomainError);
}

TEST(MartingaleTest, DegenerateAndPower) {
    const std::vector<double> ones(200, 1.0), c(200, 5.0);
    EXPECT_THROW(martingale_test(ones, c, 5.0), DataError);
    EXPECT_THROW(martingale_test(std::vector<double>(50, 1.0), std::vector<double>(50, 1.0), 1.0), DomainError);

    auto p = default_params(0.0);
    const auto ens = simulate_ensemble(ModelVariant::independent, Measure::P, p, kGrid, 100000, {4, 0},
                                       SimulationOptions{.record_paths = false});
    const auto w = measure_weights(ens).eta_T;
    const auto z = discounted_terminal(ens);
    const auto ok = martingale_test(w, z, p.s0);
    EXPECT_TRUE(ok.passes());
    EXPECT_NEAR(ok.statistic, (ok.estimate - ok.target) / ok.stderr, 1e-12);
    const auto wrong = martingale_test(w, z, p.s0 * 1.05);
    EXPECT_FALSE(wrong.passes());
}

TEST(IncompletenessDemo, VarianceClaimSeparatesMeasures) {
    const auto p = default_params(0.25);
    const auto ens = simulate_ensemble(ModelVariant::independent, Measure::P, p, kGrid, 20000, {5, 0},
                                       SimulationOptions{.record_paths = false});
    const auto rep = incompleteness_demo(ens, OptionSpec{OptionKind::realized_variance, 1.0, 1.0});
    EXPECT_TRUE(rep.prices_differ());
    EXPECT_TRUE(rep.stock_Q.passes(4.0));
    EXPECT_TRUE(rep.stock_Qstar.passes(4.0));
    // Under Q the volatility law is unchanged, so the variance claim keeps its closed-form price.
    const double closed = std::exp(-p.r) * expected_integrated_variance(p.vol, 1.0);
    EXPECT_NEAR(rep.price_Q.value, closed, 3 * rep.price_Q.stderr);
}

TEST(IncompletenessDemo, ZeroKGivesEqualPrices) {
    const auto ens = simulate_ensemble(ModelVariant::independent, Measure::P, default_params(0.0), kGrid, 5000, {6, 0},
                                       SimulationOptions{.record_paths = false});
    const auto rep = incompleteness_demo(ens, OptionSpec{OptionKind::realized_variance, 1.0, 1.0});
    EXPECT_FALSE(rep.prices_differ());
}

TEST(IncompletenessDemo, Errors) {
    const auto p = default_params(0.25);
    const auto ident = simulate_ensemble(ModelVariant::identified, Measure::P, p, kGrid, 200, {7, 0});
    EXPECT_THROW(incompleteness_demo(ident, OptionSpec{OptionKind::realized_variance, 1.0, 1.0}), DomainError);
    const auto indep = simulate_ensemble(ModelVariant::independent, Measure::P, p, kGrid, 200, {7, 0});
    EXPECT_THROW(incompleteness_demo(indep, OptionSpec{OptionKind::call, 100.0, 2.0}), DomainError);
}

TEST(CompletenessDemo, CanonicalTiltOnly) {
    const auto p = default_params(0.25);
    const auto ens = simulate_ensemble(ModelVariant::identified, Measure::P, p, kGrid, 100000, {8, 0},
                                       SimulationOptions{.record_paths = false});
    const auto rep = completeness_demo(ens, OptionSpec{OptionKind::call, 100.0, 1.0});
    EXPECT_TRUE(rep.canonical.passes());
    ASSERT_EQ(rep.perturbed.size(), 2u);
    for (const auto& t : rep.perturbed) EXPECT_FALSE(t.report.passes()) << "scale=" << t.scale;
    const auto indep = simulate_ensemble(ModelVariant::independent, Measure::P, p, kGrid, 200, {8, 0});
    EXPECT_THROW(completeness_demo(indep, OptionSpec{}), DomainError);
}

TEST(CompletenessDemo, NoTiltWhenMuEqualsR) {
    auto p = default_params(0.25);
    p.mu = p.r;
    const auto ens = simulate_ensemble(ModelVariant::identified, Measure::P, p, kGrid, 2000, {9, 0});
    for (double w : scaled_tilt_weights(ens, 1.0)) EXPECT_EQ(w, 1.0);
    const auto rep = completeness_demo(ens, OptionSpec{});
    const auto z = discounted_terminal(ens);
    EXPECT_DOUBLE_EQ(rep.canonical.estimate, mean_estimate(z).mean);
}

TEST(GirsanovCrossCheck, WeightedPMatchesDirectQ) {
    const auto p = default_params(0.25);
    for (auto variant : {ModelVariant::independent, ModelVariant::identified}) {
        const auto rep = girsanov_cross_check(variant, p, kGrid, OptionSpec{OptionKind::call, 100.0, 1.0}, 20000, {10, 0});
        EXPECT_LT(std::abs(rep.statistic), 4.0) << to_string(variant);
    }
}

TEST(DiscountedMartingaleProfile, ChunkingMatchesAndPasses) {
    const auto p = default_params(0.25);
    const auto a = discounted_martingale_profile(ModelVariant::identified, Measure::Q, p, kGrid, 4000, {11, 0}, {}, 4000);
    const auto b = discounted_martingale_profile(ModelVariant::identified, Measure::Q, p, kGrid, 4000, {11, 0}, {}, 1000);
    ASSERT_EQ(a.size(), 10u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_NEAR(a[i].report.estimate, b[i].report.estimate, 1e-10);
        EXPECT_TRUE(a[i].report.passes(4.0));
    }
}
