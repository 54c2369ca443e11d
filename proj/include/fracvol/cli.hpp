#pragma once

// The four workflows behind the command-line tool. Each writes its files into
// config.out. Exit codes: 0 success, 1 runtime or test failure, 2 usage,
// configuration or input-data error.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fracvol/config.hpp"
#include "fracvol/errors.hpp"
#include "fracvol/io.hpp"
#include "fracvol/market_sim.hpp"
#include "fracvol/measure_lab.hpp"
#include "fracvol/pricing.hpp"
#include "fracvol/stats.hpp"

namespace fracvol {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Bad user-supplied input data (price CSV); maps to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline nlohmann::json manifest(const char* command, const RunConfig& cfg) {
    return {{"toolkit_version", kToolkitVersion}, {"command", command}, {"config", cfg.echo()}};
}

inline nlohmann::json report_entry(const std::string& test, double estimate, double stderr, double statistic,
                                   double target, std::size_t n_paths, std::uint64_t seed, bool pass) {
    return {{"test", test},     {"estimate", estimate}, {"stderr", stderr}, {"statistic", statistic},
            {"target", target}, {"n_paths", n_paths},   {"seed", seed},     {"pass", pass}};
}

inline nlohmann::json report_entry(const std::string& test, const MartingaleReport& r, std::uint64_t seed,
                                   bool pass) {
    return report_entry(test, r.estimate, r.stderr, r.statistic, r.target, r.n_paths, seed, pass);
}

inline std::vector<std::vector<double>> per_path_returns(const Ensemble& ens) {
    std::vector<std::vector<double>> out;
    out.reserve(ens.size());
    for (const auto& p : ens.paths) out.push_back(log_returns(p.S, 1));
    return out;
}

inline std::vector<double> absolute(std::vector<double> x) {
    for (auto& v : x) v = std::abs(v);
    return x;
}

}  // namespace detail

/// Simulates the configured ensemble and writes S.csv, sigma.csv and
/// manifest.json.
inline int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
    const std::filesystem::path dir(cfg.out);
    ensure_directory(dir);
    const auto ens = simulate_ensemble(cfg.variant, cfg.measure, cfg.params, cfg.grid(), cfg.n_paths,
                                       RngStream{cfg.seed, 0}, cfg.simulation_options());
    write_ensemble_csv(dir / "S.csv", ens, &PathRecord::S);
    write_ensemble_csv(dir / "sigma.csv", ens, &PathRecord::sigma);
    auto m = detail::manifest("simulate", cfg);
    m["ensemble"] = ensemble_manifest(ens);
    write_json(dir / "manifest.json", m);
    log << "simulate: " << ens.size() << " paths x " << ens.grid.n_points << " points written to " << dir.string()
        << '\n';
    return kExitOk;
}

/// Stylized-fact statistics and calibration, either on the price CSV named
/// by config.input or on a fresh simulation. Writes leverage.csv, acf.csv,
/// kurtosis.json, calibration.json and manifest.json.
inline int cmd_stats(const RunConfig& cfg, std::ostream& log) {
    const std::filesystem::path dir(cfg.out);
    const int tau_max = static_cast<int>(cfg.tau_max);
    LeverageCurve lev;
    CurveEstimate acf_r, acf_abs;
    nlohmann::json kurt;
    std::vector<double> calib_prices;
    double calib_dt = cfg.dt;
    std::string source;

    if (!cfg.input.empty()) {
        PriceSeries series;
        try {
            series = read_price_csv(cfg.input, cfg.dt);
            const auto r = log_returns(series.prices, 1);
            lev = leverage_correlation(r, tau_max);
            acf_r.mean = acf(r, cfg.acf_lags);
            acf_abs.mean = acf(detail::absolute(r), cfg.acf_lags);
            const auto k = excess_kurtosis_batched(r);
            kurt = {{"excess_kurtosis", excess_kurtosis(r)}, {"batch_mean", k.mean}, {"stderr", k.stderr},
                    {"n_returns", r.size()}};
        } catch (const DataError& e) {
            throw InputError(e.what());
        } catch (const DomainError& e) {
            throw InputError(std::string(cfg.input) + ": " + e.what());
        }
        calib_prices = series.prices;
        calib_dt = series.dt;
        source = cfg.input;
    } else {
        SimulationOptions so = cfg.simulation_options();
        const auto ens = simulate_ensemble(cfg.variant, cfg.measure, cfg.params, cfg.grid(), cfg.n_paths,
                                           RngStream{cfg.seed, 0}, so);
        const auto returns = detail::per_path_returns(ens);
        lev = leverage_ensemble(returns, tau_max);
        std::vector<std::vector<double>> a, b;
        std::vector<double> kurts;
        for (const auto& r : returns) {
            a.push_back(acf(r, cfg.acf_lags));
            b.push_back(acf(detail::absolute(r), cfg.acf_lags));
            kurts.push_back(excess_kurtosis(r));
        }
        acf_r = ensemble_mean(a);
        acf_abs = ensemble_mean(b);
        const auto k = mean_estimate(kurts);
        kurt = {{"excess_kurtosis", k.mean}, {"stderr", k.stderr}, {"n_paths", ens.size()},
                {"n_returns_per_path", returns.front().size()}};
        calib_prices = ens.paths.front().S;
        source = "simulation";
    }

    ensure_directory(dir);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < lev.taus.size(); ++i) rows.push_back({double(lev.taus[i]), lev.values[i], lev.stderrs[i]});
    write_csv(dir / "leverage.csv", {"tau", "L", "stderr"}, rows);

    rows.clear();
    const bool with_se = !acf_r.stderr.empty();
    for (std::size_t l = 0; l < acf_r.mean.size(); ++l) {
        if (with_se)
            rows.push_back({double(l + 1), acf_r.mean[l], acf_r.stderr[l], acf_abs.mean[l], acf_abs.stderr[l]});
        else
            rows.push_back({double(l + 1), acf_r.mean[l], acf_abs.mean[l]});
    }
    write_csv(dir / "acf.csv",
              with_se ? std::vector<std::string>{"lag", "acf_returns", "stderr_returns", "acf_abs_returns",
                                                 "stderr_abs_returns"}
                      : std::vector<std::string>{"lag", "acf_returns", "acf_abs_returns"},
              rows);
    kurt["source"] = source;
    write_json(dir / "kurtosis.json", kurt);

    nlohmann::json cal{{"source", source}, {"dt", calib_dt}, {"delta", cfg.calib_delta()}};
    try {
        const auto c = calibrate(calib_prices, calib_dt, cfg.calib_delta());
        const auto& d = c.diagnostics;
        cal.update({{"status", "ok"},
                    {"h_hat", c.h_hat},
                    {"h_stderr", d.h_stderr},
                    {"k_hat", c.k_hat},
                    {"theta_hat", c.theta_hat},
                    {"beta_hat", c.beta_hat},
                    {"volatility_detected", d.volatility_detected},
                    {"window", d.window},
                    {"n_windows", d.n_windows},
                    {"log_vol_variance", d.log_vol_variance},
                    {"log_vol_variance_raw", d.log_vol_variance_raw},
                    {"proxy_noise_variance", d.proxy_noise_variance},
                    {"smoothing_factor", d.smoothing_factor}});
    } catch (const DataError& e) {
        if (!cfg.input.empty()) throw InputError(e.what());
        throw;
    } catch (const DomainError& e) {
        // Too few observations for the window: keep the other outputs.
        cal["status"] = std::string("skipped: ") + e.what();
        log << "stats: calibration skipped: " << e.what() << '\n';
    }
    write_json(dir / "calibration.json", cal);
    write_json(dir / "manifest.json", detail::manifest("stats", cfg));
    log << "stats: written to " << dir.string() << '\n';
    return kExitOk;
}

/// Calls and puts at every configured strike (price.json, with the flat
/// Black-Scholes value at sigma = theta as reference) and the implied-vol
/// smile from out-of-the-money claims (smile.csv).
inline int cmd_price(const RunConfig& cfg, std::ostream& log) {
    const std::filesystem::path dir(cfg.out);
    const double maturity = cfg.claim_maturity();
    PricingOptions po;
    po.dt = cfg.dt;
    po.vol_driver = cfg.vol_driver;
    po.antithetic = cfg.antithetic;
    po.cell_residual = cfg.cell_residual;
    std::vector<OptionSpec> specs;
    for (double k : cfg.strikes) {
        specs.push_back({OptionKind::call, k, maturity});
        specs.push_back({OptionKind::put, k, maturity});
    }
    const RngStream seed{cfg.seed, 0};
    const auto prices = mc_prices(cfg.variant, cfg.params, specs, cfg.n_paths, seed, po);
    nlohmann::json results = nlohmann::json::array();
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        const double ref = black_scholes(cfg.params.s0, s.strike, cfg.params.r, cfg.params.vol.theta, maturity, s.kind);
        const double stat = prices[i].stderr > 0.0 ? (prices[i].value - ref) / prices[i].stderr : 0.0;
        auto e = detail::report_entry(to_string(s.kind) + " K=" + format_double(s.strike), prices[i].value,
                                      prices[i].stderr, stat, ref, prices[i].n_paths, cfg.seed,
                                      std::abs(stat) < cfg.tolerance);
        e["kind"] = to_string(s.kind);
        e["strike"] = s.strike;
        e["maturity"] = maturity;
        results.push_back(e);
    }
    const auto smile = smile_curve(cfg.variant, cfg.params, cfg.strikes, maturity, cfg.n_paths, seed, po);

    ensure_directory(dir);
    auto doc = detail::manifest("price", cfg);
    doc["reference"] = "black_scholes with sigma = theta";
    doc["results"] = results;
    write_json(dir / "price.json", doc);
    std::vector<std::vector<double>> rows;
    for (const auto& p : smile) rows.push_back({p.strike, p.implied_vol, p.stderr});
    write_csv(dir / "smile.csv", {"strike", "implied_vol", "stderr"}, rows);
    log << "price: " << specs.size() << " claims and " << smile.size() << " smile points written to "
        << dir.string() << '\n';
    return kExitOk;
}

/// Measure-change harness. Runs on a P-ensemble (seed), a Q-ensemble
/// (seed + 1) and a paired P/Q cross-check (seed + 2). Exit 0 iff every test
/// passes at config.tolerance standard errors.
inline int cmd_verify(const RunConfig& cfg, std::ostream& log) {
    const std::filesystem::path dir(cfg.out);
    const double tol = cfg.tolerance;
    const TimeGrid grid = cfg.grid();
    SimulationOptions so = cfg.simulation_options();
    so.record_paths = false;
    const auto ens = simulate_ensemble(cfg.variant, Measure::P, cfg.params, grid, cfg.n_paths,
                                       RngStream{cfg.seed, 0}, so);
    const auto w = measure_weights(ens);
    const auto z = discounted_terminal(ens);
    const std::vector<double> ones(ens.size(), 1.0);
    nlohmann::json tests = nlohmann::json::array();
    const auto add = [&](nlohmann::json e) { tests.push_back(std::move(e)); };
    const auto check = [&](const std::string& name, const MartingaleReport& r, std::uint64_t seed) {
        add(detail::report_entry(name, r, seed, r.passes(tol)));
    };

    check("eta_T_mean_one", martingale_test(w.eta_T, ones, 1.0), cfg.seed);
    check("discounted_stock_under_Q", martingale_test(w.eta_T, z, cfg.params.s0), cfg.seed);

    const OptionSpec call{OptionKind::call, cfg.params.s0, ens.horizon()};
    if (cfg.variant == ModelVariant::independent) {
        if (w.eta_star_T.empty()) {
            log << "verify: eta' and eta* need the kernel volatility driver; skipped\n";
        } else {
            check("eta_prime_T_mean_one", martingale_test(w.eta_prime_T, ones, 1.0), cfg.seed);
            check("eta_star_T_mean_one", martingale_test(w.eta_star_T, ones, 1.0), cfg.seed);
            const auto rep = incompleteness_demo(ens, OptionSpec{OptionKind::realized_variance, 0.0, ens.horizon()});
            check("discounted_stock_under_Qstar", rep.stock_Qstar, cfg.seed);
            auto e = detail::report_entry("variance_claim_prices_differ", rep.difference, rep.joint_stderr,
                                          rep.statistic, 0.0, ens.size(), cfg.seed, std::abs(rep.statistic) > tol);
            e["price_Q"] = rep.price_Q.value;
            e["price_Q_stderr"] = rep.price_Q.stderr;
            e["price_Qstar"] = rep.price_Qstar.value;
            e["price_Qstar_stderr"] = rep.price_Qstar.stderr;
            add(e);
        }
    } else {
        const auto rep = completeness_demo(ens, call);
        check("canonical_tilt_martingale", rep.canonical, cfg.seed);
        for (const auto& t : rep.perturbed)
            add(detail::report_entry("tilt_scaled_" + format_double(t.scale) + "_rejected", t.report, cfg.seed,
                                     !t.report.passes(tol)));
    }

    {
        const auto prof = discounted_martingale_profile(cfg.variant, Measure::Q, cfg.params, grid, cfg.n_paths,
                                                        RngStream{cfg.seed + 1, 0}, cfg.simulation_options());
        const auto worst = std::max_element(prof.begin(), prof.end(), [](const auto& a, const auto& b) {
            return std::abs(a.report.statistic) < std::abs(b.report.statistic);
        });
        auto e = detail::report_entry("discounted_stock_Q_simulated_worst_time", worst->report, cfg.seed + 1,
                                      worst->report.passes(tol));
        e["t"] = worst->t;
        add(e);
    }
    {
        const auto x = girsanov_cross_check(cfg.variant, cfg.params, grid, call, cfg.n_paths,
                                            RngStream{cfg.seed + 2, 0}, cfg.simulation_options());
        auto e = detail::report_entry("girsanov_weighted_P_matches_Q", x.weighted_P.value - x.direct_Q.value,
                                      x.joint_stderr, x.statistic, 0.0, cfg.n_paths, cfg.seed + 2,
                                      std::abs(x.statistic) < tol);
        e["price_Q"] = x.direct_Q.value;
        e["price_P_weighted"] = x.weighted_P.value;
        add(e);
    }

    bool all = true;
    for (const auto& t : tests)
        if (!t["pass"].get<bool>()) {
            all = false;
            log << "verify: FAILED " << t["test"].get<std::string>() << " (statistic "
                << format_double(t["statistic"].get<double>()) << ")\n";
        }
    ensure_directory(dir);
    auto doc = detail::manifest("verify", cfg);
    doc["tests"] = tests;
    doc["pass"] = all;
    write_json(dir / "verify.json", doc);
    log << "verify: " << (all ? "all tests passed" : "some tests failed") << ", report " << (dir / "verify.json").string()
        << '\n';
    return all ? kExitOk : kExitFailure;
}

/// Runs a command by name and maps exceptions to exit codes.
inline int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log, std::ostream& err) {
    try {
        if (command == "simulate") return cmd_simulate(cfg, log);
        if (command == "stats") return cmd_stats(cfg, log);
        if (command == "price") return cmd_price(cfg, log);
        if (command == "verify") return cmd_verify(cfg, log);
        err << "unknown command `" << command << "`\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << command << " failed: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace fracvol
