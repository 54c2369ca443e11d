#pragma once

// Run configuration: a flat JSON object. Unknown keys and ill-typed or
// invalid values are ConfigErrors anchored to the line of the key.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fracvol/errors.hpp"
#include "fracvol/grid.hpp"
#include "fracvol/market_sim.hpp"
#include "fracvol/vol_model.hpp"

namespace fracvol {

struct RunConfig {
    ModelVariant variant = ModelVariant::independent;
    Measure measure = Measure::P;
    MarketParams params;
    double horizon = 1.0;
    double dt = 0.01;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    std::string out = "out";
    VolDriver vol_driver = VolDriver::kernel;
    bool antithetic = false;
    bool cell_residual = true;
    std::vector<double> strikes{80.0, 90.0, 100.0, 110.0, 120.0};
    double maturity = 0.0;  // 0 means the horizon
    std::size_t tau_max = 10;
    std::size_t acf_lags = 20;
    double tolerance = 3.0;  // pass threshold in standard errors
    std::string input;       // price CSV for `stats`; empty means simulate
    double calibration_delta = 0.0;  // 0 means params.vol.delta

    TimeGrid grid() const { return TimeGrid{0.0, dt, steps_in(horizon, dt, "T") + 1}; }
    double claim_maturity() const { return maturity > 0.0 ? maturity : horizon; }
    double calib_delta() const { return calibration_delta > 0.0 ? calibration_delta : params.vol.delta; }

    SimulationOptions simulation_options() const {
        SimulationOptions o;
        o.vol_driver = vol_driver;
        o.antithetic = antithetic;
        o.cell_residual = cell_residual;
        return o;
    }

    /// The resolved configuration, embedded in every output manifest.
    nlohmann::json echo() const {
        return {{"variant", to_string(variant)},
                {"measure", to_string(measure)},
                {"theta", params.vol.theta},
                {"beta", params.vol.beta()},
                {"k", params.vol.k},
                {"log_vol_variance", params.vol.log_variance()},
                {"delta", params.vol.delta},
                {"H", params.vol.h.value()},
                {"mu", params.mu},
                {"r", params.r},
                {"s0", params.s0},
                {"coupling", params.coupling},
                {"T", horizon},
                {"dt", dt},
                {"n_paths", n_paths},
                {"seed", seed},
                {"out", out},
                {"vol_driver", to_string(vol_driver)},
                {"antithetic", antithetic},
                {"cell_residual", cell_residual},
                {"strikes", strikes},
                {"maturity", claim_maturity()},
                {"tau_max", tau_max},
                {"acf_lags", acf_lags},
                {"tolerance", tolerance},
                {"input", input},
                {"calibration_delta", calib_delta()}};
    }
};

inline const std::set<std::string>& config_keys() {
    static const std::set<std::string> keys{
        "variant", "measure",       "theta",     "beta",      "k",           "log_vol_variance",
        "delta",   "H",             "mu",        "r",         "s0",          "coupling",
        "T",       "dt",            "n_paths",   "seed",      "out",         "vol_driver",
        "antithetic", "cell_residual", "strikes", "maturity", "tau_max",     "acf_lags",
        "tolerance", "input",       "calibration_delta"};
    return keys;
}

namespace detail {

inline int line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

/// Line of the first `"key" :` in the text, 0 if absent.
inline int line_of_key(const std::string& text, const std::string& key) {
    const std::regex re("\"" + std::regex_replace(key, std::regex(R"([.^$|()\[\]{}*+?\\])"), R"(\$&)") +
                        "\"\\s*:");
    std::smatch m;
    if (!std::regex_search(text, m, re)) return 0;
    return line_of_offset(text, static_cast<std::size_t>(m.position(0)));
}

}  // namespace detail

/// Parses and validates a configuration. `text` is the file content.
inline RunConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what(), detail::line_of_offset(text, e.byte));
    }
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object", 1);

    const auto line = [&](const std::string& key) { return detail::line_of_key(text, key); };
    for (const auto& [key, value] : j.items())
        if (!config_keys().count(key)) throw ConfigError("unknown key \"" + key + "\"", line(key));

    RunConfig cfg;
    const auto number = [&](const char* key, double& out) {
        if (!j.contains(key)) return false;
        if (!j[key].is_number()) throw ConfigError(std::string("\"") + key + "\" must be a number", line(key));
        out = j[key].get<double>();
        if (!std::isfinite(out)) throw ConfigError(std::string("\"") + key + "\" must be finite", line(key));
        return true;
    };
    const auto count = [&](const char* key, auto& out, double min) {
        if (!j.contains(key)) return;
        if (!j[key].is_number_integer() && !j[key].is_number_unsigned())
            throw ConfigError(std::string("\"") + key + "\" must be an integer", line(key));
        const auto v = j[key].get<std::int64_t>();
        if (static_cast<double>(v) < min)
            throw ConfigError(std::string("\"") + key + "\" must be at least " + std::to_string(static_cast<long>(min)),
                              line(key));
        out = static_cast<std::remove_reference_t<decltype(out)>>(v);
    };
    const auto string = [&](const char* key, std::string& out) {
        if (!j.contains(key)) return false;
        if (!j[key].is_string()) throw ConfigError(std::string("\"") + key + "\" must be a string", line(key));
        out = j[key].get<std::string>();
        return true;
    };
    const auto boolean = [&](const char* key, bool& out) {
        if (!j.contains(key)) return;
        if (!j[key].is_boolean()) throw ConfigError(std::string("\"") + key + "\" must be true or false", line(key));
        out = j[key].get<bool>();
    };
    const auto guard = [&](const char* key, auto&& fn) {
        try {
            fn();
        } catch (const DomainError& e) {
            throw ConfigError(e.what(), line(key));
        }
    };

    std::string s;
    if (string("variant", s)) guard("variant", [&] { cfg.variant = parse_variant(s); });
    if (string("measure", s)) guard("measure", [&] { cfg.measure = parse_measure(s); });
    if (string("vol_driver", s)) guard("vol_driver", [&] { cfg.vol_driver = parse_vol_driver(s); });
    string("out", cfg.out);
    string("input", cfg.input);
    boolean("antithetic", cfg.antithetic);
    boolean("cell_residual", cfg.cell_residual);

    double h = 0.85;
    number("H", h);
    guard("H", [&] { cfg.params.vol.h = HurstParameter(h); });
    auto& vol = cfg.params.vol;
    vol.delta = 0.1;
    number("delta", vol.delta);
    if (!(vol.delta > 0.0)) throw ConfigError("\"delta\" must be positive", line("delta"));

    if (j.contains("k") && j.contains("log_vol_variance"))
        throw ConfigError("give either \"k\" or \"log_vol_variance\", not both", line("log_vol_variance"));
    double v = 0.25;
    if (number("k", vol.k)) {
        if (!(vol.k >= 0.0)) throw ConfigError("\"k\" must be nonnegative", line("k"));
    } else {
        number("log_vol_variance", v);
        guard("log_vol_variance", [&] { vol.k = k_for_log_variance(v, vol.delta, vol.h); });
    }

    if (j.contains("theta") && j.contains("beta"))
        throw ConfigError("give either \"theta\" or \"beta\", not both", line("beta"));
    double beta = 0.0;
    vol.theta = 0.2;
    if (number("beta", beta))
        vol.theta = theta_from_beta(beta, vol.k, vol.delta, vol.h);
    else
        number("theta", vol.theta);
    guard(j.contains("beta") ? "beta" : "theta", [&] { vol.validate(); });

    number("mu", cfg.params.mu);
    number("r", cfg.params.r);
    number("s0", cfg.params.s0);
    number("coupling", cfg.params.coupling);
    guard("s0", [&] {
        if (!(cfg.params.s0 > 0.0)) throw DomainError("\"s0\" must be positive");
    });
    guard(j.contains("coupling") ? "coupling" : "r", [&] { cfg.params.validate(); });

    number("T", cfg.horizon);
    number("dt", cfg.dt);
    if (!(cfg.dt > 0.0)) throw ConfigError("\"dt\" must be positive", line("dt"));
    if (!(cfg.horizon > 0.0)) throw ConfigError("\"T\" must be positive", line("T"));
    guard(j.contains("T") || !j.contains("dt") ? "T" : "dt", [&] { steps_in(cfg.horizon, cfg.dt, "T"); });
    guard(j.contains("delta") || !j.contains("dt") ? "delta" : "dt", [&] { steps_in(vol.delta, cfg.dt, "delta"); });

    count("n_paths", cfg.n_paths, 1);
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            throw ConfigError("\"seed\" must be a nonnegative integer", line("seed"));
        if (j["seed"].get<std::int64_t>() < 0 && !j["seed"].is_number_unsigned())
            throw ConfigError("\"seed\" must be a nonnegative integer", line("seed"));
        cfg.seed = j["seed"].get<std::uint64_t>();
    }
    count("tau_max", cfg.tau_max, 1);
    count("acf_lags", cfg.acf_lags, 1);
    number("tolerance", cfg.tolerance);
    if (!(cfg.tolerance > 0.0)) throw ConfigError("\"tolerance\" must be positive", line("tolerance"));

    if (j.contains("strikes")) {
        if (!j["strikes"].is_array() || j["strikes"].empty())
            throw ConfigError("\"strikes\" must be a nonempty array of numbers", line("strikes"));
        cfg.strikes.clear();
        for (const auto& x : j["strikes"]) {
            if (!x.is_number()) throw ConfigError("\"strikes\" must be a nonempty array of numbers", line("strikes"));
            cfg.strikes.push_back(x.get<double>());
        }
    }
    for (std::size_t i = 0; i < cfg.strikes.size(); ++i)
        if (!(cfg.strikes[i] > 0.0) || (i > 0 && !(cfg.strikes[i] > cfg.strikes[i - 1])))
            throw ConfigError("\"strikes\" must be positive and strictly increasing", line("strikes"));
    if (number("maturity", cfg.maturity)) {
        if (!(cfg.maturity > 0.0)) throw ConfigError("\"maturity\" must be positive", line("maturity"));
        guard("maturity", [&] { steps_in(cfg.maturity, cfg.dt, "maturity"); });
    }
    if (number("calibration_delta", cfg.calibration_delta)) {
        if (!(cfg.calibration_delta > 0.0))
            throw ConfigError("\"calibration_delta\" must be positive", line("calibration_delta"));
        guard("calibration_delta", [&] { steps_in(cfg.calibration_delta, cfg.dt, "calibration_delta"); });
    }

    if (cfg.variant == ModelVariant::identified) {
        if (cfg.vol_driver != VolDriver::kernel)
            throw ConfigError("the identified variant needs vol_driver \"kernel\"", line("vol_driver"));
        guard("H", [&] { cfg.params.vol.h.require_kernel(); });
    }
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Command-line overrides, applied after the file and re-validated.
struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_paths;
    std::optional<std::string> out;
    std::optional<std::string> variant;
};

inline void apply_overrides(RunConfig& cfg, const ConfigOverrides& o) {
    if (o.seed) cfg.seed = *o.seed;
    if (o.n_paths) {
        if (*o.n_paths == 0) throw ConfigError("--paths must be at least 1");
        cfg.n_paths = *o.n_paths;
    }
    if (o.out) cfg.out = *o.out;
    if (o.variant) {
        try {
            cfg.variant = parse_variant(*o.variant);
        } catch (const DomainError& e) {
            throw ConfigError(std::string("--variant: ") + e.what());
        }
        if (cfg.variant == ModelVariant::identified) {
            if (cfg.vol_driver != VolDriver::kernel)
                throw ConfigError("--variant identified needs vol_driver \"kernel\"");
            try {
                cfg.params.vol.h.require_kernel();
            } catch (const DomainError& e) {
                throw ConfigError(std::string("--variant identified: ") + e.what());
            }
        }
    }
}

}  // namespace fracvol
