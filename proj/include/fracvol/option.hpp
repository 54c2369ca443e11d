#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "fracvol/errors.hpp"
#include "fracvol/market_sim.hpp"

namespace fracvol {

enum class OptionKind { call, put, realized_variance };

inline std::string to_string(OptionKind k) {
    switch (k) {
        case OptionKind::call: return "call";
        case OptionKind::put: return "put";
        case OptionKind::realized_variance: return "realized_variance";
    }
    return "?";
}

inline OptionKind parse_option_kind(const std::string& s) {
    if (s == "call") return OptionKind::call;
    if (s == "put") return OptionKind::put;
    if (s == "realized_variance") return OptionKind::realized_variance;
    throw DomainError("unknown option kind '" + s + "'");
}

/// European claim. realized_variance pays int_0^T sigma_s^2 ds and ignores strike.
struct OptionSpec {
    OptionKind kind = OptionKind::call;
    double strike = 100.0;
    double maturity = 1.0;

    void validate() const {
        if (!(maturity > 0.0) || !std::isfinite(maturity)) throw DomainError("OptionSpec: maturity must be positive");
        if (kind != OptionKind::realized_variance && !(strike > 0.0))
            throw DomainError("OptionSpec: strike must be positive");
    }
};

struct PriceEstimate {
    double value = 0.0;
    double stderr = 0.0;
    std::size_t n_paths = 0;
};

/// Undiscounted payoff of `spec` on one simulated path.
inline double payoff(const OptionSpec& spec, const PathRecord& path) {
    switch (spec.kind) {
        case OptionKind::call: return std::max(path.s_T - spec.strike, 0.0);
        case OptionKind::put: return std::max(spec.strike - path.s_T, 0.0);
        case OptionKind::realized_variance: return path.integrated_variance;
    }
    return 0.0;
}

/// Checks that the claim matures at the ensemble horizon.
inline void require_maturity_matches(const OptionSpec& spec, const Ensemble& ens) {
    spec.validate();
    const double t = ens.horizon();
    if (std::abs(spec.maturity - t) > 1e-9 * std::max(1.0, t))
        throw DomainError("option maturity " + std::to_string(spec.maturity) + " does not match ensemble horizon " +
                          std::to_string(t));
}

}  // namespace fracvol
