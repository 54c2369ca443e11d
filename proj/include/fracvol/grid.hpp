#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fracvol/errors.hpp"

namespace fracvol {

/// Uniform time grid t_i = t_start + i*dt, i = 0..n_points-1.
struct TimeGrid {
    double t_start = 0.0;
    double dt = 1.0;
    std::size_t n_points = 2;

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("TimeGrid: dt must be positive");
        if (n_points < 2) throw DomainError("TimeGrid: need at least two points");
        if (!std::isfinite(t_start)) throw DomainError("TimeGrid: t_start must be finite");
    }

    double time(std::size_t i) const { return t_start + static_cast<double>(i) * dt; }
    double t_end() const { return time(n_points - 1); }
    double span() const { return static_cast<double>(n_points - 1) * dt; }

    bool operator==(const TimeGrid&) const = default;
};

/// Number of grid steps covering `duration`, or DomainError if `duration`
/// is not an integer multiple of `dt` (relative tolerance 1e-9).
inline std::size_t steps_in(double duration, double dt, const char* what = "duration") {
    if (!(dt > 0.0)) throw DomainError("steps_in: dt must be positive");
    const double ratio = duration / dt;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
        throw DomainError(std::string(what) + " = " + std::to_string(duration) +
                          " is not a positive integer multiple of dt = " + std::to_string(dt));
    return static_cast<std::size_t>(rounded);
}

/// A time grid plus one realised trajectory on it.
struct SampledPath {
    TimeGrid grid;
    std::vector<double> values;

    void validate() const {
        grid.validate();
        if (values.size() != grid.n_points) throw DomainError("SampledPath: length does not match grid");
    }
};

}  // namespace fracvol
