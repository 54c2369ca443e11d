#pragma once

// File formats: CSV with 17 significant digits so doubles round-trip, JSON
// through nlohmann::json, and a reader for `t,price` / `date,price` series.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fracvol/errors.hpp"
#include "fracvol/grid.hpp"
#include "fracvol/market_sim.hpp"

namespace fracvol {

inline constexpr const char* kToolkitVersion = "1.0.0";

/// 17 significant digits, enough for any double to read back unchanged.
inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

inline std::ofstream open_output(const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + file.string() + " for writing");
    return out;
}

/// Writes a header line and rows of numbers.
inline void write_csv(const std::filesystem::path& file, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    auto out = open_output(file);
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_double(row[c]);
        out << '\n';
    }
}

inline void write_json(const std::filesystem::path& file, const nlohmann::json& j) {
    auto out = open_output(file);
    out << j.dump(2) << '\n';
}

/// One CSV per quantity: header `t,path_0,...`, one row per grid point.
/// `field` selects S or sigma from each recorded path.
inline void write_ensemble_csv(const std::filesystem::path& file, const Ensemble& ens,
                               std::vector<double> PathRecord::*field) {
    auto out = open_output(file);
    out << 't';
    for (std::size_t p = 0; p < ens.size(); ++p) out << ",path_" << p;
    out << '\n';
    for (const auto& path : ens.paths)
        if ((path.*field).size() != ens.grid.n_points)
            throw DomainError("write_ensemble_csv: ensemble was simulated without recorded paths");
    std::string line;
    for (std::size_t i = 0; i < ens.grid.n_points; ++i) {
        line = format_double(ens.grid.time(i));
        for (const auto& path : ens.paths) {
            line += ',';
            line += format_double((path.*field)[i]);
        }
        line += '\n';
        out << line;
    }
}

inline nlohmann::json params_json(const MarketParams& p) {
    return {{"theta", p.vol.theta}, {"beta", p.vol.beta()}, {"k", p.vol.k},
            {"delta", p.vol.delta}, {"H", p.vol.h.value()}, {"mu", p.mu},
            {"r", p.r},             {"s0", p.s0},           {"coupling", p.coupling}};
}

inline nlohmann::json ensemble_manifest(const Ensemble& ens) {
    return {{"toolkit_version", kToolkitVersion},
            {"variant", to_string(ens.variant)},
            {"measure", to_string(ens.measure)},
            {"seed", ens.seed.seed},
            {"n_paths", ens.size()},
            {"vol_driver", to_string(ens.options.vol_driver)},
            {"antithetic", ens.options.antithetic},
            {"grid", {{"t_start", ens.grid.t_start}, {"dt", ens.grid.dt}, {"n_points", ens.grid.n_points}}},
            {"params", params_json(ens.params)}};
}

/// A price series read from CSV. `dt` is the observation step: the spacing of
/// the `t` column, or the caller's step for `date` columns, where each row is
/// one step and dates only have to increase.
struct PriceSeries {
    std::vector<double> prices;
    double dt = 0.0;
    bool dated = false;
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    for (auto& f : out) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    }
    return out;
}

inline bool parse_number(std::string_view s, double& v) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && ptr == s.data() + s.size();
}

/// Days since 1970-01-01 for an ISO-8601 date (YYYY-MM-DD, optionally
/// followed by a time); the time part breaks ties as a day fraction.
inline bool parse_iso_date(std::string_view s, double& days) {
    int y = 0, m = 0, d = 0;
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') return false;
    const auto num = [&](std::size_t pos, std::size_t len, int& out) {
        const auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
        return ec == std::errc() && p == s.data() + pos + len;
    };
    if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return false;
    if (m < 1 || m > 12 || d < 1) return false;
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    if (d > kDays[m - 1] + (m == 2 && leap)) return false;
    // Civil-from-days inverse (proleptic Gregorian).
    const int yy = y - (m <= 2);
    const int era = (yy >= 0 ? yy : yy - 399) / 400;
    const int yoe = yy - era * 400;
    const int doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const int doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    days = era * 146097.0 + doe - 719468.0;
    if (s.size() == 10) return true;
    if (s[10] != 'T' && s[10] != ' ') return false;
    int hh = 0, mm = 0, ss = 0;
    if (s.size() < 16 || s[13] != ':' || !num(11, 2, hh) || !num(14, 2, mm)) return false;
    if (s.size() >= 19 && s[16] == ':' && !num(17, 2, ss)) return false;
    if (hh > 23 || mm > 59 || ss > 60) return false;
    days += (hh * 3600.0 + mm * 60.0 + ss) / 86400.0;
    return true;
}

}  // namespace detail

/// Reads a price series. Errors name the offending row (1-based line number,
/// header is line 1).
inline PriceSeries parse_price_csv(std::istream& in, double dated_dt) {
    std::string line;
    int lineno = 0;
    bool found = false;
    while (!found && std::getline(in, line)) {
        ++lineno;
        found = line.find_first_not_of(" \t\r") != std::string::npos;
    }
    if (!found) throw DataError("price CSV is empty");
    const auto header = detail::split_csv(line);
    if (header.size() != 2 || header[1] != "price" || (header[0] != "t" && header[0] != "date"))
        throw DataError("price CSV line " + std::to_string(lineno) + ": header must be `t,price` or `date,price`");
    const std::string tcol(header[0]);
    PriceSeries out;
    out.dated = tcol == "date";
    std::vector<double> times;
    std::vector<int> rows;
    while (std::getline(in, line)) {
        ++lineno;
        const auto f = detail::split_csv(line);
        if (f.size() == 1 && f[0].empty()) continue;
        const std::string where = "price CSV line " + std::to_string(lineno) + ": ";
        if (f.size() != 2) throw DataError(where + "expected 2 fields, found " + std::to_string(f.size()));
        double t = 0.0, price = 0.0;
        if (out.dated ? !detail::parse_iso_date(f[0], t) : !detail::parse_number(f[0], t))
            throw DataError(where + "cannot parse " + tcol + " `" + std::string(f[0]) + "`");
        if (!detail::parse_number(f[1], price)) throw DataError(where + "cannot parse price `" + std::string(f[1]) + "`");
        if (!(price > 0.0) || !std::isfinite(price)) throw DataError(where + "price must be positive and finite");
        if (!times.empty() && !(t > times.back())) throw DataError(where + tcol + " must increase");
        times.push_back(t);
        rows.push_back(lineno);
        out.prices.push_back(price);
    }
    if (out.prices.size() < 2) throw DataError("price CSV has fewer than two rows");
    if (out.dated) {
        if (!(dated_dt > 0.0)) throw DomainError("parse_price_csv: dated series need a positive dt");
        out.dt = dated_dt;
        return out;
    }
    out.dt = times[1] - times[0];
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double expected = times[0] + static_cast<double>(i) * out.dt;
        if (std::abs(times[i] - expected) > 1e-6 * out.dt)
            throw DataError("price CSV line " + std::to_string(rows[i]) + ": t is not on the uniform grid of step " +
                            format_double(out.dt));
    }
    return out;
}

inline PriceSeries read_price_csv(const std::filesystem::path& file, double dated_dt) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open price CSV " + file.string());
    return parse_price_csv(in, dated_dt);
}

}  // namespace fracvol
