#pragma once

// Historical sale-event ingestion.
//
// Input rows are aggregated sales: (date, hour, ad_network, user_id,
// impressions, revenue). A row with n impressions and revenue R contributes
// n copies of the per-impression price R/n to that user/network's sale
// vector. Vectors feed distribution estimation; a held-out day is binned
// against a live waterfall to produce an observed impression vector.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"

namespace waterfall {

// ---- records ----------------------------------------------------------

struct SaleRecord {
    std::int32_t day = 0; // civil day number (days since 1970-01-01)
    std::int32_t hour = 0;
    AdNetworkId network;
    std::string user;
    std::int64_t impressions = 0;
    double revenue = 0.0;
};

struct SaleEventDataset {
    std::vector<SaleRecord> records;
    std::int32_t first_day = 0;
    std::int32_t last_day = 0;

    bool empty() const { return records.empty(); }
};

enum class DateFormat : std::uint8_t { iso, day_month_year, month_day_year };

struct ParseOptions {
    DateFormat date_format = DateFormat::iso;
    std::size_t max_diagnostics = 20;
};

struct ParseReport {
    std::size_t rows_ok = 0;
    std::size_t rows_rejected = 0;
    std::vector<std::string> diagnostics; // capped at max_diagnostics
};

// ---- civil date arithmetic ---------------------------------------------

namespace detail {

/// Days since 1970-01-01 for a proleptic Gregorian date.
constexpr std::int32_t days_from_civil(std::int32_t y, std::uint32_t m, std::uint32_t d) {
    y -= m <= 2;
    const std::int32_t era = (y >= 0 ? y : y - 399) / 400;
    const std::uint32_t yoe = static_cast<std::uint32_t>(y - era * 400);
    const std::uint32_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const std::uint32_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int32_t>(doe) - 719468;
}

constexpr void civil_from_days(std::int32_t z, std::int32_t& y, std::uint32_t& m, std::uint32_t& d) {
    z += 719468;
    const std::int32_t era = (z >= 0 ? z : z - 146096) / 146097;
    const std::uint32_t doe = static_cast<std::uint32_t>(z - era * 146097);
    const std::uint32_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int32_t yr = static_cast<std::int32_t>(yoe) + era * 400;
    const std::uint32_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const std::uint32_t mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = yr + (m <= 2);
}

inline bool parse_int(std::string_view s, std::int64_t& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

inline bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

/// Accepts YYYY-MM-DD / DD-MM-YYYY / MM-DD-YYYY with '-' or '/' separators.
inline bool parse_date(std::string_view s, DateFormat fmt, std::int32_t& day_out) {
    std::int64_t f[3];
    std::size_t start = 0, field = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == '-' || s[i] == '/') {
            if (field >= 3) return false;
            if (!parse_int(s.substr(start, i - start), f[field])) return false;
            ++field;
            start = i + 1;
        }
    }
    if (field != 3) return false;
    std::int64_t y, m, d;
    switch (fmt) {
        case DateFormat::iso: y = f[0]; m = f[1]; d = f[2]; break;
        case DateFormat::day_month_year: d = f[0]; m = f[1]; y = f[2]; break;
        case DateFormat::month_day_year: m = f[0]; d = f[1]; y = f[2]; break;
        default: return false;
    }
    if (y < 1900 || y > 9999 || m < 1 || m > 12 || d < 1 || d > 31) return false;
    day_out = days_from_civil(static_cast<std::int32_t>(y), static_cast<std::uint32_t>(m),
                              static_cast<std::uint32_t>(d));
    return true;
}

inline std::string day_to_string(std::int32_t day) {
    std::int32_t y;
    std::uint32_t m, d;
    civil_from_days(day, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
    return buf;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

} // namespace detail

// ---- parsing ----------------------------------------------------------

/// Parse a sales CSV. The header must be exactly
/// date,hour,ad_network,user_id,impressions,revenue. Malformed data rows are
/// skipped and counted; a malformed header is a hard error.
inline SaleEventDataset parse_records(std::istream& in, const ParseOptions& opt = {},
                                      ParseReport* report = nullptr) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("sales CSV is empty, expected a header row");
    {
        auto cols = detail::split_csv_line(detail::trim(line));
        static const char* expected[6] = {"date", "hour", "ad_network",
                                          "user_id", "impressions", "revenue"};
        bool ok = cols.size() == 6;
        for (std::size_t i = 0; ok && i < 6; ++i)
            if (detail::trim(cols[i]) != expected[i]) ok = false;
        if (!ok)
            throw FormatError(
                "sales CSV header must be date,hour,ad_network,user_id,impressions,revenue");
    }

    SaleEventDataset ds;
    ParseReport local;
    ParseReport& rep = report ? *report : local;
    std::size_t line_no = 1;

    auto reject = [&](const std::string& why) {
        ++rep.rows_rejected;
        if (rep.diagnostics.size() < opt.max_diagnostics)
            rep.diagnostics.push_back("line " + std::to_string(line_no) + ": " + why);
    };

    while (std::getline(in, line)) {
        ++line_no;
        auto trimmed = detail::trim(line);
        if (trimmed.empty()) continue;
        auto cols = detail::split_csv_line(trimmed);
        if (cols.size() != 6) {
            reject("expected 6 fields, got " + std::to_string(cols.size()));
            continue;
        }
        SaleRecord r;
        std::int64_t hour = 0, impressions = 0;
        if (!detail::parse_date(detail::trim(cols[0]), opt.date_format, r.day)) {
            reject("bad date '" + std::string(detail::trim(cols[0])) + "'");
            continue;
        }
        if (!detail::parse_int(detail::trim(cols[1]), hour) || hour < 0 || hour > 23) {
            reject("bad hour '" + std::string(detail::trim(cols[1])) + "'");
            continue;
        }
        auto network = detail::trim(cols[2]);
        auto user = detail::trim(cols[3]);
        if (network.empty() || user.empty()) {
            reject("empty ad_network or user_id");
            continue;
        }
        if (!detail::parse_int(detail::trim(cols[4]), impressions) || impressions <= 0) {
            reject("impressions must be a positive integer");
            continue;
        }
        if (!detail::parse_double(detail::trim(cols[5]), r.revenue) || r.revenue < 0.0) {
            reject("revenue must be a non-negative number");
            continue;
        }
        r.hour = static_cast<std::int32_t>(hour);
        r.network = AdNetworkId(std::string(network));
        r.user = std::string(user);
        r.impressions = impressions;
        ds.records.push_back(std::move(r));
        ++rep.rows_ok;
    }

    if (!ds.records.empty()) {
        ds.first_day = ds.records.front().day;
        ds.last_day = ds.records.front().day;
        for (const auto& r : ds.records) {
            ds.first_day = std::min(ds.first_day, r.day);
            ds.last_day = std::max(ds.last_day, r.day);
        }
    }
    return ds;
}

// ---- sale vectors ------------------------------------------------------

/// Per-user, per-network vectors of per-impression sale prices, in
/// chronological order. Map keys are sorted, so iteration is deterministic.
struct UserSaleVectors {
    std::map<std::string, std::map<AdNetworkId, std::vector<double>>> by_user;

    std::size_t user_count() const { return by_user.size(); }

    std::vector<std::string> users() const {
        std::vector<std::string> out;
        out.reserve(by_user.size());
        for (const auto& [u, _] : by_user) out.push_back(u);
        return out;
    }

    std::vector<AdNetworkId> networks() const {
        std::map<AdNetworkId, bool> seen;
        for (const auto& [_, nets] : by_user)
            for (const auto& [k, __] : nets) seen[k] = true;
        std::vector<AdNetworkId> out;
        out.reserve(seen.size());
        for (const auto& [k, _] : seen) out.push_back(k);
        return out;
    }

    std::size_t total_samples() const {
        std::size_t n = 0;
        for (const auto& [_, nets] : by_user)
            for (const auto& [__, v] : nets) n += v.size();
        return n;
    }
};

/// Expand aggregated records into sale vectors. A record with n impressions
/// appends n copies of revenue/n. Records are applied in (day, hour, input
/// position) order so vectors are chronological and reproducible.
inline UserSaleVectors vectorize(const SaleEventDataset& ds) {
    std::vector<std::size_t> order(ds.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = ds.records[a];
        const auto& rb = ds.records[b];
        if (ra.day != rb.day) return ra.day < rb.day;
        return ra.hour < rb.hour;
    });

    UserSaleVectors v;
    for (std::size_t idx : order) {
        const auto& r = ds.records[idx];
        double unit_price = r.revenue / static_cast<double>(r.impressions);
        auto& vec = v.by_user[r.user][r.network];
        vec.insert(vec.end(), static_cast<std::size_t>(r.impressions), unit_price);
    }
    return v;
}

// ---- train / validation split ------------------------------------------

struct TrainValidationSplit {
    SaleEventDataset train;      // days in [anchor - window, anchor)
    SaleEventDataset validation; // records exactly on anchor day
    std::int32_t anchor_day = 0;
    std::int32_t window = 0;
    bool truncated = false; // window extended past the first day present
    std::vector<std::string> diagnostics;
};

/// Split a dataset at `anchor_day`: the preceding `window` days train, the
/// anchor day itself validates. No training data at all is an error.
inline TrainValidationSplit split_train_validation(const SaleEventDataset& ds,
                                                   std::int32_t anchor_day, std::int32_t window) {
    if (window <= 0) throw PreconditionError("training window must be positive");
    if (ds.empty()) throw PreconditionError("cannot split an empty dataset");

    TrainValidationSplit out;
    out.anchor_day = anchor_day;
    out.window = window;

    const std::int32_t lo = anchor_day - window;
    for (const auto& r : ds.records) {
        if (r.day >= lo && r.day < anchor_day)
            out.train.records.push_back(r);
        else if (r.day == anchor_day)
            out.validation.records.push_back(r);
    }
    if (out.train.records.empty())
        throw PreconditionError("no training records in the " + std::to_string(window) +
                                " days before " + detail::day_to_string(anchor_day));
    if (lo < ds.first_day) {
        out.truncated = true;
        out.diagnostics.push_back("training window reaches back to " + detail::day_to_string(lo) +
                                  " but data starts at " + detail::day_to_string(ds.first_day) +
                                  "; window truncated");
    }
    auto finalize = [](SaleEventDataset& d) {
        if (d.records.empty()) return;
        d.first_day = d.last_day = d.records.front().day;
        for (const auto& r : d.records) {
            d.first_day = std::min(d.first_day, r.day);
            d.last_day = std::max(d.last_day, r.day);
        }
    };
    finalize(out.train);
    finalize(out.validation);
    return out;
}

// ---- observed impression binning ----------------------------------------

struct BinOptions {
    double per_mille_divisor = 1000.0; // converts unit price to eCPM
    double relative_tolerance = 1e-6;  // price match tolerance
};

struct BinResult {
    ImpressionVector q;
    std::int64_t matched_impressions = 0;
    std::int64_t unmatched_impressions = 0;
    std::size_t unmatched_rows = 0;
    std::vector<std::string> diagnostics;
};

/// Attribute observed sale records to waterfall instances. A record matches
/// the instance of the same network whose price is nearest its eCPM
/// (revenue/impressions * divisor) within tolerance; ties go to the topmost
/// instance. Unmatched records are reported, never silently dropped.
inline BinResult bin_observed_impressions(const SaleEventDataset& observed, const Waterfall& w,
                                          const BinOptions& opt = {}) {
    BinResult out;
    out.q.assign(w.instances.size(), 0);

    for (const auto& r : observed.records) {
        double ecpm = r.revenue / static_cast<double>(r.impressions) * opt.per_mille_divisor;
        double best_gap = 0.0;
        std::size_t best = w.instances.size();
        for (std::size_t i = 0; i < w.instances.size(); ++i) {
            const auto& inst = w.instances[i];
            if (inst.network != r.network) continue;
            double gap = std::abs(inst.price - ecpm);
            if (gap > opt.relative_tolerance * std::max(1.0, inst.price)) continue;
            if (best == w.instances.size() || gap < best_gap) {
                best = i;
                best_gap = gap;
            }
        }
        if (best == w.instances.size()) {
            out.unmatched_impressions += r.impressions;
            ++out.unmatched_rows;
            if (out.diagnostics.size() < 20)
                out.diagnostics.push_back("no instance for network '" + r.network.value +
                                          "' at eCPM " + std::to_string(ecpm));
        } else {
            out.q[best] += r.impressions;
            out.matched_impressions += r.impressions;
        }
    }
    return out;
}

} // namespace waterfall
