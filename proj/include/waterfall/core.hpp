#pragma once

// Core domain types: ad networks, price grids, waterfalls, impression
// vectors, revenue, and structural validation.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"

namespace waterfall {

// ---- errors ----------------------------------------------------------

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input text or binary artifact.
struct FormatError : Error {
    using Error::Error;
};

/// Mismatched vector/waterfall dimensions.
struct DimensionError : Error {
    using Error::Error;
};

/// Unknown user or ad network.
struct LookupError : Error {
    using Error::Error;
};

/// An operation's input contract was violated.
struct PreconditionError : Error {
    using Error::Error;
};

/// Distribution estimation cannot proceed (e.g. no samples at all).
struct EstimationError : Error {
    using Error::Error;
};

/// A waterfall failed structural validation where a valid one is required.
struct ValidationError : Error {
    using Error::Error;
};

/// A requested enumeration exceeds the configured candidate budget.
struct CapacityError : Error {
    using Error::Error;
};

// ---- formatting --------------------------------------------------------

/// Shortest decimal form that parses back to exactly the same double.
/// Keeps every text artifact byte-stable across runs.
inline std::string format_double(double x) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    (void)ec;
    return std::string(buf, p);
}

// ---- identifiers ------------------------------------------------------

/// Opaque ad-network identifier.
struct AdNetworkId {
    std::string value;

    AdNetworkId() = default;
    explicit AdNetworkId(std::string v) : value(std::move(v)) {}

    auto operator<=>(const AdNetworkId&) const = default;
};

inline std::uint64_t key_of(const AdNetworkId& id) { return fnv1a64(id.value); }

// ---- price grid -------------------------------------------------------

/// Discrete set of admissible prices, strictly increasing, all positive.
/// Lookups tolerate the rounding noise of a text round trip.
class PriceGrid {
public:
    PriceGrid() = default;

    static PriceGrid from_range(double lo, double hi, double step) {
        if (!(lo > 0.0) || !(step > 0.0) || hi < lo)
            throw PreconditionError("price grid range requires 0 < lo <= hi and step > 0");
        std::vector<double> v;
        for (int i = 0;; ++i) {
            double p = lo + step * i;
            if (p > hi + step * 1e-9) break;
            v.push_back(p);
        }
        return from_values(std::move(v));
    }

    static PriceGrid from_values(std::vector<double> values) {
        if (values.empty()) throw PreconditionError("price grid must be non-empty");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!(values[i] > 0.0)) throw PreconditionError("price grid values must be positive");
            if (i > 0 && !(values[i] > values[i - 1]))
                throw PreconditionError("price grid values must be strictly increasing");
        }
        PriceGrid g;
        g.values_ = std::move(values);
        g.tol_ = 1e-9 * std::max(1.0, g.values_.back());
        return g;
    }

    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }
    double min() const { return values_.front(); }
    double max() const { return values_.back(); }

    std::optional<std::size_t> index_of(double price) const {
        auto it = std::lower_bound(values_.begin(), values_.end(), price - tol_);
        if (it == values_.end()) return std::nullopt;
        if (std::abs(*it - price) <= tol_) return static_cast<std::size_t>(it - values_.begin());
        return std::nullopt;
    }

    bool contains(double price) const { return index_of(price).has_value(); }

    /// Next grid value above `price`, if any. `price` must be on the grid.
    std::optional<double> step_up(double price) const {
        auto i = index_of(price);
        if (!i) throw PreconditionError("step_up: price not on grid");
        if (*i + 1 >= values_.size()) return std::nullopt;
        return values_[*i + 1];
    }

    std::optional<double> step_down(double price) const {
        auto i = index_of(price);
        if (!i) throw PreconditionError("step_down: price not on grid");
        if (*i == 0) return std::nullopt;
        return values_[*i - 1];
    }

private:
    std::vector<double> values_;
    double tol_ = 0.0;
};

// ---- waterfall --------------------------------------------------------

/// One slot in a waterfall: offer `price` to `network`.
struct Instance {
    AdNetworkId network;
    double price = 0.0;

    bool operator==(const Instance&) const = default;
};

/// Ordered sequence of instances, traversed top to bottom per ad request.
struct Waterfall {
    std::vector<Instance> instances;

    std::size_t size() const { return instances.size(); }
    bool empty() const { return instances.empty(); }
    bool operator==(const Waterfall&) const = default;
};

/// Structural limits a waterfall must respect.
struct WaterfallConstraints {
    std::size_t max_length = 12;
    std::size_t max_instances_per_network = 3;
    bool canonical_descending = true;
};

/// Per-instance impression counts, aligned with Waterfall::instances.
using ImpressionVector = std::vector<std::int64_t>;

/// Total revenue of a configuration: sum of impressions times price, divided
/// by the per-mille convention (prices are eCPM, paid per 1000 impressions).
inline double revenue(const Waterfall& w, const ImpressionVector& q,
                      double per_mille_divisor = 1000.0) {
    if (q.size() != w.instances.size())
        throw DimensionError("impression vector length does not match waterfall length");
    if (!(per_mille_divisor > 0.0))
        throw PreconditionError("per-mille divisor must be positive");
    double total = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (q[i] < 0) throw PreconditionError("impression counts must be non-negative");
        total += static_cast<double>(q[i]) * w.instances[i].price;
    }
    return total / per_mille_divisor;
}

// ---- validation -------------------------------------------------------

struct Violation {
    enum class Kind : std::uint8_t {
        off_grid_price,
        over_max_length,
        duplicate_instance,
        per_network_cap_exceeded,
        order_violation,
    };
    Kind kind;
    std::size_t position; // index of the offending instance (or size() for length)
    std::string message;
};

inline const char* to_string(Violation::Kind k) {
    switch (k) {
        case Violation::Kind::off_grid_price: return "off_grid_price";
        case Violation::Kind::over_max_length: return "over_max_length";
        case Violation::Kind::duplicate_instance: return "duplicate_instance";
        case Violation::Kind::per_network_cap_exceeded: return "per_network_cap_exceeded";
        case Violation::Kind::order_violation: return "order_violation";
    }
    return "unknown";
}

/// Collect every structural violation; an empty result means valid.
inline std::vector<Violation> validate(const Waterfall& w, const WaterfallConstraints& c,
                                       const PriceGrid& grid) {
    std::vector<Violation> out;
    const auto& ins = w.instances;

    if (ins.size() > c.max_length)
        out.push_back({Violation::Kind::over_max_length, ins.size(),
                       "waterfall length " + std::to_string(ins.size()) + " exceeds max " +
                           std::to_string(c.max_length)});

    for (std::size_t i = 0; i < ins.size(); ++i) {
        if (!grid.contains(ins[i].price))
            out.push_back({Violation::Kind::off_grid_price, i,
                           "price at position " + std::to_string(i) + " is not on the grid"});
        for (std::size_t j = 0; j < i; ++j) {
            if (ins[j].network == ins[i].network &&
                std::abs(ins[j].price - ins[i].price) <= 1e-12 * std::max(1.0, ins[i].price)) {
                out.push_back({Violation::Kind::duplicate_instance, i,
                               "duplicate (network, price) pair at position " + std::to_string(i)});
                break;
            }
        }
        if (c.canonical_descending && i > 0 && ins[i].price > ins[i - 1].price + 1e-12)
            out.push_back({Violation::Kind::order_violation, i,
                           "price at position " + std::to_string(i) + " exceeds the one above it"});
    }

    // per-network instance cap
    std::vector<AdNetworkId> seen;
    for (std::size_t i = 0; i < ins.size(); ++i) {
        const auto& id = ins[i].network;
        if (std::find(seen.begin(), seen.end(), id) != seen.end()) continue;
        seen.push_back(id);
        std::size_t n = 0;
        for (const auto& inst : ins)
            if (inst.network == id) ++n;
        if (n > c.max_instances_per_network)
            out.push_back({Violation::Kind::per_network_cap_exceeded, i,
                           "network '" + id.value + "' has " + std::to_string(n) +
                               " instances, cap is " + std::to_string(c.max_instances_per_network)});
    }
    return out;
}

inline bool is_valid(const Waterfall& w, const WaterfallConstraints& c, const PriceGrid& g) {
    return validate(w, c, g).empty();
}

/// Reorder instances into descending-price order (stable, so equal prices
/// keep their relative order). Identity when canonical ordering is off.
inline Waterfall canonicalize(const Waterfall& w, const WaterfallConstraints& c) {
    if (!c.canonical_descending) return w;
    Waterfall out = w;
    std::stable_sort(out.instances.begin(), out.instances.end(),
                     [](const Instance& a, const Instance& b) { return a.price > b.price; });
    return out;
}

} // namespace waterfall
