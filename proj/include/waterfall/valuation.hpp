#pragma once

// Per-user, per-network valuation distributions.
//
// Each (user, network) cell holds a Beta distribution over the unit
// interval; a shared price scale maps unit draws to eCPM. Cells with direct
// sale history are fitted by method of moments; cells without fall back to
// the user's pooled samples across other networks, then to the network's
// global fit across all users.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "core.hpp"
#include "ingest.hpp"
#include "rng.hpp"

namespace waterfall {

// ---- parameters --------------------------------------------------------

enum class Provenance : std::uint8_t { direct, pooled_other_networks, global_network };

inline const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::direct: return "direct";
        case Provenance::pooled_other_networks: return "pooled_other_networks";
        case Provenance::global_network: return "global_network";
    }
    return "unknown";
}

struct BetaParams {
    double alpha = 1.0;
    double beta = 1.0;
    Provenance provenance = Provenance::direct;

    double mean() const { return alpha / (alpha + beta); }
    double variance() const {
        double s = alpha + beta;
        return alpha * beta / (s * s * (s + 1.0));
    }
};

struct EstimationConfig {
    int pool_min = 3;            // other-network count needed to pool
    double variance_floor = 1e-6;
    double support_clamp = 1e-4; // samples pulled into [clamp, 1-clamp]
    double price_scale = 0.0;    // eCPM at unit draw 1.0; 0 = auto from data
    double price_unit = 1000.0;  // per-impression price -> eCPM multiplier
    int threads = 1;
};

// ---- method-of-moments fit ----------------------------------------------

/// Fit a Beta by method of moments to samples already mapped into (0, 1).
/// Degenerate variance is floored; a non-positive concentration estimate
/// falls back to concentration 2, preserving the sample mean either way.
inline BetaParams fit_beta(std::span<const double> unit_samples,
                           const EstimationConfig& cfg = {}) {
    if (unit_samples.empty()) throw PreconditionError("fit_beta requires at least one sample");

    const double lo = cfg.support_clamp;
    const double hi = 1.0 - cfg.support_clamp;
    double sum = 0.0;
    for (double x : unit_samples) sum += std::clamp(x, lo, hi);
    const double n = static_cast<double>(unit_samples.size());
    const double m = sum / n;

    double ss = 0.0;
    for (double x : unit_samples) {
        double c = std::clamp(x, lo, hi) - m;
        ss += c * c;
    }
    double v = std::max(ss / n, cfg.variance_floor);

    double nu = m * (1.0 - m) / v - 1.0;
    if (!(nu > 0.0)) nu = 2.0;

    BetaParams p;
    p.alpha = m * nu;
    p.beta = (1.0 - m) * nu;
    p.provenance = Provenance::direct;
    return p;
}

// ---- matrix -------------------------------------------------------------

/// Immutable U x K matrix of Beta parameters plus the registries that give
/// rows and columns their identity. Row and column orders are the sorted
/// orders of the registries used to build it.
class ValuationMatrix {
public:
    ValuationMatrix(std::vector<std::string> users, std::vector<AdNetworkId> networks,
                    double price_scale, std::vector<BetaParams> entries)
        : users_(std::move(users)),
          networks_(std::move(networks)),
          price_scale_(price_scale),
          entries_(std::move(entries)) {
        if (entries_.size() != users_.size() * networks_.size())
            throw DimensionError("valuation matrix entry count must be users * networks");
        if (!(price_scale_ > 0.0)) throw PreconditionError("price scale must be positive");
        user_keys_.reserve(users_.size());
        for (std::size_t i = 0; i < users_.size(); ++i) {
            user_keys_.push_back(fnv1a64(users_[i]));
            user_index_.emplace(users_[i], static_cast<std::uint32_t>(i));
        }
        network_keys_.reserve(networks_.size());
        for (std::size_t i = 0; i < networks_.size(); ++i) {
            network_keys_.push_back(key_of(networks_[i]));
            network_index_.emplace(networks_[i].value, static_cast<std::uint32_t>(i));
        }
    }

    std::size_t user_count() const { return users_.size(); }
    std::size_t network_count() const { return networks_.size(); }
    double price_scale() const { return price_scale_; }
    const std::vector<std::string>& users() const { return users_; }
    const std::vector<AdNetworkId>& networks() const { return networks_; }
    const std::vector<BetaParams>& entries() const { return entries_; }

    const BetaParams& at(std::uint32_t u, std::uint32_t k) const {
        return entries_[static_cast<std::size_t>(u) * networks_.size() + k];
    }

    const BetaParams& at(const std::string& user, const AdNetworkId& network) const {
        return at(user_index_of(user), network_index_of(network));
    }

    std::uint32_t user_index_of(const std::string& user) const {
        auto it = user_index_.find(user);
        if (it == user_index_.end()) throw LookupError("unknown user '" + user + "'");
        return it->second;
    }

    std::uint32_t network_index_of(const AdNetworkId& network) const {
        auto it = network_index_.find(network.value);
        if (it == network_index_.end())
            throw LookupError("unknown ad network '" + network.value + "'");
        return it->second;
    }

    bool has_network(const AdNetworkId& network) const {
        return network_index_.count(network.value) != 0;
    }

    std::uint64_t user_key(std::uint32_t u) const { return user_keys_[u]; }
    std::uint64_t network_key(std::uint32_t k) const { return network_keys_[k]; }

private:
    std::vector<std::string> users_;
    std::vector<AdNetworkId> networks_;
    double price_scale_;
    std::vector<BetaParams> entries_;
    std::vector<std::uint64_t> user_keys_;
    std::vector<std::uint64_t> network_keys_;
    std::unordered_map<std::string, std::uint32_t> user_index_;
    std::unordered_map<std::string, std::uint32_t> network_index_;
};

// ---- estimation ---------------------------------------------------------

namespace detail {

inline double auto_price_scale(const UserSaleVectors& v, const EstimationConfig& cfg) {
    double max_unit = 0.0;
    for (const auto& [_, nets] : v.by_user)
        for (const auto& [__, samples] : nets)
            for (double x : samples) max_unit = std::max(max_unit, x);
    if (!(max_unit > 0.0))
        throw EstimationError("cannot derive a price scale: no positive sale prices");
    // 5% headroom keeps the largest observed price inside the open support.
    return 1.05 * max_unit * cfg.price_unit;
}

inline std::vector<double> normalize_samples(const std::vector<double>& unit_prices,
                                             double price_scale, const EstimationConfig& cfg) {
    std::vector<double> out;
    out.reserve(unit_prices.size());
    for (double x : unit_prices)
        out.push_back(std::clamp(x * cfg.price_unit / price_scale, cfg.support_clamp,
                                 1.0 - cfg.support_clamp));
    return out;
}

} // namespace detail

/// Network-wide fit over every user's samples for `k`, normalized by
/// `price_scale` (eCPM). Errors if the network has no samples at all.
inline BetaParams global_params(const UserSaleVectors& v, const AdNetworkId& k,
                                const EstimationConfig& cfg, double price_scale) {
    std::vector<double> all;
    for (const auto& [_, nets] : v.by_user) {
        auto it = nets.find(k);
        if (it == nets.end()) continue;
        for (double x : it->second) all.push_back(x);
    }
    if (all.empty())
        throw EstimationError("network '" + k.value + "' has no sale samples anywhere");
    auto unit = detail::normalize_samples(all, price_scale, cfg);
    BetaParams p = fit_beta(unit, cfg);
    p.provenance = Provenance::global_network;
    return p;
}

/// Estimate the full matrix over explicit registries. Cell order of
/// preference: direct fit, pooled fit over the user's other networks when at
/// least `pool_min` of them have data, the network's global fit.
inline ValuationMatrix estimate_matrix(const UserSaleVectors& v,
                                       std::vector<std::string> users,
                                       std::vector<AdNetworkId> networks,
                                       const EstimationConfig& cfg = {}) {
    if (users.empty() || networks.empty())
        throw PreconditionError("estimation requires at least one user and one network");
    std::sort(users.begin(), users.end());
    std::sort(networks.begin(), networks.end());

    const double scale = cfg.price_scale > 0.0 ? cfg.price_scale : detail::auto_price_scale(v, cfg);

    std::vector<BetaParams> global(networks.size());
    for (std::size_t k = 0; k < networks.size(); ++k)
        global[k] = global_params(v, networks[k], cfg, scale);

    const std::size_t U = users.size();
    const std::size_t K = networks.size();
    std::vector<BetaParams> entries(U * K);

    auto fill_user = [&](std::size_t u) {
        const auto it = v.by_user.find(users[u]);
        const std::map<AdNetworkId, std::vector<double>>* nets =
            it == v.by_user.end() ? nullptr : &it->second;
        for (std::size_t k = 0; k < K; ++k) {
            BetaParams p;
            const std::vector<double>* direct = nullptr;
            if (nets) {
                auto dit = nets->find(networks[k]);
                if (dit != nets->end() && !dit->second.empty()) direct = &dit->second;
            }
            if (direct) {
                p = fit_beta(detail::normalize_samples(*direct, scale, cfg), cfg);
                p.provenance = Provenance::direct;
            } else {
                // pool the user's raw samples across other networks
                std::vector<double> pooled;
                int other_networks = 0;
                if (nets) {
                    for (const auto& [net, samples] : *nets) {
                        if (net == networks[k] || samples.empty()) continue;
                        ++other_networks;
                        pooled.insert(pooled.end(), samples.begin(), samples.end());
                    }
                }
                if (other_networks >= cfg.pool_min) {
                    p = fit_beta(detail::normalize_samples(pooled, scale, cfg), cfg);
                    p.provenance = Provenance::pooled_other_networks;
                } else {
                    p = global[k];
                }
            }
            entries[u * K + k] = p;
        }
    };

    const int threads = std::max(1, cfg.threads);
    if (threads == 1 || U < 2) {
        for (std::size_t u = 0; u < U; ++u) fill_user(u);
    } else {
        std::vector<std::thread> pool;
        const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(threads), U);
        for (std::size_t t = 0; t < n; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t u = t; u < U; u += n) fill_user(u);
            });
        for (auto& th : pool) th.join();
    }
    return ValuationMatrix(std::move(users), std::move(networks), scale, std::move(entries));
}

/// Convenience overload: registries are everything present in the vectors.
inline ValuationMatrix estimate_matrix(const UserSaleVectors& v, const EstimationConfig& cfg = {}) {
    return estimate_matrix(v, v.users(), v.networks(), cfg);
}

// ---- calibrated sampling --------------------------------------------------

/// Per-network multiplicative distortion coefficients. Networks without an
/// entry are implicitly at 1.0.
struct CalibrationCoefficients {
    std::map<std::string, double> zeta;

    static CalibrationCoefficients ones() { return {}; }

    double for_network(const AdNetworkId& id) const {
        auto it = zeta.find(id.value);
        return it == zeta.end() ? 1.0 : it->second;
    }

    bool operator==(const CalibrationCoefficients&) const = default;
};

/// Identity of one valuation draw. The same key always yields the same draw
/// regardless of evaluation order or thread count.
struct DrawKey {
    std::uint64_t seed = 1;
    std::uint32_t replica = 0;    // which copy of the user
    std::uint32_t occurrence = 0; // which instance of this network in the traversal
};

/// Raw unit-interval draw for cell (u, k) under `key`.
inline double raw_valuation_draw(const ValuationMatrix& b, std::uint32_t u, std::uint32_t k,
                                 const DrawKey& key) {
    const BetaParams& p = b.at(u, k);
    CounterRng rng(
        stream_key(key.seed, b.user_key(u), key.replica, b.network_key(k), key.occurrence));
    return rng.next_beta(p.alpha, p.beta);
}

/// Calibrated eCPM valuation: zeta_k * price_scale * Beta draw.
inline double sample_valuation(const ValuationMatrix& b, std::uint32_t u, std::uint32_t k,
                               const DrawKey& key, const CalibrationCoefficients& zeta) {
    return zeta.for_network(b.networks()[k]) * b.price_scale() * raw_valuation_draw(b, u, k, key);
}

} // namespace waterfall
