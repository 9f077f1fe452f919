#pragma once

// Shared fixture builders for the test suite.

#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "waterfall/valuation.hpp"

namespace testsupport {

/// Beta parameters so concentrated that every draw lands within ~1e-3 of m.
inline waterfall::BetaParams point_mass(double m) {
    return waterfall::BetaParams{m * 1e8, (1.0 - m) * 1e8, waterfall::Provenance::direct};
}

/// Matrix with explicit per-cell means, each a near-point-mass Beta.
/// means[u][k] follows the sorted order of users and networks.
inline waterfall::ValuationMatrix mean_matrix(std::vector<std::string> users,
                                              std::vector<waterfall::AdNetworkId> networks,
                                              double price_scale,
                                              const std::vector<std::vector<double>>& means) {
    std::vector<waterfall::BetaParams> entries;
    entries.reserve(users.size() * networks.size());
    for (std::size_t u = 0; u < users.size(); ++u)
        for (std::size_t k = 0; k < networks.size(); ++k)
            entries.push_back(point_mass(means[u][k]));
    return waterfall::ValuationMatrix(std::move(users), std::move(networks), price_scale,
                                      std::move(entries));
}

/// Random but reproducible matrix with genuine spread in every cell.
/// Networks are single letters from 'A'.
inline waterfall::ValuationMatrix stochastic_matrix(std::size_t users, std::size_t networks,
                                                    double price_scale, std::uint64_t seed);

inline std::vector<std::string> numbered_users(std::size_t n, const char* prefix = "u") {
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i);
        out.emplace_back(buf);
    }
    return out;
}

inline waterfall::Waterfall make_waterfall(
    std::initializer_list<std::pair<const char*, double>> instances) {
    waterfall::Waterfall w;
    for (const auto& [net, price] : instances)
        w.instances.push_back({waterfall::AdNetworkId(net), price});
    return w;
}

inline waterfall::ValuationMatrix stochastic_matrix(std::size_t users, std::size_t networks,
                                                    double price_scale, std::uint64_t seed) {
    using namespace waterfall;
    CounterRng rng(stream_key(seed, fnv1a64("stochastic-matrix")));
    std::vector<AdNetworkId> nets;
    for (std::size_t k = 0; k < networks; ++k)
        nets.emplace_back(std::string(1, static_cast<char>('A' + k)));
    std::vector<BetaParams> entries;
    entries.reserve(users * networks);
    for (std::size_t i = 0; i < users * networks; ++i) {
        double a = 0.8 + 6.0 * rng.next_unit();
        double b = 0.8 + 6.0 * rng.next_unit();
        entries.push_back(BetaParams{a, b, Provenance::direct});
    }
    return ValuationMatrix(numbered_users(users), std::move(nets), price_scale,
                           std::move(entries));
}

} // namespace testsupport
