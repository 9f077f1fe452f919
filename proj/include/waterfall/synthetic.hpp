#pragma once

// Synthetic populations and the reference four-network benchmark.
//
// Oracle mode builds a valuation matrix whose rows all equal the scenario's
// per-network Beta truth: ideal for optimizer benchmarks because the optimum
// can be brute-forced against the same matrix. Pipeline mode instead draws
// per-user sale records and re-estimates the matrix from them, exercising
// the full ingest + estimation path end to end.

#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "ingest.hpp"
#include "simulate.hpp"
#include "valuation.hpp"

namespace waterfall {

struct SyntheticScenario {
    std::vector<std::pair<AdNetworkId, BetaParams>> networks;
    std::int64_t user_count = 1;
    std::uint64_t seed = 1;
    PriceGrid grid;
    double price_scale = 0.0;
    WaterfallConstraints constraints;
    /// Named starting waterfalls, in a fixed order:
    /// true-order, empty, average-price, reversed-a, reversed-b.
    std::vector<std::pair<std::string, Waterfall>> init_set;
};

namespace detail {

inline std::string synthetic_user_id(std::int64_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "u%06lld", static_cast<long long>(i));
    return buf;
}

/// Indices of `networks` ordered by Beta mean, descending (ties keep
/// registry order).
inline std::vector<std::size_t> order_by_mean_desc(
    const std::vector<std::pair<AdNetworkId, BetaParams>>& networks) {
    std::vector<std::size_t> idx(networks.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return networks[a].second.mean() > networks[b].second.mean();
    });
    return idx;
}

inline double nearest_grid_value(const PriceGrid& grid, double target) {
    double best = grid.values().front();
    for (double v : grid.values())
        if (std::abs(v - target) < std::abs(best - target)) best = v;
    return best;
}

} // namespace detail

/// Build a scenario over explicit networks and grid. The five starting
/// waterfalls come from the scenario seed: one instance per network, ordered
/// either with the true mean ranking (descending valuation) or against it,
/// with prices drawn from the grid.
inline SyntheticScenario build_scenario(std::vector<std::pair<AdNetworkId, BetaParams>> networks,
                                        std::int64_t user_count, std::uint64_t seed,
                                        PriceGrid grid) {
    if (user_count < 1) throw PreconditionError("scenario needs at least one user");
    if (networks.empty()) throw PreconditionError("scenario needs at least one network");

    SyntheticScenario s;
    s.networks = std::move(networks);
    s.user_count = user_count;
    s.seed = seed;
    s.grid = std::move(grid);
    s.price_scale = s.grid.max();
    s.constraints.max_length = s.networks.size();
    s.constraints.max_instances_per_network = 1;
    s.constraints.canonical_descending = true;

    const std::size_t K = s.networks.size();
    auto by_mean = detail::order_by_mean_desc(s.networks);

    auto draw_prices_desc = [&](std::string_view name) {
        CounterRng rng(stream_key(seed, fnv1a64("init"), fnv1a64(name)));
        std::vector<double> p;
        p.reserve(K);
        for (std::size_t i = 0; i < K; ++i)
            p.push_back(s.grid.values()[rng.next_u64() % s.grid.size()]);
        std::sort(p.rbegin(), p.rend());
        return p;
    };

    // true-order: best network first, random descending prices
    {
        Waterfall w;
        auto prices = draw_prices_desc("true-order");
        for (std::size_t i = 0; i < K; ++i)
            w.instances.push_back({s.networks[by_mean[i]].first, prices[i]});
        s.init_set.emplace_back("true-order", std::move(w));
    }
    s.init_set.emplace_back("empty", Waterfall{});
    // average-price: every network at the grid value nearest the average
    // network mean valuation, best network first
    {
        double mean_sum = 0.0;
        for (const auto& [_, p] : s.networks) mean_sum += p.mean();
        double price = detail::nearest_grid_value(s.grid, s.price_scale * mean_sum /
                                                               static_cast<double>(K));
        Waterfall w;
        for (std::size_t i = 0; i < K; ++i)
            w.instances.push_back({s.networks[by_mean[i]].first, price});
        s.init_set.emplace_back("average-price", std::move(w));
    }
    // reversed: worst network gets the highest price
    for (const char* name : {"reversed-a", "reversed-b"}) {
        Waterfall w;
        auto prices = draw_prices_desc(name);
        for (std::size_t i = 0; i < K; ++i)
            w.instances.push_back({s.networks[by_mean[K - 1 - i]].first, prices[i]});
        s.init_set.emplace_back(name, std::move(w));
    }
    return s;
}

/// The reference benchmark: four networks with Beta (1,6), (2,6), (10,5),
/// (6,1) and a 30-value integer price grid.
inline SyntheticScenario paper_benchmark(std::int64_t scale, std::uint64_t seed = 1) {
    std::vector<std::pair<AdNetworkId, BetaParams>> nets = {
        {AdNetworkId("A"), {1.0, 6.0, Provenance::direct}},
        {AdNetworkId("B"), {2.0, 6.0, Provenance::direct}},
        {AdNetworkId("C"), {10.0, 5.0, Provenance::direct}},
        {AdNetworkId("D"), {6.0, 1.0, Provenance::direct}},
    };
    return build_scenario(std::move(nets), scale, seed, PriceGrid::from_range(1.0, 30.0, 1.0));
}

// ---- oracle mode -------------------------------------------------------------

/// Population-level truth: every user's row carries the network's exact
/// parameters.
inline ValuationMatrix oracle_matrix(const SyntheticScenario& s) {
    std::vector<std::string> users;
    users.reserve(static_cast<std::size_t>(s.user_count));
    for (std::int64_t i = 0; i < s.user_count; ++i)
        users.push_back(detail::synthetic_user_id(i));

    std::vector<AdNetworkId> nets;
    std::vector<BetaParams> per_net;
    for (const auto& [id, p] : s.networks) {
        nets.push_back(id);
        per_net.push_back(p);
    }
    // registries are sorted; remap parameters to the sorted column order
    std::vector<std::size_t> col(nets.size());
    for (std::size_t i = 0; i < col.size(); ++i) col[i] = i;
    std::sort(col.begin(), col.end(),
              [&](std::size_t a, std::size_t b) { return nets[a] < nets[b]; });
    std::vector<AdNetworkId> sorted_nets;
    std::vector<BetaParams> sorted_params;
    for (std::size_t c : col) {
        sorted_nets.push_back(nets[c]);
        sorted_params.push_back(per_net[c]);
    }

    std::vector<BetaParams> entries;
    entries.reserve(users.size() * sorted_nets.size());
    for (std::size_t u = 0; u < users.size(); ++u)
        for (const auto& p : sorted_params) entries.push_back(p);
    return ValuationMatrix(std::move(users), std::move(sorted_nets), s.price_scale,
                           std::move(entries));
}

// ---- pipeline mode -------------------------------------------------------------

struct PipelineOptions {
    int days = 30;               // training days of history
    int batches_per_day = 2;     // independent sale batches per network per day
    int networks_per_user = 0;   // 0 = every network; else a seeded subset
    std::int64_t first_day = 20486; // 2026-02-03
    std::int64_t max_batch_impressions = 120;
};

/// Draw per-user sale records from the scenario truth. Each batch is one
/// aggregated record: a day/hour, an impression count, and revenue equal to
/// impressions times a unit price drawn from the user's network Beta.
inline SaleEventDataset synthetic_sales(const SyntheticScenario& s, const PipelineOptions& opt) {
    if (opt.days < 1 || opt.batches_per_day < 1)
        throw PreconditionError("pipeline generation needs at least one day and one batch");
    SaleEventDataset ds;
    const std::uint64_t gen_seed = derive_seed(s.seed, "synthetic-sales");
    const double unit_scale = s.price_scale / 1000.0; // eCPM scale -> per-impression dollars

    for (std::int64_t ui = 0; ui < s.user_count; ++ui) {
        const std::string user = detail::synthetic_user_id(ui);
        const std::uint64_t user_key = fnv1a64(user);

        // choose which networks this user has history on
        std::vector<std::size_t> nets(s.networks.size());
        for (std::size_t i = 0; i < nets.size(); ++i) nets[i] = i;
        if (opt.networks_per_user > 0 &&
            static_cast<std::size_t>(opt.networks_per_user) < nets.size()) {
            CounterRng pick(stream_key(gen_seed, user_key, fnv1a64("networks")));
            for (std::size_t i = nets.size(); i > 1; --i)
                std::swap(nets[i - 1], nets[pick.next_u64() % i]);
            nets.resize(static_cast<std::size_t>(opt.networks_per_user));
            std::sort(nets.begin(), nets.end());
        }

        for (std::size_t k : nets) {
            const auto& [net_id, beta] = s.networks[k];
            const std::uint64_t net_key = key_of(net_id);
            for (int d = 0; d < opt.days; ++d) {
                for (int batch = 0; batch < opt.batches_per_day; ++batch) {
                    CounterRng rng(stream_key(gen_seed, user_key, net_key,
                                              static_cast<std::uint64_t>(d),
                                              static_cast<std::uint64_t>(batch)));
                    double x = rng.next_beta(beta.alpha, beta.beta);
                    std::int64_t impressions =
                        1 + static_cast<std::int64_t>(
                                rng.next_u64() %
                                static_cast<std::uint64_t>(std::max<std::int64_t>(
                                    opt.max_batch_impressions, 1)));
                    SaleRecord r;
                    r.day = static_cast<std::int32_t>(opt.first_day + d);
                    r.hour = static_cast<std::int32_t>(rng.next_u64() % 24);
                    r.network = net_id;
                    r.user = user;
                    r.impressions = impressions;
                    r.revenue = static_cast<double>(impressions) * x * unit_scale;
                    ds.records.push_back(std::move(r));
                }
            }
        }
    }

    if (!ds.records.empty()) {
        std::stable_sort(ds.records.begin(), ds.records.end(),
                         [](const SaleRecord& a, const SaleRecord& b) {
                             if (a.day != b.day) return a.day < b.day;
                             if (a.hour != b.hour) return a.hour < b.hour;
                             if (a.user != b.user) return a.user < b.user;
                             return a.network < b.network;
                         });
        ds.first_day = ds.records.front().day;
        ds.last_day = ds.records.back().day;
    }
    return ds;
}

enum class MatrixMode : std::uint8_t { oracle, pipeline };

/// Oracle mode returns the truth matrix; pipeline mode draws sales and
/// re-estimates. Pipeline estimation pins the scenario price scale so
/// recovered parameters are directly comparable with the truth.
inline ValuationMatrix generate_matrix(const SyntheticScenario& s,
                                       MatrixMode mode = MatrixMode::oracle,
                                       const PipelineOptions& opt = {},
                                       EstimationConfig est = {}) {
    if (mode == MatrixMode::oracle) return oracle_matrix(s);
    est.price_scale = s.price_scale;
    return estimate_matrix(vectorize(synthetic_sales(s, opt)), est);
}

} // namespace waterfall
