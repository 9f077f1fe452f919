#pragma once

// Waterfall traversal simulation.
//
// Each population slot (user replica) walks the waterfall top to bottom and
// buys at the first instance whose sampled valuation strictly exceeds the
// instance price. Draws are keyed by (seed, user, replica, network,
// occurrence), so two waterfalls sharing an instance see identical draws for
// it: candidate comparisons use common random numbers, and results do not
// depend on evaluation order or thread count.

#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "core.hpp"
#include "valuation.hpp"

namespace waterfall {

struct PopulationEntry {
    std::string user_id;
    std::uint32_t count = 1;
};

struct SimulationConfig {
    std::uint64_t seed = 1;
    int threads = 1;
    double per_mille_divisor = 1000.0;
    /// Users to simulate, with multiplicity. Empty means every matrix user once.
    std::vector<PopulationEntry> population;
};

struct SimulationResult {
    ImpressionVector q_prime;
    std::uint64_t requests = 0;   // every instance visit across all slots
    std::int64_t unsold_users = 0;
    double revenue = 0.0;
    std::uint64_t seed = 0;
};

/// Reusable simulation state: resolved population slots plus an optional
/// cache of raw valuation draws. The cache stores unit-interval draws only,
/// so one cache serves every price, ordering, and calibration coefficient;
/// occurrences beyond its depth fall back to direct keyed draws, which are
/// bit-identical to cached ones by construction.
class Simulator {
public:
    Simulator(const ValuationMatrix& b, SimulationConfig cfg) : b_(b), cfg_(std::move(cfg)) {
        if (cfg_.population.empty()) {
            slots_.reserve(b_.user_count());
            for (std::uint32_t u = 0; u < b_.user_count(); ++u) slots_.push_back({u, 0});
        } else {
            std::unordered_map<std::string, std::uint32_t> replicas_used;
            for (const auto& e : cfg_.population) {
                if (e.count == 0)
                    throw PreconditionError("population multiplicity must be at least 1");
                std::uint32_t u = b_.user_index_of(e.user_id);
                std::uint32_t& base = replicas_used[e.user_id];
                for (std::uint32_t r = 0; r < e.count; ++r) slots_.push_back({u, base + r});
                base += e.count;
            }
        }
        if (!(cfg_.per_mille_divisor > 0.0))
            throw PreconditionError("per-mille divisor must be positive");
    }

    std::size_t slot_count() const { return slots_.size(); }
    const SimulationConfig& config() const { return cfg_; }
    const ValuationMatrix& matrix() const { return b_; }

    /// Precompute raw draws for occurrences [0, max_occurrences) of every
    /// (slot, network) pair.
    void build_draw_cache(std::uint32_t max_occurrences) {
        const std::size_t K = b_.network_count();
        max_occ_ = max_occurrences;
        cache_.assign(slots_.size() * K * max_occ_, 0.0);
        auto fill = [&](std::size_t s) {
            const Slot& slot = slots_[s];
            for (std::size_t k = 0; k < K; ++k)
                for (std::uint32_t occ = 0; occ < max_occ_; ++occ)
                    cache_[(s * K + k) * max_occ_ + occ] = raw_valuation_draw(
                        b_, slot.user, static_cast<std::uint32_t>(k),
                        DrawKey{cfg_.seed, slot.replica, occ});
        };
        run_partitioned(slots_.size(), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t s = lo; s < hi; ++s) fill(s);
        });
    }

    SimulationResult run(const Waterfall& w, const CalibrationCoefficients& zeta) const {
        const std::size_t n = w.instances.size();

        // structural checks that do not need a grid or constraints
        std::vector<std::uint32_t> net_idx(n);
        std::vector<std::uint32_t> occurrence(n);
        std::vector<double> zeta_scale(n);
        for (std::size_t i = 0; i < n; ++i) {
            net_idx[i] = b_.network_index_of(w.instances[i].network);
            std::uint32_t occ = 0;
            for (std::size_t j = 0; j < i; ++j) {
                if (net_idx[j] != net_idx[i]) continue;
                if (std::abs(w.instances[j].price - w.instances[i].price) <=
                    1e-12 * std::max(1.0, w.instances[i].price))
                    throw ValidationError("duplicate (network, price) instance at position " +
                                          std::to_string(i));
                ++occ;
            }
            occurrence[i] = occ;
            zeta_scale[i] = zeta.for_network(w.instances[i].network) * b_.price_scale();
        }

        struct Partial {
            ImpressionVector q;
            std::uint64_t requests = 0;
            std::int64_t unsold = 0;
        };

        std::vector<Partial> parts;
        run_partitioned(slots_.size(), [&](std::size_t lo, std::size_t hi, std::size_t part) {
            Partial& p = parts[part];
            p.q.assign(n, 0);
            for (std::size_t s = lo; s < hi; ++s) {
                const Slot& slot = slots_[s];
                bool sold = false;
                for (std::size_t i = 0; i < n; ++i) {
                    ++p.requests;
                    double x = draw(s, slot, net_idx[i], occurrence[i]);
                    if (zeta_scale[i] * x > w.instances[i].price) {
                        ++p.q[i];
                        sold = true;
                        break;
                    }
                }
                if (!sold) ++p.unsold;
            }
        }, &parts);

        SimulationResult out;
        out.q_prime.assign(n, 0);
        for (const auto& p : parts) {
            for (std::size_t i = 0; i < n; ++i) out.q_prime[i] += p.q[i];
            out.requests += p.requests;
            out.unsold_users += p.unsold;
        }
        out.revenue = revenue(w, out.q_prime, cfg_.per_mille_divisor);
        out.seed = cfg_.seed;
        return out;
    }

private:
    struct Slot {
        std::uint32_t user;
        std::uint32_t replica;
    };

    double draw(std::size_t s, const Slot& slot, std::uint32_t k, std::uint32_t occ) const {
        if (occ < max_occ_ && !cache_.empty())
            return cache_[(s * b_.network_count() + k) * max_occ_ + occ];
        return raw_valuation_draw(b_, slot.user, k, DrawKey{cfg_.seed, slot.replica, occ});
    }

    /// Split [0, total) into deterministic contiguous chunks, one per thread.
    /// Results must be merged in chunk order by the caller.
    template <typename Fn>
    void run_partitioned(std::size_t total, Fn&& fn) const {
        const std::size_t t = chunk_count(total);
        if (t <= 1) {
            fn(0, total);
            return;
        }
        std::vector<std::thread> pool;
        for (std::size_t c = 0; c < t; ++c) {
            auto [lo, hi] = chunk_bounds(total, t, c);
            pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
        }
        for (auto& th : pool) th.join();
    }

    template <typename Fn, typename Part>
    void run_partitioned(std::size_t total, Fn&& fn, std::vector<Part>* parts) const {
        const std::size_t t = chunk_count(total);
        parts->resize(t);
        if (t <= 1) {
            fn(0, total, 0);
            return;
        }
        std::vector<std::thread> pool;
        for (std::size_t c = 0; c < t; ++c) {
            auto [lo, hi] = chunk_bounds(total, t, c);
            pool.emplace_back([&fn, lo, hi, c] { fn(lo, hi, c); });
        }
        for (auto& th : pool) th.join();
    }

    std::size_t chunk_count(std::size_t total) const {
        std::size_t t = static_cast<std::size_t>(std::max(1, cfg_.threads));
        return std::min(t, std::max<std::size_t>(total, 1));
    }

    static std::pair<std::size_t, std::size_t> chunk_bounds(std::size_t total, std::size_t t,
                                                            std::size_t c) {
        std::size_t base = total / t, rem = total % t;
        std::size_t lo = c * base + std::min(c, rem);
        std::size_t hi = lo + base + (c < rem ? 1 : 0);
        return {lo, hi};
    }

    const ValuationMatrix& b_;
    SimulationConfig cfg_;
    std::vector<Slot> slots_;
    std::vector<double> cache_;
    std::uint32_t max_occ_ = 0;
};

/// One-shot simulation of a waterfall.
inline SimulationResult run_waterfall(const ValuationMatrix& b, const Waterfall& w,
                                      const CalibrationCoefficients& zeta,
                                      const SimulationConfig& cfg) {
    return Simulator(b, cfg).run(w, zeta);
}

/// Counterfactual evaluation of a candidate against the same draw keys as
/// any other waterfall under this seed: shared instances see identical
/// draws, so differences in outcome are attributable to the configuration.
inline SimulationResult replay_counterfactual(const ValuationMatrix& b, const Waterfall& candidate,
                                              const CalibrationCoefficients& zeta,
                                              const SimulationConfig& cfg) {
    return run_waterfall(b, candidate, zeta, cfg);
}

} // namespace waterfall
