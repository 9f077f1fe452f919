#pragma once

// Waterfall configuration search.
//
// Neighborhood moves: remove an instance, reprice one a single grid step up
// or down, or add a new (network, price) instance. Hill climbing adopts the
// best strictly-improving neighbor. The lookahead search goes one level
// deeper: it evaluates every neighbor-of-neighbor and adopts the first-level
// move under which the best second-level revenue was found, which lets it
// cross one-move valleys that stall hill climbing. Every candidate in one
// search is simulated under the same seed, so comparisons use common random
// numbers and the search is fully deterministic.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "core.hpp"
#include "simulate.hpp"
#include "valuation.hpp"

namespace waterfall {

// ---- configuration ---------------------------------------------------------

struct SearchConfig {
    int max_iter = 50;
    double epsilon = 0.0; // minimum strict improvement worth adopting
    WaterfallConstraints constraints;
    PriceGrid grid;
    std::vector<AdNetworkId> networks; // universe for add moves
    std::uint64_t candidate_cap = 500000; // exhaustive enumeration budget
};

// ---- moves -----------------------------------------------------------------

enum class MoveKind : std::uint8_t { init, remove, reprice_up, reprice_down, add };

inline const char* to_string(MoveKind k) {
    switch (k) {
        case MoveKind::init: return "init";
        case MoveKind::add: return "add";
        case MoveKind::remove: return "remove";
        case MoveKind::reprice_up: return "reprice_up";
        case MoveKind::reprice_down: return "reprice_down";
    }
    return "unknown";
}

struct Move {
    MoveKind kind;
    std::string detail;
    Waterfall result; // canonicalized, valid under the configured constraints
};

/// Enumerate the legal one-move neighbors of `w` in canonical order:
/// removals by position, reprice-ups by position, reprice-downs by position,
/// then additions by (network registry order, ascending grid price). Results
/// are canonicalized; moves producing invalid waterfalls are dropped, so the
/// count is at most 3r + M*K.
inline std::vector<Move> neighbors(const Waterfall& w, const SearchConfig& cfg) {
    if (cfg.grid.empty()) throw PreconditionError("search requires a non-empty price grid");
    std::vector<Move> out;
    const auto& ins = w.instances;

    auto push_if_valid = [&](MoveKind kind, std::string detail, Waterfall candidate) {
        candidate = canonicalize(candidate, cfg.constraints);
        if (!is_valid(candidate, cfg.constraints, cfg.grid)) return;
        out.push_back({kind, std::move(detail), std::move(candidate)});
    };

    auto label = [&](const Instance& inst) {
        return inst.network.value + "@" + format_double(inst.price);
    };

    for (std::size_t i = 0; i < ins.size(); ++i) {
        Waterfall c = w;
        c.instances.erase(c.instances.begin() + static_cast<std::ptrdiff_t>(i));
        push_if_valid(MoveKind::remove, label(ins[i]) + " at " + std::to_string(i), std::move(c));
    }
    for (std::size_t i = 0; i < ins.size(); ++i) {
        auto up = cfg.grid.step_up(ins[i].price);
        if (!up) continue;
        Waterfall c = w;
        c.instances[i].price = *up;
        push_if_valid(MoveKind::reprice_up,
                      label(ins[i]) + "->" + format_double(*up) + " at " + std::to_string(i),
                      std::move(c));
    }
    for (std::size_t i = 0; i < ins.size(); ++i) {
        auto down = cfg.grid.step_down(ins[i].price);
        if (!down) continue;
        Waterfall c = w;
        c.instances[i].price = *down;
        push_if_valid(MoveKind::reprice_down,
                      label(ins[i]) + "->" + format_double(*down) + " at " + std::to_string(i),
                      std::move(c));
    }
    for (const auto& net : cfg.networks) {
        for (double p : cfg.grid.values()) {
            Waterfall c = w;
            c.instances.push_back({net, p});
            push_if_valid(MoveKind::add, net.value + "@" + format_double(p), std::move(c));
        }
    }
    return out;
}

// ---- traces -----------------------------------------------------------------

struct TraceEntry {
    int iteration = 0;
    std::string move_kind;
    std::string move_detail;
    double revenue = 0.0;         // search objective after this iteration
    double adopted_revenue = 0.0; // simulated revenue of the adopted waterfall
    std::uint64_t candidates_evaluated = 0;
    std::uint64_t cumulative_candidates = 0;
    Waterfall waterfall; // the waterfall held after this iteration
};

struct SearchTrace {
    std::string algorithm;
    std::vector<TraceEntry> entries;
    bool converged = false;             // stopped on epsilon, not iteration budget
    std::uint64_t total_candidates = 0; // includes the final unadopted scan
};

struct SearchOutcome {
    Waterfall final_waterfall;
    double final_revenue = 0.0; // objective value at termination
    Waterfall best_waterfall;   // best single waterfall ever simulated
    double best_revenue = 0.0;
    SearchTrace trace;
};

// ---- hill climbing -----------------------------------------------------------

namespace detail {

inline void require_valid(const Waterfall& w, const SearchConfig& cfg, const char* what) {
    auto v = validate(w, cfg.constraints, cfg.grid);
    if (!v.empty())
        throw ValidationError(std::string(what) + ": " + v.front().message);
}

inline std::uint32_t cache_depth(const SearchConfig& cfg) {
    return static_cast<std::uint32_t>(std::max<std::size_t>(cfg.constraints.max_instances_per_network, 1));
}

} // namespace detail

/// Steepest-ascent hill climbing over the move neighborhood. Adopts the best
/// neighbor only when it improves the current revenue by more than epsilon;
/// ties between equally good neighbors go to the lowest move index.
inline SearchOutcome hill_climb(const Waterfall& w0, const ValuationMatrix& b,
                                const CalibrationCoefficients& zeta, const SearchConfig& cfg,
                                const SimulationConfig& sim_cfg) {
    Waterfall current = canonicalize(w0, cfg.constraints);
    detail::require_valid(current, cfg, "initial waterfall");

    Simulator sim(b, sim_cfg);
    sim.build_draw_cache(detail::cache_depth(cfg));

    SearchOutcome out;
    out.trace.algorithm = "sns";

    double current_rev = sim.run(current, zeta).revenue;
    std::uint64_t total = 1;
    out.best_waterfall = current;
    out.best_revenue = current_rev;
    out.trace.entries.push_back({0, "init", "", current_rev, current_rev, 1, 1, current});

    for (int it = 1; it <= cfg.max_iter; ++it) {
        auto moves = neighbors(current, cfg);
        if (moves.empty()) {
            out.trace.converged = true;
            break;
        }
        std::size_t best_i = 0;
        double best_rev = 0.0;
        for (std::size_t i = 0; i < moves.size(); ++i) {
            double r = sim.run(moves[i].result, zeta).revenue;
            ++total;
            if (r > out.best_revenue) {
                out.best_revenue = r;
                out.best_waterfall = moves[i].result;
            }
            if (i == 0 || r > best_rev) {
                best_rev = r;
                best_i = i;
            }
        }
        if (!(best_rev - current_rev > cfg.epsilon)) {
            out.trace.converged = true;
            break;
        }
        current = moves[best_i].result;
        current_rev = best_rev;
        out.trace.entries.push_back({it, to_string(moves[best_i].kind), moves[best_i].detail,
                                     current_rev, current_rev, moves.size(), total, current});
    }

    out.final_waterfall = current;
    out.final_revenue = current_rev;
    out.trace.total_candidates = total;
    return out;
}

// ---- two-level lookahead -------------------------------------------------------

/// Lookahead search: each iteration evaluates every neighbor-of-neighbor of
/// the current waterfall and adopts the first-level move under which the best
/// second-level revenue was found (ties to the lowest first-level move
/// index, then lowest second-level index). The objective it maximizes is
/// that two-move potential; the adopted waterfall's own simulated revenue is
/// recorded alongside but does not drive adoption.
inline SearchOutcome mcts_search(const Waterfall& w0, const ValuationMatrix& b,
                                 const CalibrationCoefficients& zeta, const SearchConfig& cfg,
                                 const SimulationConfig& sim_cfg) {
    Waterfall current = canonicalize(w0, cfg.constraints);
    detail::require_valid(current, cfg, "initial waterfall");

    Simulator sim(b, sim_cfg);
    sim.build_draw_cache(detail::cache_depth(cfg));

    SearchOutcome out;
    out.trace.algorithm = "mcts";

    double objective = sim.run(current, zeta).revenue;
    std::uint64_t total = 1;
    out.best_waterfall = current;
    out.best_revenue = objective;
    out.trace.entries.push_back({0, "init", "", objective, objective, 1, 1, current});

    for (int it = 1; it <= cfg.max_iter; ++it) {
        auto moves = neighbors(current, cfg);
        if (moves.empty()) {
            out.trace.converged = true;
            break;
        }
        std::uint64_t iter_candidates = 0;
        bool have_best = false;
        std::size_t best_g = 0;
        double best_subtree = 0.0;
        for (std::size_t gi = 0; gi < moves.size(); ++gi) {
            auto grand = neighbors(moves[gi].result, cfg);
            for (const auto& gg : grand) {
                double r = sim.run(gg.result, zeta).revenue;
                ++iter_candidates;
                if (r > out.best_revenue) {
                    out.best_revenue = r;
                    out.best_waterfall = gg.result;
                }
                if (!have_best || r > best_subtree) {
                    have_best = true;
                    best_subtree = r;
                    best_g = gi;
                }
            }
        }
        total += iter_candidates;
        if (!have_best || !(best_subtree - objective > cfg.epsilon)) {
            out.trace.converged = true;
            break;
        }
        current = moves[best_g].result;
        objective = best_subtree;
        double adopted_rev = sim.run(current, zeta).revenue;
        ++total;
        if (adopted_rev > out.best_revenue) {
            out.best_revenue = adopted_rev;
            out.best_waterfall = current;
        }
        out.trace.entries.push_back({it, to_string(moves[best_g].kind), moves[best_g].detail,
                                     objective, adopted_rev, iter_candidates + 1, total, current});
    }

    out.final_waterfall = current;
    out.final_revenue = objective;
    out.trace.total_candidates = total;
    return out;
}

// ---- exhaustive oracle -----------------------------------------------------------

struct OracleResult {
    Waterfall waterfall;
    double revenue = 0.0;
    std::uint64_t candidates_enumerated = 0;
    std::uint64_t candidates_evaluated = 0;
};

namespace detail {

inline std::uint64_t count_multiset_permutations(std::vector<AdNetworkId> shape) {
    std::sort(shape.begin(), shape.end());
    // r! / prod(multiplicity!) computed without overflow for practical r
    double perms = 1.0;
    for (std::size_t i = 2; i <= shape.size(); ++i) perms *= static_cast<double>(i);
    std::size_t i = 0;
    while (i < shape.size()) {
        std::size_t j = i;
        double fact = 1.0;
        std::size_t run = 0;
        while (j < shape.size() && shape[j] == shape[i]) {
            ++run;
            fact *= static_cast<double>(run);
            ++j;
        }
        perms /= fact;
        i = j;
    }
    return static_cast<std::uint64_t>(perms + 0.5);
}

} // namespace detail

/// Brute-force optimum over every ordering of `shape` crossed with every
/// per-instance price assignment from the grid. Orderings are free: the
/// enumeration does not impose descending prices. Candidates that would
/// duplicate a (network, price) pair are skipped. Refuses budgets above
/// cfg.candidate_cap.
inline OracleResult exhaustive_optimum(const std::vector<AdNetworkId>& shape,
                                       const ValuationMatrix& b,
                                       const CalibrationCoefficients& zeta,
                                       const SearchConfig& cfg,
                                       const SimulationConfig& sim_cfg) {
    if (shape.empty()) throw PreconditionError("exhaustive search needs a non-empty shape");
    if (cfg.grid.empty()) throw PreconditionError("exhaustive search requires a price grid");

    const std::size_t r = shape.size();
    const std::size_t P = cfg.grid.size();
    const std::uint64_t perms = detail::count_multiset_permutations(shape);
    double combos = 1.0;
    for (std::size_t i = 0; i < r; ++i) combos *= static_cast<double>(P);
    const double total_est = static_cast<double>(perms) * combos;
    if (total_est > static_cast<double>(cfg.candidate_cap))
        throw CapacityError("exhaustive enumeration would evaluate about " +
                            std::to_string(static_cast<std::uint64_t>(total_est)) +
                            " candidates, above the budget of " +
                            std::to_string(cfg.candidate_cap));

    // occurrence depth equals the largest network multiplicity in the shape
    std::uint32_t max_occ = 1;
    {
        std::vector<AdNetworkId> sorted = shape;
        std::sort(sorted.begin(), sorted.end());
        std::uint32_t run = 1;
        for (std::size_t i = 1; i < sorted.size(); ++i) {
            run = sorted[i] == sorted[i - 1] ? run + 1 : 1;
            max_occ = std::max(max_occ, run);
        }
    }

    Simulator sim(b, sim_cfg);
    sim.build_draw_cache(max_occ);

    OracleResult out;
    std::vector<AdNetworkId> order = shape;
    std::sort(order.begin(), order.end());

    Waterfall w;
    w.instances.resize(r);
    std::vector<std::size_t> price_idx(r, 0);

    do {
        std::fill(price_idx.begin(), price_idx.end(), 0);
        for (;;) {
            ++out.candidates_enumerated;
            bool duplicate = false;
            for (std::size_t i = 0; i < r && !duplicate; ++i) {
                w.instances[i] = {order[i], cfg.grid.values()[price_idx[i]]};
                for (std::size_t j = 0; j < i; ++j)
                    if (w.instances[j] == w.instances[i]) duplicate = true;
            }
            if (!duplicate) {
                double rev = sim.run(w, zeta).revenue;
                ++out.candidates_evaluated;
                if (out.candidates_evaluated == 1 || rev > out.revenue) {
                    out.revenue = rev;
                    out.waterfall = w;
                }
            }
            // odometer over price assignments, rightmost digit fastest
            std::size_t d = r;
            bool rolled_over = false;
            for (;;) {
                if (d == 0) {
                    rolled_over = true;
                    break;
                }
                --d;
                if (++price_idx[d] < P) break;
                price_idx[d] = 0;
            }
            if (rolled_over) break;
        }
    } while (std::next_permutation(order.begin(), order.end()));

    return out;
}

} // namespace waterfall
