#pragma once

// Fidelity scoring and calibration.
//
// The fidelity score compares a simulated impression vector against the
// observed one: sum over instances of the relative impression error times
// the instance's share of observed revenue. Calibration searches per-network
// multiplicative coefficients (zeta) that minimize the score, by coordinate
// descent over a fixed multiplier grid. All evaluations share one seed, so
// the search compares candidates under common random numbers.

#include <cstdint>
#include <string>
#include <vector>

#include "core.hpp"
#include "simulate.hpp"
#include "valuation.hpp"

namespace waterfall {

// ---- score weights -------------------------------------------------------

/// Observed revenue share per instance: w_i = q_i p_i / sum_j q_j p_j.
struct ScoreWeights {
    std::vector<double> values;
};

inline ScoreWeights score_weights(const Waterfall& w, const ImpressionVector& q_observed) {
    if (q_observed.size() != w.instances.size())
        throw DimensionError("observed vector length does not match waterfall length");
    double total = 0.0;
    for (std::size_t i = 0; i < q_observed.size(); ++i) {
        if (q_observed[i] < 0) throw PreconditionError("impression counts must be non-negative");
        total += static_cast<double>(q_observed[i]) * w.instances[i].price;
    }
    if (!(total > 0.0))
        throw PreconditionError("observed impressions carry no revenue; weights are undefined");
    ScoreWeights out;
    out.values.reserve(q_observed.size());
    for (std::size_t i = 0; i < q_observed.size(); ++i)
        out.values.push_back(static_cast<double>(q_observed[i]) * w.instances[i].price / total);
    return out;
}

// ---- fidelity score --------------------------------------------------------

struct ScoreDiagnostics {
    /// Instances with zero observed impressions: their relative error is
    /// undefined, so they contribute nothing (their weight is zero anyway).
    std::vector<std::size_t> zero_observed_positions;
};

inline double fidelity_score(const ImpressionVector& q_simulated,
                             const ImpressionVector& q_observed, const ScoreWeights& weights,
                             ScoreDiagnostics* diag = nullptr) {
    if (q_simulated.size() != q_observed.size() || weights.values.size() != q_observed.size())
        throw DimensionError("fidelity score requires equal-length vectors and weights");
    double score = 0.0;
    for (std::size_t i = 0; i < q_observed.size(); ++i) {
        if (q_observed[i] == 0) {
            if (diag) diag->zero_observed_positions.push_back(i);
            continue;
        }
        double rel = std::abs(static_cast<double>(q_simulated[i]) -
                              static_cast<double>(q_observed[i])) /
                     static_cast<double>(q_observed[i]);
        score += rel * weights.values[i];
    }
    return score;
}

// ---- calibration ------------------------------------------------------------

struct CalibrationConfig {
    double grid_lo = 0.50;
    double grid_hi = 2.00;
    double grid_step = 0.05;
    double sweep_tolerance = 1e-4; // minimum per-round improvement to continue
    int max_rounds = 5;
};

struct CalibrationStep {
    int round = 0;
    std::string network;
    double zeta = 1.0;  // adopted coefficient after scanning this coordinate
    double score = 0.0; // best score after this coordinate
};

struct CalibrationReport {
    double initial_score = 0.0;
    double final_score = 0.0;
    std::vector<double> round_scores; // score at the end of each round
    std::vector<CalibrationStep> steps;
    std::uint64_t evaluations = 0;
    bool converged = false; // stopped on tolerance rather than round budget
};

/// Fit per-network coefficients so that simulating `w` reproduces
/// `q_observed` as closely as the score can tell. Coordinates are visited in
/// a seeded order each round; a coefficient moves only when the score
/// strictly improves, so the trajectory of adopted scores never increases.
inline CalibrationCoefficients calibrate_zeta(const ValuationMatrix& b, const Waterfall& w,
                                              const ImpressionVector& q_observed,
                                              const CalibrationConfig& cal,
                                              const SimulationConfig& sim_cfg,
                                              CalibrationReport* report = nullptr) {
    if (!(cal.grid_lo > 0.0) || !(cal.grid_step > 0.0) || cal.grid_hi < cal.grid_lo)
        throw PreconditionError("calibration grid requires 0 < lo <= hi and step > 0");
    if (w.empty()) throw PreconditionError("cannot calibrate against an empty waterfall");

    ScoreWeights weights = score_weights(w, q_observed);

    Simulator sim(b, sim_cfg);
    std::uint32_t max_occ = 1;
    for (std::size_t i = 0; i < w.instances.size(); ++i) {
        std::uint32_t occ = 1;
        for (std::size_t j = 0; j < i; ++j)
            if (w.instances[j].network == w.instances[i].network) ++occ;
        max_occ = std::max(max_occ, occ);
    }
    sim.build_draw_cache(max_occ);

    std::vector<double> grid;
    for (int i = 0;; ++i) {
        double z = cal.grid_lo + cal.grid_step * i;
        if (z > cal.grid_hi + cal.grid_step * 1e-9) break;
        grid.push_back(z);
    }

    // distinct networks in waterfall order
    std::vector<AdNetworkId> nets;
    for (const auto& inst : w.instances)
        if (std::find(nets.begin(), nets.end(), inst.network) == nets.end())
            nets.push_back(inst.network);

    CalibrationReport local;
    CalibrationReport& rep = report ? *report : local;

    CalibrationCoefficients zeta;
    for (const auto& k : nets) zeta.zeta[k.value] = 1.0;

    auto evaluate = [&](const CalibrationCoefficients& z) {
        ++rep.evaluations;
        return fidelity_score(sim.run(w, z).q_prime, q_observed, weights);
    };

    double best_score = evaluate(zeta);
    rep.initial_score = best_score;

    for (int round = 0; round < cal.max_rounds; ++round) {
        double round_start = best_score;

        // seeded visiting order, reshuffled every round
        std::vector<std::size_t> order(nets.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        CounterRng rng(stream_key(sim_cfg.seed, fnv1a64("calibrate-order"),
                                  static_cast<std::uint64_t>(round)));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
            std::swap(order[i - 1], order[j]);
        }

        for (std::size_t oi : order) {
            const AdNetworkId& k = nets[oi];
            double current = zeta.zeta[k.value];
            double best_z = current;
            for (double z : grid) {
                if (std::abs(z - current) < 1e-12) continue;
                CalibrationCoefficients trial = zeta;
                trial.zeta[k.value] = z;
                double s = evaluate(trial);
                if (s < best_score) {
                    best_score = s;
                    best_z = z;
                }
            }
            zeta.zeta[k.value] = best_z;
            rep.steps.push_back({round, k.value, best_z, best_score});
        }

        rep.round_scores.push_back(best_score);
        if (round_start - best_score < cal.sweep_tolerance) {
            rep.converged = true;
            break;
        }
    }

    rep.final_score = best_score;
    return zeta;
}

} // namespace waterfall
