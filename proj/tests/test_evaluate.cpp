#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"
#include "waterfall/evaluate.hpp"
#include "waterfall/simulate.hpp"

using namespace waterfall;
using testsupport::make_waterfall;
using testsupport::stochastic_matrix;

TEST_CASE("score weights are observed revenue shares") {
    auto w = make_waterfall({{"A", 10.0}, {"B", 5.0}});
    auto weights = score_weights(w, {3000, 1000});
    REQUIRE(weights.values.size() == 2);
    CHECK(weights.values[0] == Catch::Approx(6.0 / 7.0).epsilon(1e-12));
    CHECK(weights.values[1] == Catch::Approx(1.0 / 7.0).epsilon(1e-12));

    CHECK_THROWS_AS(score_weights(w, {3000}), DimensionError);
    CHECK_THROWS_AS(score_weights(w, {-1, 1000}), PreconditionError);
    CHECK_THROWS_AS(score_weights(w, {0, 0}), PreconditionError);
}

TEST_CASE("fidelity score matches the hand-computed value") {
    auto w = make_waterfall({{"A", 10.0}, {"B", 5.0}});
    ImpressionVector q_obs = {3000, 1000};
    ImpressionVector q_sim = {2700, 1300};
    auto weights = score_weights(w, q_obs);
    // relative errors 0.1 and 0.3, weights 6/7 and 1/7: (0.06 + 0.3) / ... = 0.9/7
    CHECK(fidelity_score(q_sim, q_obs, weights) == Catch::Approx(0.9 / 7.0).epsilon(1e-12));
    CHECK(fidelity_score(q_obs, q_obs, weights) == 0.0);
}

TEST_CASE("fidelity score is invariant to common scaling") {
    auto w = make_waterfall({{"A", 12.0}, {"B", 7.0}, {"C", 3.0}});
    ImpressionVector q_obs = {500, 800, 200};
    ImpressionVector q_sim = {430, 905, 260};
    ImpressionVector q_obs10 = {5000, 8000, 2000};
    ImpressionVector q_sim10 = {4300, 9050, 2600};
    double s1 = fidelity_score(q_sim, q_obs, score_weights(w, q_obs));
    double s10 = fidelity_score(q_sim10, q_obs10, score_weights(w, q_obs10));
    CHECK(s1 == Catch::Approx(s10).epsilon(1e-12));
}

TEST_CASE("zero-observed instances are skipped and reported") {
    auto w = make_waterfall({{"A", 10.0}, {"B", 5.0}, {"C", 2.0}});
    ImpressionVector q_obs = {100, 0, 50};
    ImpressionVector q_sim = {90, 999, 50};
    auto weights = score_weights(w, q_obs);
    ScoreDiagnostics diag;
    double s = fidelity_score(q_sim, q_obs, weights, &diag);
    // the middle instance contributes nothing despite its huge simulated count
    CHECK(s == Catch::Approx(0.1 * weights.values[0]).epsilon(1e-12));
    REQUIRE(diag.zero_observed_positions.size() == 1);
    CHECK(diag.zero_observed_positions[0] == 1);

    CHECK_THROWS_AS(fidelity_score({1, 2}, q_obs, weights), DimensionError);
}

TEST_CASE("calibration recovers an on-grid coefficient exactly") {
    auto b = stochastic_matrix(300, 1, 20.0, 41);
    auto w = make_waterfall({{"A", 14.0}, {"A", 9.0}, {"A", 4.0}});

    // the truth is the grid point 0.50 + 0.05 * 12, bit for bit
    const double z_true = 0.50 + 0.05 * 12;
    CalibrationCoefficients truth;
    truth.zeta["A"] = z_true;

    SimulationConfig sim_cfg;
    sim_cfg.seed = 77;
    auto observed = run_waterfall(b, w, truth, sim_cfg);
    REQUIRE(observed.revenue > 0.0);

    CalibrationConfig cal;
    CalibrationReport report;
    auto zeta = calibrate_zeta(b, w, observed.q_prime, cal, sim_cfg, &report);

    // common random numbers make the true coefficient reproduce the observed
    // vector exactly, so the score reaches zero and the grid point is adopted
    CHECK(zeta.zeta.at("A") == z_true);
    CHECK(report.final_score == 0.0);
    CHECK(report.initial_score > 0.0);
    CHECK(report.converged);
    REQUIRE(report.round_scores.size() == 2); // improving round, then a still one
    CHECK(report.round_scores[0] == 0.0);
    CHECK(report.round_scores[1] == 0.0);
}

TEST_CASE("calibration scores never increase") {
    auto b = stochastic_matrix(250, 3, 20.0, 43);
    auto w = make_waterfall({{"A", 13.0}, {"B", 10.0}, {"C", 7.0}, {"A", 4.0}});

    CalibrationCoefficients truth;
    truth.zeta["A"] = 1.25;
    truth.zeta["B"] = 0.80;
    truth.zeta["C"] = 1.00;

    SimulationConfig sim_cfg;
    sim_cfg.seed = 101;
    auto observed = run_waterfall(b, w, truth, sim_cfg);

    CalibrationConfig cal;
    CalibrationReport report;
    auto zeta = calibrate_zeta(b, w, observed.q_prime, cal, sim_cfg, &report);

    CHECK(report.final_score <= report.initial_score);
    for (std::size_t i = 1; i < report.steps.size(); ++i)
        CHECK(report.steps[i].score <= report.steps[i - 1].score);
    for (std::size_t i = 1; i < report.round_scores.size(); ++i)
        CHECK(report.round_scores[i] <= report.round_scores[i - 1]);
    CHECK(report.steps.size() == 3 * report.round_scores.size());
    CHECK(report.evaluations >= 1 + 3 * 30);

    // a calibrated fit should beat the uncalibrated one outright here
    CHECK(report.final_score < report.initial_score);
    for (const auto& [net, z] : zeta.zeta) {
        CHECK(z >= 0.5);
        CHECK(z <= 2.0);
    }
}

TEST_CASE("calibration is deterministic") {
    auto b = stochastic_matrix(120, 2, 20.0, 47);
    auto w = make_waterfall({{"A", 11.0}, {"B", 6.0}});
    CalibrationCoefficients truth;
    truth.zeta["A"] = 1.35;
    SimulationConfig sim_cfg;
    sim_cfg.seed = 7;
    auto observed = run_waterfall(b, w, truth, sim_cfg);

    CalibrationReport r1, r2;
    auto z1 = calibrate_zeta(b, w, observed.q_prime, {}, sim_cfg, &r1);
    auto z2 = calibrate_zeta(b, w, observed.q_prime, {}, sim_cfg, &r2);
    CHECK(z1 == z2);
    CHECK(r1.final_score == r2.final_score);
    CHECK(r1.evaluations == r2.evaluations);
    REQUIRE(r1.steps.size() == r2.steps.size());
    for (std::size_t i = 0; i < r1.steps.size(); ++i) {
        CHECK(r1.steps[i].network == r2.steps[i].network);
        CHECK(r1.steps[i].zeta == r2.steps[i].zeta);
    }
}

TEST_CASE("a zero-round budget leaves the coefficients untouched") {
    auto b = stochastic_matrix(60, 2, 20.0, 53);
    auto w = make_waterfall({{"A", 11.0}, {"B", 6.0}});
    auto observed = run_waterfall(b, w, {}, {});

    CalibrationConfig cal;
    cal.max_rounds = 0;
    CalibrationReport report;
    auto zeta = calibrate_zeta(b, w, observed.q_prime, cal, {}, &report);
    CHECK(zeta.zeta.at("A") == 1.0);
    CHECK(zeta.zeta.at("B") == 1.0);
    CHECK(report.evaluations == 1);
    CHECK(report.final_score == report.initial_score);
    CHECK(report.round_scores.empty());
    CHECK_FALSE(report.converged);
}

TEST_CASE("an already perfect fit is a fixed point of calibration") {
    auto b = stochastic_matrix(100, 2, 20.0, 59);
    auto w = make_waterfall({{"A", 11.0}, {"B", 6.0}});
    SimulationConfig sim_cfg;
    sim_cfg.seed = 3;
    auto observed = run_waterfall(b, w, {}, sim_cfg);

    CalibrationReport report;
    auto zeta = calibrate_zeta(b, w, observed.q_prime, {}, sim_cfg, &report);
    CHECK(report.initial_score == 0.0);
    CHECK(report.final_score == 0.0);
    CHECK(zeta.zeta.at("A") == 1.0);
    CHECK(zeta.zeta.at("B") == 1.0);
    CHECK(report.converged);
    CHECK(report.round_scores.size() == 1);
}

TEST_CASE("calibration validates its inputs") {
    auto b = stochastic_matrix(10, 1, 20.0, 61);
    auto w = make_waterfall({{"A", 10.0}});
    ImpressionVector q = {5};

    CalibrationConfig bad;
    bad.grid_lo = 0.0;
    CHECK_THROWS_AS(calibrate_zeta(b, w, q, bad, {}), PreconditionError);
    bad = {};
    bad.grid_step = 0.0;
    CHECK_THROWS_AS(calibrate_zeta(b, w, q, bad, {}), PreconditionError);
    bad = {};
    bad.grid_hi = 0.4;
    CHECK_THROWS_AS(calibrate_zeta(b, w, q, bad, {}), PreconditionError);
    CHECK_THROWS_AS(calibrate_zeta(b, Waterfall{}, {}, {}, {}), PreconditionError);
}
