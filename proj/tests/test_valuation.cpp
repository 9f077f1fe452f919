#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "waterfall/ingest.hpp"
#include "waterfall/rng.hpp"
#include "waterfall/valuation.hpp"

using namespace waterfall;

namespace {

UserSaleVectors make_vectors(
    std::initializer_list<std::tuple<const char*, const char*, std::vector<double>>> cells) {
    UserSaleVectors v;
    for (const auto& [user, net, samples] : cells)
        v.by_user[user][AdNetworkId(net)] = samples;
    return v;
}

} // namespace

TEST_CASE("fit_beta matches hand-computed moment fits") {
    // mean 1/2, variance 1/16: concentration 0.25/0.0625 - 1 = 3
    std::vector<double> sym = {0.25, 0.75};
    auto p = fit_beta(sym);
    CHECK(p.alpha == Catch::Approx(1.5).epsilon(1e-12));
    CHECK(p.beta == Catch::Approx(1.5).epsilon(1e-12));
    CHECK(p.provenance == Provenance::direct);

    // mean 0.2, variance 0.01: concentration 0.16/0.01 - 1 = 15
    std::vector<double> asym = {0.1, 0.3};
    p = fit_beta(asym);
    CHECK(p.alpha == Catch::Approx(3.0).epsilon(1e-12));
    CHECK(p.beta == Catch::Approx(12.0).epsilon(1e-12));
    CHECK(p.mean() == Catch::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("fit_beta floors degenerate variance and preserves the mean") {
    std::vector<double> flat(10, 0.3);
    auto p = fit_beta(flat);
    CHECK(p.mean() == Catch::Approx(0.3).epsilon(1e-12));
    // floored variance 1e-6: concentration 0.21/1e-6 - 1
    CHECK(p.alpha + p.beta == Catch::Approx(0.21 / 1e-6 - 1.0).epsilon(1e-9));
    CHECK(p.variance() <= 1.01e-6);
}

TEST_CASE("fit_beta falls back to concentration 2 when moments are infeasible") {
    EstimationConfig cfg;
    cfg.support_clamp = 0.0;
    cfg.variance_floor = 0.0;
    std::vector<double> ends = {0.0, 1.0}; // variance equals m(1-m), concentration 0
    auto p = fit_beta(ends, cfg);
    CHECK(p.alpha == 1.0);
    CHECK(p.beta == 1.0);
}

TEST_CASE("fit_beta rejects empty input") {
    CHECK_THROWS_AS(fit_beta(std::vector<double>{}), PreconditionError);
}

TEST_CASE("moment fits recover known shapes from their own draws") {
    // the four benchmark shapes; 1e5 draws keeps moment error well under 5%
    const std::pair<double, double> shapes[] = {{1, 6}, {2, 6}, {10, 5}, {6, 1}};
    for (auto [a, b] : shapes) {
        CounterRng rng(stream_key(42, fnv1a64("fit-recovery"),
                                   static_cast<std::uint64_t>(a * 16 + b)));
        std::vector<double> draws(100000);
        for (auto& x : draws) x = rng.next_beta(a, b);
        auto p = fit_beta(draws);
        CHECK(p.alpha == Catch::Approx(a).epsilon(0.05));
        CHECK(p.beta == Catch::Approx(b).epsilon(0.05));
    }
}

TEST_CASE("auto price scale adds 5% headroom over the largest sale") {
    auto v = make_vectors({{"u", "A", {0.005, 0.02, 0.011}}});
    EstimationConfig cfg;
    CHECK(detail::auto_price_scale(v, cfg) == Catch::Approx(21.0).epsilon(1e-12));

    UserSaleVectors zero;
    zero.by_user["u"][AdNetworkId("A")] = {0.0, 0.0};
    CHECK_THROWS_AS(detail::auto_price_scale(zero, cfg), EstimationError);
}

TEST_CASE("estimate_matrix fits direct cells by moments") {
    auto v = make_vectors({{"u1", "N", {0.01, 0.03}}});
    EstimationConfig cfg;
    cfg.price_scale = 100.0; // normalized samples 0.1 and 0.3
    auto b = estimate_matrix(v, cfg);
    const auto& p = b.at("u1", AdNetworkId("N"));
    CHECK(p.alpha == Catch::Approx(3.0).epsilon(1e-12));
    CHECK(p.beta == Catch::Approx(12.0).epsilon(1e-12));
    CHECK(p.provenance == Provenance::direct);
    CHECK(b.price_scale() == 100.0);
}

TEST_CASE("missing cells pool the user's other networks when enough exist") {
    auto v = make_vectors({{"u", "A", {0.010, 0.012}},
                           {"u", "B", {0.014}},
                           {"u", "C", {0.008, 0.009}},
                           {"u", "D", {0.011}},
                           {"other", "E", {0.013}}});
    EstimationConfig cfg;
    cfg.price_scale = 20.0;

    std::vector<std::string> users = {"u", "other"};
    std::vector<AdNetworkId> nets = {AdNetworkId("A"), AdNetworkId("B"), AdNetworkId("C"),
                                     AdNetworkId("D"), AdNetworkId("E")};
    auto b = estimate_matrix(v, users, nets, cfg);

    // u has no E samples but four other networks with data, so the cell is
    // the moment fit of the concatenated raw samples (order cannot matter).
    const auto& p = b.at("u", AdNetworkId("E"));
    CHECK(p.provenance == Provenance::pooled_other_networks);
    std::vector<double> pooled = {0.010, 0.012, 0.014, 0.008, 0.009, 0.011};
    auto expect = fit_beta(detail::normalize_samples(pooled, cfg.price_scale, cfg), cfg);
    CHECK(p.alpha == expect.alpha);
    CHECK(p.beta == expect.beta);

    // "other" has a single network, below the pooling minimum, so every
    // missing cell takes the network-wide fit.
    const auto& g = b.at("other", AdNetworkId("A"));
    CHECK(g.provenance == Provenance::global_network);
    auto gexpect = global_params(v, AdNetworkId("A"), cfg, cfg.price_scale);
    CHECK(g.alpha == gexpect.alpha);
    CHECK(g.beta == gexpect.beta);
}

TEST_CASE("pooling needs at least pool_min other networks") {
    EstimationConfig cfg;
    cfg.price_scale = 20.0;
    cfg.pool_min = 3;

    // exactly two other networks: below the minimum, global fit wins
    auto two = make_vectors({{"u", "A", {0.010}}, {"u", "B", {0.012}}, {"z", "E", {0.013}}});
    auto b2 = estimate_matrix(two, {"u", "z"},
                              {AdNetworkId("A"), AdNetworkId("B"), AdNetworkId("E")}, cfg);
    CHECK(b2.at("u", AdNetworkId("E")).provenance == Provenance::global_network);

    // exactly three other networks: pooled
    auto three = make_vectors({{"u", "A", {0.010}},
                               {"u", "B", {0.012}},
                               {"u", "C", {0.009}},
                               {"z", "E", {0.013}}});
    auto b3 = estimate_matrix(
        three, {"u", "z"},
        {AdNetworkId("A"), AdNetworkId("B"), AdNetworkId("C"), AdNetworkId("E")}, cfg);
    CHECK(b3.at("u", AdNetworkId("E")).provenance == Provenance::pooled_other_networks);
}

TEST_CASE("a network with no samples anywhere cannot be estimated") {
    auto v = make_vectors({{"u", "A", {0.01}}});
    EstimationConfig cfg;
    cfg.price_scale = 20.0;
    CHECK_THROWS_AS(global_params(v, AdNetworkId("Z"), cfg, 20.0), EstimationError);
    CHECK_THROWS_AS(
        estimate_matrix(v, {"u"}, {AdNetworkId("A"), AdNetworkId("Z")}, cfg),
        EstimationError);
}

TEST_CASE("matrix registries are sorted and guarded") {
    auto v = make_vectors({{"zeta", "B", {0.01}},
                           {"alpha", "B", {0.02}},
                           {"alpha", "A", {0.015}},
                           {"zeta", "A", {0.012}}});
    auto b = estimate_matrix(v, {"zeta", "alpha"}, {AdNetworkId("B"), AdNetworkId("A")}, {});
    REQUIRE(b.users() == std::vector<std::string>{"alpha", "zeta"});
    REQUIRE(b.networks().size() == 2);
    CHECK(b.networks()[0].value == "A");
    CHECK(b.networks()[1].value == "B");
    CHECK(b.user_index_of("alpha") == 0);
    CHECK(b.network_index_of(AdNetworkId("B")) == 1);
    CHECK(b.has_network(AdNetworkId("A")));
    CHECK_FALSE(b.has_network(AdNetworkId("Q")));
    CHECK_THROWS_AS(b.user_index_of("nobody"), LookupError);
    CHECK_THROWS_AS(b.network_index_of(AdNetworkId("Q")), LookupError);
    CHECK_THROWS_AS(estimate_matrix(v, {}, {AdNetworkId("A")}, {}), PreconditionError);
}

TEST_CASE("matrix construction validates dimensions and scale") {
    std::vector<BetaParams> entries(4);
    CHECK_THROWS_AS(ValuationMatrix({"a", "b"}, {AdNetworkId("X")}, 10.0, entries),
                    DimensionError);
    CHECK_THROWS_AS(
        ValuationMatrix({"a", "b"}, {AdNetworkId("X"), AdNetworkId("Y")}, 0.0, entries),
        PreconditionError);
}

TEST_CASE("threaded estimation is identical to single-threaded") {
    UserSaleVectors v;
    CounterRng rng(stream_key(7, fnv1a64("threaded-estimation")));
    for (int u = 0; u < 40; ++u) {
        std::string name = "user" + std::to_string(u);
        for (const char* net : {"A", "B", "C"}) {
            if (rng.next_unit() < 0.3) continue; // leave holes for fallbacks
            std::vector<double> s(3 + static_cast<std::size_t>(rng.next_u64() % 5));
            for (auto& x : s) x = 0.001 + 0.02 * rng.next_unit();
            v.by_user[name][AdNetworkId(net)] = s;
        }
    }
    EstimationConfig one;
    EstimationConfig many;
    many.threads = 4;
    auto b1 = estimate_matrix(v, one);
    auto b4 = estimate_matrix(v, many);
    REQUIRE(b1.entries().size() == b4.entries().size());
    for (std::size_t i = 0; i < b1.entries().size(); ++i) {
        CHECK(b1.entries()[i].alpha == b4.entries()[i].alpha);
        CHECK(b1.entries()[i].beta == b4.entries()[i].beta);
        CHECK(b1.entries()[i].provenance == b4.entries()[i].provenance);
    }
}

TEST_CASE("valuation draws are keyed, reproducible, and calibrated") {
    auto v = make_vectors({{"u1", "A", {0.01, 0.02, 0.015}}, {"u1", "B", {0.005, 0.011}}});
    EstimationConfig cfg;
    cfg.price_scale = 25.0;
    auto b = estimate_matrix(v, cfg);

    DrawKey key;
    key.seed = 99;
    double raw = raw_valuation_draw(b, 0, 0, key);
    CHECK(raw == raw_valuation_draw(b, 0, 0, key)); // bitwise reproducible
    CHECK(raw > 0.0);
    CHECK(raw < 1.0);

    // every key component separates the stream
    DrawKey other = key;
    other.replica = 1;
    CHECK(raw != raw_valuation_draw(b, 0, 0, other));
    other = key;
    other.occurrence = 1;
    CHECK(raw != raw_valuation_draw(b, 0, 0, other));
    other = key;
    other.seed = 100;
    CHECK(raw != raw_valuation_draw(b, 0, 0, other));
    CHECK(raw != raw_valuation_draw(b, 0, 1, key));

    // calibration is an exact multiplicative distortion of the same draw
    CalibrationCoefficients zeta;
    zeta.zeta["A"] = 1.3;
    CHECK(sample_valuation(b, 0, 0, key, zeta) == 1.3 * b.price_scale() * raw);
    CHECK(sample_valuation(b, 0, 1, key, zeta) ==
          1.0 * b.price_scale() * raw_valuation_draw(b, 0, 1, key));
    CHECK(CalibrationCoefficients::ones().for_network(AdNetworkId("A")) == 1.0);
}

TEST_CASE("near-point-mass cells concentrate draws at their mean") {
    // the pattern used to build deterministic fixtures: Beta(m*1e8, (1-m)*1e8)
    double m = 0.4375;
    std::vector<BetaParams> entries(1);
    entries[0] = BetaParams{m * 1e8, (1.0 - m) * 1e8, Provenance::direct};
    ValuationMatrix b({"u"}, {AdNetworkId("X")}, 8.0, entries);
    for (std::uint32_t occ = 0; occ < 16; ++occ) {
        DrawKey key;
        key.occurrence = occ;
        double draw = raw_valuation_draw(b, 0, 0, key);
        CHECK(std::abs(draw - m) < 1e-3);
    }
}
