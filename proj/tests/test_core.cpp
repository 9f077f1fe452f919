#include <catch2/catch_amalgamated.hpp>

#include "waterfall/core.hpp"
#include "waterfall/rng.hpp"

using namespace waterfall;

namespace {

Waterfall make(std::initializer_list<std::pair<const char*, double>> items) {
    Waterfall w;
    for (auto& [net, price] : items) w.instances.push_back({AdNetworkId(net), price});
    return w;
}

} // namespace

TEST_CASE("price grid construction and lookups") {
    auto g = PriceGrid::from_range(1.0, 30.0, 1.0);
    REQUIRE(g.size() == 30);
    CHECK(g.min() == 1.0);
    CHECK(g.max() == 30.0);
    CHECK(g.contains(17.0));
    CHECK_FALSE(g.contains(17.5));
    CHECK(g.index_of(1.0).value() == 0);
    CHECK(g.index_of(30.0).value() == 29);
    CHECK(g.step_up(29.0).value() == 30.0);
    CHECK_FALSE(g.step_up(30.0).has_value());
    CHECK(g.step_down(2.0).value() == 1.0);
    CHECK_FALSE(g.step_down(1.0).has_value());

    auto e = PriceGrid::from_values({2, 6, 10, 14});
    CHECK(e.step_up(6.0).value() == 10.0);
    CHECK(e.step_down(6.0).value() == 2.0);

    CHECK_THROWS_AS(PriceGrid::from_values({}), PreconditionError);
    CHECK_THROWS_AS(PriceGrid::from_values({1.0, 1.0}), PreconditionError);
    CHECK_THROWS_AS(PriceGrid::from_values({-1.0, 2.0}), PreconditionError);
    CHECK_THROWS_AS(PriceGrid::from_range(0.0, 10.0, 1.0), PreconditionError);
    CHECK_THROWS_AS(g.step_up(17.5), PreconditionError);
}

TEST_CASE("grid lookups survive a text round trip") {
    auto g = PriceGrid::from_range(0.5, 3.0, 0.25);
    for (double v : g.values()) {
        double back = std::stod(format_double(v));
        CHECK(g.contains(back));
        CHECK(g.index_of(back) == g.index_of(v));
    }
}

TEST_CASE("revenue follows the per-mille convention") {
    auto w = make({{"a", 10.0}, {"b", 5.0}});
    ImpressionVector q = {1000, 2000};
    // 1000*10/1000 + 2000*5/1000 = 20
    CHECK(revenue(w, q) == Catch::Approx(20.0));
    CHECK(revenue(w, q, 1.0) == Catch::Approx(20000.0));

    CHECK(revenue(Waterfall{}, {}) == 0.0);
    CHECK_THROWS_AS(revenue(w, {1, 2, 3}), DimensionError);
    CHECK_THROWS_AS(revenue(w, {-1, 2}), PreconditionError);
    CHECK_THROWS_AS(revenue(w, q, 0.0), PreconditionError);
}

TEST_CASE("revenue is linear in impressions") {
    auto w = make({{"a", 7.0}, {"b", 3.0}, {"c", 2.0}});
    CounterRng rng(stream_key(31, 0));
    for (int trial = 0; trial < 50; ++trial) {
        ImpressionVector q1, q2, sum;
        for (std::size_t i = 0; i < w.size(); ++i) {
            q1.push_back(static_cast<std::int64_t>(rng.next_u64() % 5000));
            q2.push_back(static_cast<std::int64_t>(rng.next_u64() % 5000));
            sum.push_back(q1.back() + q2.back());
        }
        REQUIRE(revenue(w, sum) ==
                Catch::Approx(revenue(w, q1) + revenue(w, q2)).epsilon(1e-12));
    }
}

TEST_CASE("validate reports every violation kind") {
    auto g = PriceGrid::from_range(1.0, 100.0, 1.0);
    WaterfallConstraints c;
    c.max_length = 3;
    c.max_instances_per_network = 2;

    CHECK(validate(Waterfall{}, c, g).empty());
    CHECK(validate(make({{"x", 50.0}, {"y", 25.0}}), c, g).empty());

    auto off_grid = validate(make({{"x", 50.5}}), c, g);
    REQUIRE(off_grid.size() == 1);
    CHECK(off_grid[0].kind == Violation::Kind::off_grid_price);
    CHECK(off_grid[0].position == 0);

    auto too_long = validate(make({{"w", 9}, {"x", 8}, {"y", 7}, {"z", 6}}), c, g);
    REQUIRE(too_long.size() == 1);
    CHECK(too_long[0].kind == Violation::Kind::over_max_length);

    auto dup = validate(make({{"x", 9}, {"x", 9}}), c, g);
    REQUIRE_FALSE(dup.empty());
    CHECK(dup[0].kind == Violation::Kind::duplicate_instance);
    CHECK(dup[0].position == 1);

    auto cap = validate(make({{"x", 9}, {"x", 8}, {"x", 7}}), c, g);
    REQUIRE_FALSE(cap.empty());
    CHECK(cap[0].kind == Violation::Kind::per_network_cap_exceeded);

    auto order = validate(make({{"x", 5}, {"y", 9}}), c, g);
    REQUIRE(order.size() == 1);
    CHECK(order[0].kind == Violation::Kind::order_violation);
    CHECK(order[0].position == 1);

    // order checking is off when canonical ordering is not required
    c.canonical_descending = false;
    CHECK(validate(make({{"x", 5}, {"y", 9}}), c, g).empty());
}

TEST_CASE("a longer mixed waterfall validates cleanly") {
    auto g = PriceGrid::from_range(1.0, 100.0, 1.0);
    WaterfallConstraints c; // defaults: length 12, 3 per network
    auto w = make({{"admob", 80},
                   {"mopub", 75},
                   {"admob", 60},
                   {"chartboost", 55},
                   {"vungle", 40},
                   {"mopub", 30},
                   {"admob", 25},
                   {"unity", 20},
                   {"chartboost", 12},
                   {"vungle", 8},
                   {"mopub", 5},
                   {"unity", 2}});
    REQUIRE(w.size() == 12);
    CHECK(validate(w, c, g).empty());
    CHECK(is_valid(w, c, g));
}

TEST_CASE("canonicalize sorts by price, stable on ties, idempotent") {
    WaterfallConstraints c;
    auto w = make({{"a", 5}, {"b", 9}, {"c", 9}, {"d", 2}, {"e", 7}});
    auto canon = canonicalize(w, c);
    REQUIRE(canon.size() == 5);
    CHECK(canon.instances[0].price == 9);
    CHECK(canon.instances[0].network.value == "b"); // tie keeps input order
    CHECK(canon.instances[1].network.value == "c");
    CHECK(canon.instances[2].price == 7);
    CHECK(canon.instances[3].price == 5);
    CHECK(canon.instances[4].price == 2);

    CHECK(canonicalize(canon, c) == canon);

    // no order violations after canonicalization, whatever the input
    auto g = PriceGrid::from_range(1.0, 10.0, 1.0);
    CounterRng rng(stream_key(37, 0));
    for (int trial = 0; trial < 100; ++trial) {
        Waterfall r;
        std::size_t len = rng.next_u64() % 6;
        for (std::size_t i = 0; i < len; ++i)
            r.instances.push_back({AdNetworkId(std::string(1, char('a' + (rng.next_u64() % 5)))),
                                   static_cast<double>(1 + rng.next_u64() % 10)});
        auto canon_r = canonicalize(r, c);
        for (const auto& v : validate(canon_r, c, g))
            REQUIRE(v.kind != Violation::Kind::order_violation);
    }

    c.canonical_descending = false;
    CHECK(canonicalize(w, c) == w);
}
