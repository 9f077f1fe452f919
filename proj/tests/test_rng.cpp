#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "waterfall/rng.hpp"

using namespace waterfall;

namespace {

struct Moments {
    double mean;
    double variance;
};

template <typename Draw>
Moments empirical(std::size_t n, Draw draw) {
    double sum = 0.0;
    std::vector<double> xs;
    xs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs.push_back(draw(i));
        sum += xs.back();
    }
    double m = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return {m, ss / static_cast<double>(n)};
}

} // namespace

TEST_CASE("fnv1a64 matches published reference digests") {
    // reference values for the 64-bit FNV-1a test vectors
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("stream keys separate by any component") {
    std::set<std::uint64_t> keys;
    for (std::uint64_t seed : {1ull, 2ull, 3ull})
        for (std::uint64_t user : {11ull, 12ull})
            for (std::uint64_t occ : {0ull, 1ull, 2ull})
                keys.insert(stream_key(seed, user, occ));
    CHECK(keys.size() == 18);

    // order of components matters
    CHECK(stream_key(1, 2, 3) != stream_key(1, 3, 2));
    // same tuple, same key
    CHECK(stream_key(7, 42, 9) == stream_key(7, 42, 9));
}

TEST_CASE("derived sub-seeds differ by purpose") {
    CHECK(derive_seed(1, "simulate") != derive_seed(1, "synth"));
    CHECK(derive_seed(1, "simulate") != 1);
    CHECK(derive_seed(1, "simulate") == derive_seed(1, "simulate"));
}

TEST_CASE("counter stream is reproducible and order-free") {
    CounterRng a(stream_key(5, 100));
    CounterRng b(stream_key(5, 100));
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    // draws from one stream do not disturb another
    CounterRng c(stream_key(5, 101));
    double first = CounterRng(stream_key(5, 102)).next_unit();
    for (int i = 0; i < 17; ++i) c.next_unit();
    CHECK(CounterRng(stream_key(5, 102)).next_unit() == first);
}

TEST_CASE("uniform draws live in [0,1) with the right moments") {
    auto m = empirical(200000, [](std::size_t i) {
        return CounterRng(stream_key(11, i)).next_unit();
    });
    CHECK(m.mean == Catch::Approx(0.5).margin(0.005));
    CHECK(m.variance == Catch::Approx(1.0 / 12.0).margin(0.002));

    CounterRng r(stream_key(11, 7));
    for (int i = 0; i < 10000; ++i) {
        double u = r.next_unit();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("normal draws match N(0,1) moments") {
    auto m = empirical(200000, [](std::size_t i) {
        return CounterRng(stream_key(13, i)).next_normal();
    });
    CHECK(m.mean == Catch::Approx(0.0).margin(0.01));
    CHECK(m.variance == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("gamma draws match shape/scale moments, including shape below one") {
    for (double shape : {0.5, 1.0, 2.0, 6.0, 10.0}) {
        auto m = empirical(150000, [shape](std::size_t i) {
            return CounterRng(stream_key(17, static_cast<std::uint64_t>(shape * 8), i))
                .next_gamma(shape);
        });
        INFO("shape " << shape);
        CHECK(m.mean == Catch::Approx(shape).epsilon(0.02));
        CHECK(m.variance == Catch::Approx(shape).epsilon(0.05));
    }
}

TEST_CASE("beta draws match closed-form mean and variance") {
    // mean a/(a+b), variance ab/((a+b)^2 (a+b+1))
    struct Case {
        double a, b;
    };
    for (auto [a, b] : {Case{1, 6}, Case{2, 6}, Case{10, 5}, Case{6, 1}, Case{0.5, 0.5}}) {
        double s = a + b;
        double mean = a / s;
        double var = a * b / (s * s * (s + 1.0));
        auto m = empirical(150000, [a = a, b = b](std::size_t i) {
            return CounterRng(stream_key(19, static_cast<std::uint64_t>(a * 4 + b * 64), i))
                .next_beta(a, b);
        });
        INFO("Beta(" << a << "," << b << ")");
        CHECK(m.mean == Catch::Approx(mean).epsilon(0.01));
        CHECK(m.variance == Catch::Approx(var).epsilon(0.05));
    }
}

TEST_CASE("beta draws stay inside the unit interval") {
    CounterRng r(stream_key(23, 1));
    for (int i = 0; i < 20000; ++i) {
        double x = r.next_beta(0.3, 0.2);
        REQUIRE(x >= 0.0);
        REQUIRE(x <= 1.0);
    }
}
