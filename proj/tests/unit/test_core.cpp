#include <doctest.h>

#include <cmath>
#include <random>

#include "plp/core.hpp"
#include "plp/errors.hpp"
#include "test_util.hpp"

using namespace plp;

TEST_SUITE("core") {

TEST_CASE("normalize known vectors") {
    const std::vector<double> v34{3.0, 4.0};
    const auto a = normalize(std::span<const double>(v34));
    CHECK(a[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(a[1] == doctest::Approx(0.8).epsilon(1e-15));

    const std::vector<double> e{1.0, 0.0, 0.0};
    const auto b = normalize(std::span<const double>(e));
    CHECK(b[0] == 1.0);
    CHECK(b[1] == 0.0);
    CHECK(b.dim() == 3);
}

TEST_CASE("normalize rejects degenerate input") {
    const std::vector<double> zero{0.0, 0.0};
    CHECK_THROWS_AS(normalize(std::span<const double>(zero)), ZeroVector);
    const std::vector<double> empty;
    CHECK_THROWS_AS(normalize(std::span<const double>(empty)), ZeroVector);
    const std::vector<double> nan{1.0, std::nan("")};
    CHECK_THROWS_AS(normalize(std::span<const double>(nan)), ZeroVector);
}

TEST_CASE("cosine of known pairs") {
    const std::vector<double> x{1, 0}, y{0, 1}, z{0.6, 0.8};
    const auto ux = normalize(std::span<const double>(x));
    const auto uy = normalize(std::span<const double>(y));
    const auto uz = normalize(std::span<const double>(z));
    CHECK(cosine_sim(ux, ux) == doctest::Approx(1.0));
    CHECK(cosine_sim(ux, uy) == 0.0);
    CHECK(cosine_sim(ux, uz) == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("dot of different dims throws") {
    const std::vector<double> a{1, 0}, b{1, 0, 0};
    CHECK_THROWS_AS(cosine_sim(normalize(std::span<const double>(a)), normalize(std::span<const double>(b))),
                    DimensionMismatch);
}

TEST_CASE("adopt validates unit norm") {
    CHECK_NOTHROW(EmbeddingVector::adopt({0.6, 0.8}));
    CHECK_THROWS(EmbeddingVector::adopt({0.6, 0.9}));
}

TEST_CASE("property: unit norm, scale invariance, symmetric cosine") {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> scale(1e-3, 1e3);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t dim = 1 + trial % 40;
        std::vector<double> v(dim), w(dim);
        for (auto& x : v) x = g(gen);
        for (auto& x : w) x = g(gen);
        const auto nv = normalize(std::span<const double>(v));
        CHECK(std::abs(l2_norm(nv.values()) - 1.0) < 1e-6);

        const double k = scale(gen);
        std::vector<double> kv(v);
        for (auto& x : kv) x *= k;
        const auto nkv = normalize(std::span<const double>(kv));
        for (std::size_t i = 0; i < dim; ++i) CHECK(std::abs(nkv[i] - nv[i]) < 1e-9);

        const auto nw = normalize(std::span<const double>(w));
        const double ab = cosine_sim(nv, nw);
        CHECK(ab == cosine_sim(nw, nv));
        CHECK(ab >= -1.0);
        CHECK(ab <= 1.0);
    }
}

TEST_CASE("exit codes partition error categories") {
    CHECK(exit_code(ErrorCategory::config) == 2);
    CHECK(exit_code(ErrorCategory::data) == 3);
    CHECK(exit_code(ErrorCategory::network) == 4);
    CHECK(exit_code(ErrorCategory::internal) == 5);
    CHECK(ConfigError("x").category() == ErrorCategory::config);
    CHECK(LlmUnavailable("x").category() == ErrorCategory::network);
    CHECK(DecodeError(4, "bad").index() == 4);
}

}
