#include "plp/rng.hpp"

#include <cmath>
#include <numbers>

namespace plp::rng {

namespace {
constexpr std::uint64_t kFnvOffset = 0xCBF29CE484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001B3ULL;
}  // namespace

std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = kFnvOffset;
    for (unsigned char c : text) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept {
    std::uint64_t h = kFnvOffset;
    for (std::uint8_t c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

std::uint64_t Stream::below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    for (;;) {
        const std::uint64_t r = next();
        if (r < limit) return r % bound;
    }
}

double uniform_open(std::uint64_t key, std::uint64_t counter) noexcept {
    const std::uint64_t bits = mix(key, counter) >> 11;  // 53 bits
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

std::vector<double> gaussian_vector(std::uint64_t key, std::size_t dim) {
    std::vector<double> out(dim);
    for (std::size_t i = 0; i < dim; i += 2) {
        const double u1 = uniform_open(key, i);
        const double u2 = uniform_open(key, i + 1);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        out[i] = r * std::cos(theta);
        if (i + 1 < dim) out[i + 1] = r * std::sin(theta);
    }
    return out;
}

}  // namespace plp::rng
