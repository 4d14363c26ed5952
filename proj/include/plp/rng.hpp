#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

// Counter-based and stream generators. Every sampled quantity in the pipeline
// is a pure function of a 64-bit key, so results do not depend on call order.
namespace plp::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b) noexcept {
    return splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ULL));
}

std::uint64_t fnv1a64(std::string_view text) noexcept;
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept;

// Sequential splitmix64 stream.
class Stream {
public:
    explicit Stream(std::uint64_t key) noexcept : state_(key) {}

    std::uint64_t next() noexcept {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Unbiased integer in [0, bound) by rejection.
    std::uint64_t below(std::uint64_t bound) noexcept;

private:
    std::uint64_t state_;
};

// Uniform in the open interval (0, 1) from (key, counter).
double uniform_open(std::uint64_t key, std::uint64_t counter) noexcept;

// dim independent standard normals (Box-Muller over counter pairs).
std::vector<double> gaussian_vector(std::uint64_t key, std::size_t dim);

}  // namespace plp::rng
