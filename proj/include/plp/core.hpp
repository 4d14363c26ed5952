#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace plp {

// Cosine similarity between unit-norm embeddings, in [-1, 1].
using SimilarityScore = double;

// Unit-norm embedding in 64-bit precision. Constructed only through
// normalize() or adopt(), so every instance satisfies ||v|| = 1 within 1e-6.
class EmbeddingVector {
public:
    EmbeddingVector() = default;

    // Wraps values that are already unit-norm (cache loads, remote payloads
    // that were checked upstream). Throws ValidationError otherwise.
    static EmbeddingVector adopt(std::vector<double> values);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

private:
    friend EmbeddingVector normalize(std::span<const double> raw);
    explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {}

    std::vector<double> values_;
};

inline constexpr double kZeroNormThreshold = 1e-12;
inline constexpr double kUnitNormTolerance = 1e-6;

double l2_norm(std::span<const double> v);

// Sequential dot product in index order.
double dot(std::span<const double> a, std::span<const double> b);

EmbeddingVector normalize(std::span<const double> raw);
EmbeddingVector normalize(std::span<const float> raw);

SimilarityScore cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace plp
