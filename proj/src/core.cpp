#include "plp/core.hpp"

#include <cmath>
#include <string>

#include "plp/errors.hpp"

namespace plp {

double l2_norm(std::span<const double> v) {
    double sum = 0.0;
    for (double x : v) sum += x * x;
    return std::sqrt(sum);
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionMismatch(std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

EmbeddingVector normalize(std::span<const double> raw) {
    if (raw.empty()) throw ZeroVector("empty vector");
    for (double x : raw) {
        if (!std::isfinite(x)) throw ZeroVector("non-finite component");
    }
    const double norm = l2_norm(raw);
    if (!(norm >= kZeroNormThreshold)) throw ZeroVector("norm below 1e-12");
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / norm;
    return EmbeddingVector(std::move(out));
}

EmbeddingVector normalize(std::span<const float> raw) {
    std::vector<double> wide(raw.begin(), raw.end());
    return normalize(std::span<const double>(wide));
}

EmbeddingVector EmbeddingVector::adopt(std::vector<double> values) {
    if (values.empty()) throw ValidationError("embedding has zero dimension");
    for (double x : values) {
        if (!std::isfinite(x)) throw ValidationError("embedding has non-finite component");
    }
    const double norm = l2_norm(values);
    if (std::abs(norm - 1.0) > kUnitNormTolerance) {
        throw ValidationError("embedding is not unit-norm (norm " + std::to_string(norm) + ")");
    }
    return EmbeddingVector(std::move(values));
}

SimilarityScore cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw DimensionMismatch("cosine_sim: " + std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()));
    }
    return dot(a.values(), b.values());
}

int exit_code(ErrorCategory category) {
    switch (category) {
        case ErrorCategory::config: return 2;
        case ErrorCategory::data: return 3;
        case ErrorCategory::network: return 4;
        case ErrorCategory::internal: return 5;
    }
    return 5;
}

}  // namespace plp
