#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plp/core.hpp"

namespace plp::features {

inline constexpr std::size_t kDefaultArity = 5;
inline constexpr std::string_view kDefaultPromptTemplate = "A photo of a {label}";

enum class Variant { full, llm_only, vanilla_only };
enum class AggregationMode { per_row, per_dataset_mean };

std::string_view to_string(Variant v);
std::string_view to_string(AggregationMode m);
Variant parse_variant(std::string_view text);           // ConfigError
AggregationMode parse_mode(std::string_view text);      // ConfigError

// Column-order version string. "v1" is the 12-column layout
// [s_pc, s_cf1..5, s_true_label, s_other1..5]; ablation variants and other
// arities get distinct strings so mismatched models refuse to predict.
std::string feature_order_version(Variant variant, std::size_t arity = kDefaultArity);
std::size_t feature_width(Variant variant, std::size_t arity = kDefaultArity);
std::vector<std::string> column_names(Variant variant, std::size_t arity = kDefaultArity);

// Similarity scores of one probe image. The two list blocks are sorted
// descending, so the row does not depend on caption or label order.
struct FeatureRow {
    std::string dataset_id;
    std::string class_label;
    SimilarityScore s_pc = 0.0;
    std::vector<SimilarityScore> s_cf;
    SimilarityScore s_true_label = 0.0;
    std::vector<SimilarityScore> s_other_labels;
    std::string feature_order_version = "v1";

    friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

// A feature row projected onto one variant's columns.
struct FeatureVector {
    std::string dataset_id;
    std::string class_label;
    Variant variant = Variant::full;
    std::string feature_order_version;
    std::vector<double> values;

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Substitutes {label} in the template (default "A photo of a {label}").
std::string label_prompt(const std::string& label, std::string_view prompt_template = kDefaultPromptTemplate);

// Throws DimensionMismatch, WrongArity.
FeatureRow build_feature_row(const EmbeddingVector& image, const EmbeddingVector& plausible,
                             std::span<const EmbeddingVector> counterfactuals,
                             const EmbeddingVector& true_label, std::span<const EmbeddingVector> other_labels,
                             std::size_t arity = kDefaultArity);

FeatureVector project(const FeatureRow& row, Variant variant);

struct RowMeta {
    std::string dataset_id;
    std::vector<std::string> class_labels;  // one entry per-row, all classes per-dataset-mean
};

struct DesignMatrix {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<RowMeta> rows;
    std::string feature_order_version;
};

// Stacks rows into X / y. Datasets appear in lexicographic order; rows within
// a dataset keep their input order. Throws MissingTarget, EmptyDataset,
// VersionMismatch (mixed layouts).
DesignMatrix assemble_design_matrix(std::span<const FeatureVector> rows,
                                    const std::map<std::string, double>& targets, AggregationMode mode);

// {out}/{dataset_id}.features.jsonl, one JSON object per row.
std::filesystem::path feature_file_path(const std::filesystem::path& dir, const std::string& dataset_id);
void write_feature_file(std::span<const FeatureVector> rows, const std::filesystem::path& path);
std::vector<FeatureVector> read_feature_file(const std::filesystem::path& path);

}  // namespace plp::features
