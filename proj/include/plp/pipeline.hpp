#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "plp/captiongen.hpp"
#include "plp/dataset.hpp"
#include "plp/embedder.hpp"
#include "plp/features.hpp"
#include "plp/metrics.hpp"
#include "plp/regressor.hpp"
#include "plp/zeroshot.hpp"

// Compositions of the module operations, one per CLI command.
namespace plp::pipeline {

struct RunConfig {
    std::uint64_t seed = 42;
    std::size_t n_counterfactuals = features::kDefaultArity;
    std::size_t c_other_labels = features::kDefaultArity;
    captiongen::LlmConfig llm;
    features::AggregationMode mode = features::AggregationMode::per_row;
    features::Variant variant = features::Variant::full;
    std::string prompt_template = std::string(features::kDefaultPromptTemplate);

    // Throws ConfigError.
    void validate() const;
};

// Samples probes and produces (or reuses) one bundle per class under out_dir.
std::vector<captiongen::CaptionBundle> run_captions(const dataset::DatasetManifest& manifest,
                                                    const std::filesystem::path& out_dir, const RunConfig& cfg,
                                                    captiongen::CaptionRunStats* stats = nullptr,
                                                    const captiongen::EnvLookup& env = captiongen::process_env);

// Full-width similarity rows, one per class in label order. Texts and images
// of the whole dataset go through the backend in one batched pass each.
// Throws MissingBundle when a class has no bundle.
std::vector<features::FeatureRow> score_dataset(const dataset::DatasetManifest& manifest,
                                                const std::vector<captiongen::CaptionBundle>& bundles,
                                                embedder::Backend& backend, const RunConfig& cfg);

std::vector<features::FeatureVector> project_rows(const std::vector<features::FeatureRow>& rows,
                                                  features::Variant variant);

// Cuts a full-variant vector down to another variant's columns.
features::FeatureVector reproject(const features::FeatureVector& full, features::Variant variant);

struct EmbedStats {
    std::size_t texts = 0;
    std::size_t images = 0;
};

// Warms the embedding cache with every probe image, caption and label prompt.
EmbedStats run_embed(const dataset::DatasetManifest& manifest,
                     const std::vector<captiongen::CaptionBundle>& bundles, embedder::Backend& backend,
                     const RunConfig& cfg);

// select_lambda over the datasets, then a final fit on all of them.
// Throws InsufficientGroups, VersionMismatch, MissingTarget.
regressor::RegressionModel train(const std::vector<features::FeatureVector>& rows,
                                 const std::map<std::string, double>& targets, features::AggregationMode mode,
                                 const std::vector<double>& lambda_grid = regressor::default_lambda_grid());

// Groups rows by dataset id (ordered).
std::map<std::string, std::vector<features::FeatureVector>> by_dataset(const std::vector<features::FeatureVector>& rows);

std::filesystem::path prediction_path(const std::filesystem::path& dir, const std::string& dataset_id);
std::string prediction_to_json(const regressor::DatasetPrediction& prediction);
void write_prediction(const regressor::DatasetPrediction& prediction, const std::filesystem::path& path);
regressor::DatasetPrediction read_prediction(const std::filesystem::path& path);

// Pairs each prediction with the report of the same dataset (fraction units).
metrics::EvalPairs pair_up(const std::vector<regressor::DatasetPrediction>& predictions,
                           const std::map<std::string, double>& truths);

// Deterministic choice of n_test dataset ids for holding out.
std::vector<std::string> choose_holdout(std::vector<std::string> dataset_ids, std::size_t n_test, std::uint64_t seed);

struct AblationRow {
    features::Variant variant;
    metrics::Summary summary;
    metrics::EvalPairs pairs;
};

// Train on train_ids and evaluate on test_ids, once per variant, from
// full-variant rows.
std::vector<AblationRow> run_ablation(const std::vector<features::FeatureVector>& full_rows,
                                      const std::map<std::string, double>& targets,
                                      const std::vector<std::string>& train_ids,
                                      const std::vector<std::string>& test_ids, features::AggregationMode mode,
                                      metrics::Units units);

std::string format_ablation(const std::vector<AblationRow>& rows);

}  // namespace plp::pipeline
