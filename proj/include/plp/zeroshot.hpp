#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "plp/dataset.hpp"
#include "plp/embedder.hpp"
#include "plp/features.hpp"

namespace plp::zeroshot {

struct ZeroShotReport {
    std::string dataset_id;
    double accuracy = 0.0;
    std::size_t n_test = 0;
    std::size_t n_correct = 0;
    std::map<std::string, double> per_class_accuracy;
    std::string prompt_template;

    friend bool operator==(const ZeroShotReport&, const ZeroShotReport&) = default;
};

// Classifies every test-split image by argmax cosine similarity to one prompt
// per class (ties go to the lexicographically smaller label).
// Throws EmptyTestSplit, ConfigError (template without {label}).
ZeroShotReport zero_shot_accuracy(const dataset::DatasetManifest& manifest, embedder::Backend& backend,
                                  std::string_view prompt_template = features::kDefaultPromptTemplate);

// Index of the best-scoring prompt; prompts are assumed to be in label order.
std::size_t classify(const EmbeddingVector& image, std::span<const EmbeddingVector> prompts);

std::filesystem::path report_path(const std::filesystem::path& dir, const std::string& dataset_id);
std::string report_to_json(const ZeroShotReport& report);
void write_report(const ZeroShotReport& report, const std::filesystem::path& path);
ZeroShotReport read_report(const std::filesystem::path& path);

}  // namespace plp::zeroshot
