#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "plp/dataset.hpp"
#include "plp/embedder.hpp"

// Offline corpora for the mock backend: manifests of mock PNGs plus a mock
// spec whose image noise sets how separable the classes are.
namespace plp::synthetic {

struct CorpusSpec {
    std::string dataset_id;
    std::size_t n_classes = 10;
    std::size_t probe_per_class = 2;
    std::size_t test_per_class = 20;
    std::size_t dim = 64;
    double image_noise_sigma = 0.3;
    double text_noise_sigma = 0.05;
    std::uint64_t seed = 42;
};

struct Corpus {
    dataset::DatasetManifest manifest;
    embedder::MockSpec mock_spec;
    std::filesystem::path manifest_path;
    std::filesystem::path mock_spec_path;
};

// n distinct single-word class names that share no token with the prompt
// templates (throws PreconditionError past the built-in vocabulary).
std::vector<std::string> class_names(std::size_t n);

// Writes {root}/{dataset_id}/{dataset_id}.tsv, images/*.png and mock_spec.json.
Corpus write_corpus(const CorpusSpec& spec, const std::filesystem::path& root);

}  // namespace plp::synthetic
