#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace plp::dataset {

enum class Split { probe_pool, test };

std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view token);

struct ManifestEntry {
    std::string image_ref;
    std::string class_label;
    Split split = Split::probe_pool;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
    std::string dataset_id;
    std::vector<ManifestEntry> entries;
    // Sorted, unique. Class index i everywhere in the pipeline refers to this order.
    std::vector<std::string> class_labels;
    // Relative image_refs resolve against this directory.
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const std::string& image_ref) const;
    std::vector<std::uint8_t> read_image(const std::string& image_ref) const;
    std::vector<const ManifestEntry*> entries_in(Split split) const;
};

// Validates entries and derives class_labels. Throws ValidationError.
DatasetManifest make_manifest(std::string dataset_id, std::vector<ManifestEntry> entries,
                              std::filesystem::path base_dir = {});

// Line-delimited manifest: image_ref<TAB>class_label<TAB>split, '#' comments.
DatasetManifest load_manifest(const std::filesystem::path& path,
                              std::optional<std::string> dataset_id = std::nullopt);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct ProbeImage {
    std::string dataset_id;
    std::string class_label;
    std::string image_ref;
    std::uint64_t selection_seed = 0;

    friend bool operator==(const ProbeImage&, const ProbeImage&) = default;
};

// One probe-pool image per class, in class_labels order. Throws MissingClass.
std::vector<ProbeImage> sample_probe_images(const DatasetManifest& manifest, std::uint64_t seed);

// c labels other than target; without replacement when enough classes exist,
// otherwise with replacement. Throws SingletonDataset for one-class datasets.
std::vector<std::string> sample_other_labels(const DatasetManifest& manifest,
                                             const std::string& target, std::size_t count,
                                             std::uint64_t seed);

bool other_labels_need_replacement(const DatasetManifest& manifest, std::size_t count);

}  // namespace plp::dataset
