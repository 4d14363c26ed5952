#include "plp/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "plp/errors.hpp"
#include "plp/rng.hpp"

namespace plp::dataset {

namespace {

constexpr std::uint64_t kProbeStreamTag = 0x70726F6265ULL;        // "probe"
constexpr std::uint64_t kOtherLabelStreamTag = 0x6F7468657273ULL;  // "others"

std::uint64_t class_stream_key(std::uint64_t seed, const std::string& dataset_id,
                               const std::string& class_label, std::uint64_t tag) {
    std::uint64_t key = rng::mix(seed, rng::fnv1a64(dataset_id));
    key = rng::mix(key, rng::fnv1a64(class_label));
    return rng::mix(key, tag);
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

}  // namespace

std::string_view to_string(Split split) {
    return split == Split::probe_pool ? "probe-pool" : "test";
}

std::optional<Split> parse_split(std::string_view token) {
    if (token == "probe-pool") return Split::probe_pool;
    if (token == "test") return Split::test;
    return std::nullopt;
}

std::filesystem::path DatasetManifest::resolve(const std::string& image_ref) const {
    std::filesystem::path p(image_ref);
    if (p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

std::vector<std::uint8_t> DatasetManifest::read_image(const std::string& image_ref) const {
    const auto path = resolve(image_ref);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<const ManifestEntry*> DatasetManifest::entries_in(Split split) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries) {
        if (e.split == split) out.push_back(&e);
    }
    return out;
}

DatasetManifest make_manifest(std::string dataset_id, std::vector<ManifestEntry> entries,
                              std::filesystem::path base_dir) {
    if (dataset_id.empty()) throw ValidationError("dataset_id is empty");
    if (entries.empty()) throw ValidationError("manifest '" + dataset_id + "' has no classes");

    std::set<std::string> labels;
    std::set<std::pair<Split, std::string>> seen;
    for (const auto& e : entries) {
        if (e.image_ref.empty() || e.class_label.empty()) {
            throw ValidationError("entry with empty image_ref or class_label");
        }
        if (!seen.emplace(e.split, e.image_ref).second) {
            throw ValidationError("duplicate image_ref '" + e.image_ref + "' in split " +
                                  std::string(to_string(e.split)));
        }
        labels.insert(e.class_label);
    }

    DatasetManifest m;
    m.dataset_id = std::move(dataset_id);
    m.entries = std::move(entries);
    m.class_labels.assign(labels.begin(), labels.end());
    m.base_dir = std::move(base_dir);
    return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path,
                              std::optional<std::string> dataset_id) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());

    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;

        const auto where = path.string() + ":" + std::to_string(line_no);
        auto fields = split_tabs(line);
        if (fields.size() != 3) {
            throw ParseError(where + ": expected 3 tab-separated fields, got " +
                             std::to_string(fields.size()));
        }
        auto split = parse_split(fields[2]);
        if (!split) throw ParseError(where + ": unknown split '" + fields[2] + "'");
        if (fields[0].empty()) throw ParseError(where + ": empty image_ref");
        if (fields[1].empty()) throw ParseError(where + ": empty class_label");
        entries.push_back({std::move(fields[0]), std::move(fields[1]), *split});
    }

    std::string id = dataset_id ? *dataset_id : path.stem().string();
    return make_manifest(std::move(id), std::move(entries), path.parent_path());
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << "# image_ref\tclass_label\tsplit\n";
    for (const auto& e : manifest.entries) {
        out << e.image_ref << '\t' << e.class_label << '\t' << to_string(e.split) << '\n';
    }
}

std::vector<ProbeImage> sample_probe_images(const DatasetManifest& manifest, std::uint64_t seed) {
    std::vector<ProbeImage> out;
    out.reserve(manifest.class_labels.size());
    for (const auto& label : manifest.class_labels) {
        std::vector<const ManifestEntry*> candidates;
        for (const auto& e : manifest.entries) {
            if (e.split == Split::probe_pool && e.class_label == label) candidates.push_back(&e);
        }
        if (candidates.empty()) {
            throw MissingClass("class '" + label + "' of dataset '" + manifest.dataset_id +
                               "' has no probe-pool image");
        }
        rng::Stream stream(class_stream_key(seed, manifest.dataset_id, label, kProbeStreamTag));
        const auto pick = stream.below(candidates.size());
        out.push_back({manifest.dataset_id, label, candidates[pick]->image_ref, seed});
    }
    return out;
}

bool other_labels_need_replacement(const DatasetManifest& manifest, std::size_t count) {
    return manifest.class_labels.size() < count + 1;
}

std::vector<std::string> sample_other_labels(const DatasetManifest& manifest,
                                             const std::string& target, std::size_t count,
                                             std::uint64_t seed) {
    if (count == 0) throw PreconditionError("sample_other_labels: count must be >= 1");
    if (!std::binary_search(manifest.class_labels.begin(), manifest.class_labels.end(), target)) {
        throw PreconditionError("sample_other_labels: unknown label '" + target + "'");
    }
    if (manifest.class_labels.size() == 1) {
        throw SingletonDataset("dataset '" + manifest.dataset_id + "' has a single class");
    }

    std::vector<std::string> pool;
    for (const auto& l : manifest.class_labels) {
        if (l != target) pool.push_back(l);
    }

    rng::Stream stream(class_stream_key(seed, manifest.dataset_id, target, kOtherLabelStreamTag));
    std::vector<std::string> out;
    out.reserve(count);
    if (pool.size() >= count) {
        // partial Fisher-Yates
        for (std::size_t i = 0; i < count; ++i) {
            const auto j = i + stream.below(pool.size() - i);
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) out.push_back(pool[stream.below(pool.size())]);
    }
    return out;
}

}  // namespace plp::dataset
