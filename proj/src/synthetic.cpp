#include "plp/synthetic.hpp"

#include <fstream>

#include "plp/errors.hpp"
#include "plp/image.hpp"
#include "plp/rng.hpp"

namespace plp::synthetic {

namespace {

constexpr const char* kVocabulary[] = {
    "apple",  "banana",   "cherry",  "donkey",  "eagle",   "falcon", "giraffe", "harp",
    "iguana", "jaguar",   "kettle",  "lantern", "mango",   "narwhal", "otter",  "penguin",
    "quokka", "raccoon",  "saxophone", "tractor", "umbrella", "violin", "walrus", "xylophone",
    "yak",    "zebra",    "anchor",  "bicycle", "cactus",  "dolphin", "easel",  "fiddle",
    "accordion", "beaver", "camel",  "drum",    "elephant", "flamingo", "gorilla", "hammer",
    "igloo",  "jellyfish", "koala",  "lobster", "meerkat", "necklace", "octopus", "pelican",
    "quilt",  "rhinoceros", "scooter", "tortoise", "unicycle", "vulture", "wombat", "yacht",
    "zucchini", "badger", "canoe",   "dragonfly", "emu",   "ferret",   "gazelle", "hedgehog",
};

}  // namespace

std::vector<std::string> class_names(std::size_t n) {
    if (n > std::size(kVocabulary)) {
        throw PreconditionError("synthetic corpora support at most " + std::to_string(std::size(kVocabulary)) +
                                " classes");
    }
    return {std::begin(kVocabulary), std::begin(kVocabulary) + static_cast<std::ptrdiff_t>(n)};
}

Corpus write_corpus(const CorpusSpec& spec, const std::filesystem::path& root) {
    if (spec.dataset_id.empty()) throw PreconditionError("write_corpus: empty dataset_id");
    if (spec.n_classes < 2 || spec.probe_per_class < 1 || spec.test_per_class < 1) {
        throw PreconditionError("write_corpus: need >= 2 classes and >= 1 probe and test image per class");
    }
    const auto dir = root / spec.dataset_id;
    std::filesystem::create_directories(dir / "images");

    Corpus corpus;
    corpus.mock_spec.dim = spec.dim;
    corpus.mock_spec.seed = spec.seed;
    corpus.mock_spec.image_noise_sigma = spec.image_noise_sigma;
    corpus.mock_spec.text_noise_sigma = spec.text_noise_sigma;

    std::vector<dataset::ManifestEntry> entries;
    const auto labels = class_names(spec.n_classes);
    for (std::size_t k = 0; k < labels.size(); ++k) {
        const auto& label = labels[k];
        corpus.mock_spec.class_prototypes[label] = rng::mix(spec.seed, k + 1);
        auto add = [&](dataset::Split split, std::size_t count) {
            for (std::size_t i = 0; i < count; ++i) {
                const std::string item = spec.dataset_id + "/" + label + "/" + std::string(dataset::to_string(split)) +
                                         "/" + std::to_string(i);
                const std::string ref = "images/" + label + "_" + std::string(dataset::to_string(split)) + "_" +
                                        std::to_string(i) + ".png";
                const auto png = image::make_mock_png(label, item);
                std::ofstream out(dir / ref, std::ios::binary);
                if (!out) throw IoError("cannot write " + (dir / ref).string());
                out.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
                entries.push_back({ref, label, split});
            }
        };
        add(dataset::Split::probe_pool, spec.probe_per_class);
        add(dataset::Split::test, spec.test_per_class);
    }

    corpus.manifest = dataset::make_manifest(spec.dataset_id, std::move(entries), dir);
    corpus.manifest_path = dir / (spec.dataset_id + ".tsv");
    corpus.mock_spec_path = dir / "mock_spec.json";
    dataset::write_manifest(corpus.manifest, corpus.manifest_path);
    embedder::save_mock_spec(corpus.mock_spec, corpus.mock_spec_path);
    return corpus;
}

}  // namespace plp::synthetic
