#include "plp/zeroshot.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "plp/errors.hpp"

namespace plp::zeroshot {

std::size_t classify(const EmbeddingVector& image, std::span<const EmbeddingVector> prompts) {
    if (prompts.empty()) throw PreconditionError("classify: no prompts");
    std::size_t best = 0;
    double best_score = cosine_sim(image, prompts[0]);
    for (std::size_t k = 1; k < prompts.size(); ++k) {
        const double s = cosine_sim(image, prompts[k]);
        if (s > best_score) {
            best = k;
            best_score = s;
        }
    }
    return best;
}

ZeroShotReport zero_shot_accuracy(const dataset::DatasetManifest& manifest, embedder::Backend& backend,
                                  std::string_view prompt_template) {
    const auto test = manifest.entries_in(dataset::Split::test);
    if (test.empty()) throw EmptyTestSplit("dataset '" + manifest.dataset_id + "' has no test images");

    std::vector<std::string> prompts;
    for (const auto& label : manifest.class_labels) prompts.push_back(features::label_prompt(label, prompt_template));
    const auto prompt_vecs = backend.embed_texts(prompts);

    std::map<std::string, std::size_t> label_index;
    for (std::size_t k = 0; k < manifest.class_labels.size(); ++k) label_index[manifest.class_labels[k]] = k;

    std::vector<std::size_t> correct(manifest.class_labels.size(), 0);
    std::vector<std::size_t> total(manifest.class_labels.size(), 0);

    const std::size_t batch = backend.batch_size();
    for (std::size_t start = 0; start < test.size(); start += batch) {
        const std::size_t stop = std::min(test.size(), start + batch);
        std::vector<image::Bytes> images;
        images.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) images.push_back(manifest.read_image(test[i]->image_ref));
        const auto vecs = backend.embed_images(images);
        for (std::size_t i = start; i < stop; ++i) {
            const std::size_t truth = label_index.at(test[i]->class_label);
            ++total[truth];
            if (classify(vecs[i - start], prompt_vecs) == truth) ++correct[truth];
        }
    }

    ZeroShotReport report;
    report.dataset_id = manifest.dataset_id;
    report.prompt_template = std::string(prompt_template);
    report.n_test = test.size();
    for (std::size_t k = 0; k < total.size(); ++k) {
        report.n_correct += correct[k];
        if (total[k] > 0) {
            report.per_class_accuracy[manifest.class_labels[k]] =
                static_cast<double>(correct[k]) / static_cast<double>(total[k]);
        }
    }
    report.accuracy = static_cast<double>(report.n_correct) / static_cast<double>(report.n_test);
    return report;
}

std::filesystem::path report_path(const std::filesystem::path& dir, const std::string& dataset_id) {
    return dir / (dataset_id + ".zeroshot.json");
}

std::string report_to_json(const ZeroShotReport& r) {
    nlohmann::ordered_json j;
    j["dataset_id"] = r.dataset_id;
    j["accuracy"] = r.accuracy;
    j["n_test"] = r.n_test;
    j["n_correct"] = r.n_correct;
    j["per_class_accuracy"] = r.per_class_accuracy;
    j["prompt_template"] = r.prompt_template;
    return j.dump(2) + "\n";
}

void write_report(const ZeroShotReport& report, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << report_to_json(report);
}

ZeroShotReport read_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const auto j = nlohmann::json::parse(ss.str(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(path.string() + ": not a JSON object");
    ZeroShotReport r;
    try {
        r.dataset_id = j.at("dataset_id").get<std::string>();
        r.accuracy = j.at("accuracy").get<double>();
        r.n_test = j.at("n_test").get<std::size_t>();
        r.n_correct = j.value("n_correct", static_cast<std::size_t>(0));
        r.per_class_accuracy = j.value("per_class_accuracy", std::map<std::string, double>{});
        r.prompt_template = j.value("prompt_template", std::string(features::kDefaultPromptTemplate));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0)) throw ValidationError(path.string() + ": accuracy outside [0, 1]");
    return r;
}

}  // namespace plp::zeroshot
