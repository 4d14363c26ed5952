#include "plp/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <set>
#include <sstream>

#include "plp/errors.hpp"
#include "plp/rng.hpp"

namespace plp::pipeline {

void RunConfig::validate() const {
    if (n_counterfactuals < 1) throw ConfigError("n_counterfactuals must be >= 1");
    if (c_other_labels < 1) throw ConfigError("c_other_labels must be >= 1");
    if (c_other_labels != n_counterfactuals) {
        throw ConfigError("c_other_labels must equal n_counterfactuals so both feature blocks have the same width");
    }
    if (prompt_template.find("{label}") == std::string::npos) throw ConfigError("prompt template lacks {label}");
    llm.validate();
}

std::vector<captiongen::CaptionBundle> run_captions(const dataset::DatasetManifest& manifest,
                                                    const std::filesystem::path& out_dir, const RunConfig& cfg,
                                                    captiongen::CaptionRunStats* stats,
                                                    const captiongen::EnvLookup& env) {
    cfg.validate();
    auto transport = captiongen::make_transport(cfg.llm, env);
    captiongen::LlmClient client(cfg.llm, *transport);
    const auto probes = dataset::sample_probe_images(manifest, cfg.seed);
    return captiongen::generate_bundles(manifest, probes, client, out_dir, cfg.n_counterfactuals, cfg.seed, stats);
}

namespace {

const captiongen::CaptionBundle& bundle_for(const std::map<std::string, const captiongen::CaptionBundle*>& index,
                                            const std::string& dataset_id, const std::string& label) {
    const auto it = index.find(label);
    if (it == index.end()) {
        throw MissingBundle("no caption bundle for class '" + label + "' of dataset '" + dataset_id + "'");
    }
    return *it->second;
}

std::map<std::string, const captiongen::CaptionBundle*> index_bundles(
    const dataset::DatasetManifest& manifest, const std::vector<captiongen::CaptionBundle>& bundles) {
    std::map<std::string, const captiongen::CaptionBundle*> index;
    for (const auto& b : bundles) {
        if (b.dataset_id == manifest.dataset_id) index[b.class_label] = &b;
    }
    return index;
}

}  // namespace

std::vector<features::FeatureRow> score_dataset(const dataset::DatasetManifest& manifest,
                                                const std::vector<captiongen::CaptionBundle>& bundles,
                                                embedder::Backend& backend, const RunConfig& cfg) {
    cfg.validate();
    const auto index = index_bundles(manifest, bundles);
    const std::size_t n = cfg.n_counterfactuals;
    const auto& labels = manifest.class_labels;

    // Text layout: all label prompts, then per class [pc, cf_1..cf_n].
    std::vector<std::string> texts;
    for (const auto& label : labels) texts.push_back(features::label_prompt(label, cfg.prompt_template));
    std::vector<image::Bytes> images;
    std::vector<std::vector<std::string>> others;
    for (const auto& label : labels) {
        const auto& b = bundle_for(index, manifest.dataset_id, label);
        if (b.counterfactuals.size() != n) {
            throw WrongArity("bundle for '" + label + "' has " + std::to_string(b.counterfactuals.size()) +
                             " counterfactuals, expected " + std::to_string(n));
        }
        texts.push_back(b.plausible_caption);
        texts.insert(texts.end(), b.counterfactuals.begin(), b.counterfactuals.end());
        images.push_back(manifest.read_image(b.image_ref));
        others.push_back(dataset::sample_other_labels(manifest, label, cfg.c_other_labels, cfg.seed));
    }

    const auto text_vecs = backend.embed_texts(texts);
    const auto image_vecs = backend.embed_images(images);

    std::map<std::string, std::size_t> label_pos;
    for (std::size_t k = 0; k < labels.size(); ++k) label_pos[labels[k]] = k;

    std::vector<features::FeatureRow> rows;
    rows.reserve(labels.size());
    for (std::size_t k = 0; k < labels.size(); ++k) {
        const std::size_t base = labels.size() + k * (n + 1);
        const std::span<const EmbeddingVector> cfs(text_vecs.data() + base + 1, n);
        std::vector<EmbeddingVector> other_vecs;
        for (const auto& o : others[k]) other_vecs.push_back(text_vecs[label_pos.at(o)]);
        auto row = features::build_feature_row(image_vecs[k], text_vecs[base], cfs, text_vecs[k], other_vecs, n);
        row.dataset_id = manifest.dataset_id;
        row.class_label = labels[k];
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<features::FeatureVector> project_rows(const std::vector<features::FeatureRow>& rows,
                                                  features::Variant variant) {
    std::vector<features::FeatureVector> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(features::project(r, variant));
    return out;
}

features::FeatureVector reproject(const features::FeatureVector& full, features::Variant variant) {
    if (full.variant != features::Variant::full) {
        throw VersionMismatch("ablation needs full-variant features, got '" + full.feature_order_version + "'");
    }
    const std::size_t width = full.values.size();
    if (width < 4 || width % 2 != 0) throw WrongArity("full feature row of odd width " + std::to_string(width));
    const std::size_t half = width / 2;
    const std::size_t arity = half - 1;
    if (full.feature_order_version != features::feature_order_version(features::Variant::full, arity)) {
        throw VersionMismatch("unexpected layout '" + full.feature_order_version + "'");
    }
    features::FeatureVector out = full;
    out.variant = variant;
    out.feature_order_version = features::feature_order_version(variant, arity);
    if (variant == features::Variant::llm_only) {
        out.values.assign(full.values.begin(), full.values.begin() + static_cast<std::ptrdiff_t>(half));
    } else if (variant == features::Variant::vanilla_only) {
        out.values.assign(full.values.begin() + static_cast<std::ptrdiff_t>(half), full.values.end());
    }
    return out;
}

EmbedStats run_embed(const dataset::DatasetManifest& manifest,
                     const std::vector<captiongen::CaptionBundle>& bundles, embedder::Backend& backend,
                     const RunConfig& cfg) {
    const auto index = index_bundles(manifest, bundles);
    std::vector<std::string> texts;
    std::vector<image::Bytes> images;
    for (const auto& label : manifest.class_labels) {
        texts.push_back(features::label_prompt(label, cfg.prompt_template));
        const auto& b = bundle_for(index, manifest.dataset_id, label);
        texts.push_back(b.plausible_caption);
        texts.insert(texts.end(), b.counterfactuals.begin(), b.counterfactuals.end());
        images.push_back(manifest.read_image(b.image_ref));
    }
    backend.embed_texts(texts);
    backend.embed_images(images);
    return {texts.size(), images.size()};
}

std::map<std::string, std::vector<features::FeatureVector>> by_dataset(
    const std::vector<features::FeatureVector>& rows) {
    std::map<std::string, std::vector<features::FeatureVector>> out;
    for (const auto& r : rows) out[r.dataset_id].push_back(r);
    return out;
}

regressor::RegressionModel train(const std::vector<features::FeatureVector>& rows,
                                 const std::map<std::string, double>& targets, features::AggregationMode mode,
                                 const std::vector<double>& lambda_grid) {
    const auto dm = features::assemble_design_matrix(rows, targets, mode);

    std::vector<regressor::LambdaGroup> groups;
    for (Eigen::Index i = 0; i < dm.X.rows();) {
        const auto& id = dm.rows[static_cast<std::size_t>(i)].dataset_id;
        Eigen::Index j = i;
        while (j < dm.X.rows() && dm.rows[static_cast<std::size_t>(j)].dataset_id == id) ++j;
        groups.push_back({id, dm.X.middleRows(i, j - i), dm.y.segment(i, j - i)});
        i = j;
    }
    if (groups.size() < 2) {
        throw InsufficientGroups("training needs at least 2 datasets, got " + std::to_string(groups.size()));
    }

    const auto selection = regressor::select_lambda(groups, lambda_grid);
    auto model = regressor::fit_ridge(dm.X, dm.y, selection.lambda);
    model.feature_order_version = dm.feature_order_version;
    model.aggregation_mode = mode;
    model.variant = std::string(features::to_string(rows.front().variant));
    for (const auto& g : groups) model.training_datasets.push_back(g.dataset_id);
    return model;
}

std::filesystem::path prediction_path(const std::filesystem::path& dir, const std::string& dataset_id) {
    return dir / (dataset_id + ".prediction.json");
}

std::string prediction_to_json(const regressor::DatasetPrediction& p) {
    nlohmann::ordered_json j;
    j["dataset_id"] = p.dataset_id;
    j["predicted_accuracy"] = p.predicted_accuracy;
    auto per_class = nlohmann::ordered_json::array();
    for (const auto& c : p.per_class_predictions) per_class.push_back({{"class_label", c.class_label}, {"raw", c.raw}});
    j["per_class_predictions"] = per_class;
    return j.dump(2) + "\n";
}

void write_prediction(const regressor::DatasetPrediction& prediction, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << prediction_to_json(prediction);
}

regressor::DatasetPrediction read_prediction(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const auto j = nlohmann::json::parse(ss.str(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(path.string() + ": not a JSON object");
    regressor::DatasetPrediction p;
    try {
        p.dataset_id = j.at("dataset_id").get<std::string>();
        p.predicted_accuracy = j.at("predicted_accuracy").get<double>();
        for (const auto& c : j.value("per_class_predictions", nlohmann::json::array())) {
            p.per_class_predictions.push_back({c.at("class_label").get<std::string>(), c.at("raw").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return p;
}

metrics::EvalPairs pair_up(const std::vector<regressor::DatasetPrediction>& predictions,
                           const std::map<std::string, double>& truths) {
    metrics::EvalPairs out;
    out.units = metrics::Units::fraction;
    for (const auto& p : predictions) {
        const auto it = truths.find(p.dataset_id);
        if (it == truths.end()) throw MissingTarget("no ground-truth accuracy for dataset '" + p.dataset_id + "'");
        out.pairs.push_back({p.dataset_id, it->second, p.predicted_accuracy});
    }
    return out;
}

std::vector<std::string> choose_holdout(std::vector<std::string> ids, std::size_t n_test, std::uint64_t seed) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (n_test == 0 || n_test >= ids.size()) {
        throw PreconditionError("need 1 <= n_test < " + std::to_string(ids.size()) + " datasets, got " +
                                std::to_string(n_test));
    }
    rng::Stream stream(rng::mix(seed, rng::fnv1a64("holdout")));
    for (std::size_t i = 0; i < n_test; ++i) {
        const auto j = i + stream.below(ids.size() - i);
        std::swap(ids[i], ids[j]);
    }
    ids.resize(n_test);
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<AblationRow> run_ablation(const std::vector<features::FeatureVector>& full_rows,
                                      const std::map<std::string, double>& targets,
                                      const std::vector<std::string>& train_ids,
                                      const std::vector<std::string>& test_ids, features::AggregationMode mode,
                                      metrics::Units units) {
    const std::set<std::string> train_set(train_ids.begin(), train_ids.end());
    const std::set<std::string> test_set(test_ids.begin(), test_ids.end());
    for (const auto& id : test_set) {
        if (train_set.count(id) != 0) throw PreconditionError("dataset '" + id + "' is in both splits");
    }

    std::vector<AblationRow> out;
    for (const auto variant : {features::Variant::llm_only, features::Variant::vanilla_only, features::Variant::full}) {
        std::vector<features::FeatureVector> train_rows;
        std::map<std::string, std::vector<features::FeatureVector>> test_rows;
        for (const auto& r : full_rows) {
            if (train_set.count(r.dataset_id) != 0) train_rows.push_back(reproject(r, variant));
            if (test_set.count(r.dataset_id) != 0) test_rows[r.dataset_id].push_back(reproject(r, variant));
        }
        for (const auto& id : test_set) {
            if (test_rows.count(id) == 0) throw EmptyDataset("no feature rows for test dataset '" + id + "'");
        }
        const auto model = train(train_rows, targets, mode);
        std::vector<regressor::DatasetPrediction> predictions;
        for (const auto& [id, rows] : test_rows) predictions.push_back(regressor::predict_dataset(model, rows));
        const auto pairs = metrics::to_units(pair_up(predictions, targets), units);
        out.push_back({variant, metrics::summarize(pairs), pairs});
    }
    return out;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    out << std::left << std::setw(16) << "variant" << std::right << std::setw(12) << "pearson_r" << std::setw(14)
        << "rmse" << '\n';
    for (const auto& r : rows) {
        out << std::left << std::setw(16) << features::to_string(r.variant) << std::right << std::setw(12);
        if (r.summary.pearson_defined) {
            out << std::fixed << std::setprecision(6) << r.summary.pearson;
        } else {
            out << "undefined";
        }
        out << std::setw(14) << std::fixed << std::setprecision(6) << r.summary.rmse << '\n';
    }
    if (!rows.empty()) out << "(rmse in " << metrics::to_string(rows.front().summary.units) << " units)\n";
    return out.str();
}

}  // namespace plp::pipeline
