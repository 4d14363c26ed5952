#include "plp/features.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <json.hpp>

#include "plp/errors.hpp"

namespace plp::features {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::llm_only: return "llm-only";
        case Variant::vanilla_only: return "vanilla-only";
    }
    return "full";
}

std::string_view to_string(AggregationMode m) {
    return m == AggregationMode::per_row ? "per-row" : "per-dataset-mean";
}

Variant parse_variant(std::string_view text) {
    if (text == "full") return Variant::full;
    if (text == "llm-only") return Variant::llm_only;
    if (text == "vanilla-only") return Variant::vanilla_only;
    throw ConfigError("unknown variant '" + std::string(text) + "'");
}

AggregationMode parse_mode(std::string_view text) {
    if (text == "per-row") return AggregationMode::per_row;
    if (text == "per-dataset-mean") return AggregationMode::per_dataset_mean;
    throw ConfigError("unknown aggregation mode '" + std::string(text) + "'");
}

std::string feature_order_version(Variant variant, std::size_t arity) {
    std::string v = "v1";
    if (arity != kDefaultArity) v += "-n" + std::to_string(arity);
    if (variant != Variant::full) v += "-" + std::string(to_string(variant));
    return v;
}

std::size_t feature_width(Variant variant, std::size_t arity) {
    return variant == Variant::full ? 2 * (arity + 1) : arity + 1;
}

std::vector<std::string> column_names(Variant variant, std::size_t arity) {
    std::vector<std::string> names;
    if (variant != Variant::vanilla_only) {
        names.emplace_back("s_pc");
        for (std::size_t i = 1; i <= arity; ++i) names.push_back("s_cf" + std::to_string(i));
    }
    if (variant != Variant::llm_only) {
        names.emplace_back("s_true_label");
        for (std::size_t i = 1; i <= arity; ++i) names.push_back("s_other" + std::to_string(i));
    }
    return names;
}

std::string label_prompt(const std::string& label, std::string_view prompt_template) {
    if (label.empty()) throw PreconditionError("label_prompt: empty label");
    constexpr std::string_view placeholder = "{label}";
    const auto at = prompt_template.find(placeholder);
    if (at == std::string_view::npos) throw ConfigError("prompt template lacks {label}");
    std::string out(prompt_template.substr(0, at));
    out += label;
    out += prompt_template.substr(at + placeholder.size());
    return out;
}

namespace {

std::vector<SimilarityScore> sorted_scores(const EmbeddingVector& image, std::span<const EmbeddingVector> others) {
    std::vector<SimilarityScore> s;
    s.reserve(others.size());
    for (const auto& v : others) s.push_back(cosine_sim(image, v));
    std::sort(s.begin(), s.end(), std::greater<>());
    return s;
}

}  // namespace

FeatureRow build_feature_row(const EmbeddingVector& image, const EmbeddingVector& plausible,
                             std::span<const EmbeddingVector> counterfactuals,
                             const EmbeddingVector& true_label, std::span<const EmbeddingVector> other_labels,
                             std::size_t arity) {
    if (counterfactuals.size() != arity || other_labels.size() != arity) {
        throw WrongArity("expected " + std::to_string(arity) + " counterfactual and other-label embeddings, got " +
                         std::to_string(counterfactuals.size()) + " and " + std::to_string(other_labels.size()));
    }
    FeatureRow row;
    row.s_pc = cosine_sim(image, plausible);
    row.s_cf = sorted_scores(image, counterfactuals);
    row.s_true_label = cosine_sim(image, true_label);
    row.s_other_labels = sorted_scores(image, other_labels);
    row.feature_order_version = feature_order_version(Variant::full, arity);
    return row;
}

FeatureVector project(const FeatureRow& row, Variant variant) {
    FeatureVector out;
    out.dataset_id = row.dataset_id;
    out.class_label = row.class_label;
    out.variant = variant;
    out.feature_order_version = feature_order_version(variant, row.s_cf.size());
    if (variant != Variant::vanilla_only) {
        out.values.push_back(row.s_pc);
        out.values.insert(out.values.end(), row.s_cf.begin(), row.s_cf.end());
    }
    if (variant != Variant::llm_only) {
        out.values.push_back(row.s_true_label);
        out.values.insert(out.values.end(), row.s_other_labels.begin(), row.s_other_labels.end());
    }
    return out;
}

DesignMatrix assemble_design_matrix(std::span<const FeatureVector> rows,
                                    const std::map<std::string, double>& targets, AggregationMode mode) {
    if (rows.empty()) throw EmptyDataset("no feature rows");
    const auto& version = rows.front().feature_order_version;
    const std::size_t width = rows.front().values.size();

    std::map<std::string, std::vector<const FeatureVector*>> by_dataset;
    for (const auto& r : rows) {
        if (r.feature_order_version != version || r.values.size() != width) {
            throw VersionMismatch("mixed feature layouts: '" + version + "' and '" + r.feature_order_version + "'");
        }
        by_dataset[r.dataset_id].push_back(&r);
    }
    for (const auto& [id, group] : by_dataset) {
        const auto t = targets.find(id);
        if (t == targets.end()) throw MissingTarget("no ground-truth accuracy for dataset '" + id + "'");
        if (!(t->second >= 0.0 && t->second <= 1.0)) {
            throw ValidationError("target for '" + id + "' outside [0, 1]");
        }
    }

    DesignMatrix dm;
    dm.feature_order_version = version;
    const auto n_rows = mode == AggregationMode::per_row ? rows.size() : by_dataset.size();
    dm.X.resize(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(width));
    dm.y.resize(static_cast<Eigen::Index>(n_rows));

    Eigen::Index r = 0;
    for (const auto& [id, group] : by_dataset) {
        const double target = targets.at(id);
        if (mode == AggregationMode::per_row) {
            for (const auto* fv : group) {
                for (std::size_t c = 0; c < width; ++c) dm.X(r, static_cast<Eigen::Index>(c)) = fv->values[c];
                dm.y(r) = target;
                dm.rows.push_back({id, {fv->class_label}});
                ++r;
            }
        } else {
            RowMeta meta{id, {}};
            for (std::size_t c = 0; c < width; ++c) {
                double sum = 0.0;
                for (const auto* fv : group) sum += fv->values[c];
                dm.X(r, static_cast<Eigen::Index>(c)) = sum / static_cast<double>(group.size());
            }
            for (const auto* fv : group) meta.class_labels.push_back(fv->class_label);
            dm.y(r) = target;
            dm.rows.push_back(std::move(meta));
            ++r;
        }
    }
    return dm;
}

std::filesystem::path feature_file_path(const std::filesystem::path& dir, const std::string& dataset_id) {
    return dir / (dataset_id + ".features.jsonl");
}

void write_feature_file(std::span<const FeatureVector> rows, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& fv : rows) {
        const std::size_t arity =
            fv.variant == Variant::full ? fv.values.size() / 2 - 1 : fv.values.size() - 1;
        ordered_json j;
        j["dataset_id"] = fv.dataset_id;
        j["class_label"] = fv.class_label;
        j["feature_order_version"] = fv.feature_order_version;
        j["variant"] = std::string(to_string(fv.variant));
        std::size_t at = 0;
        if (fv.variant != Variant::vanilla_only) {
            j["s_pc"] = fv.values[at++];
            j["s_cf"] = std::vector<double>(fv.values.begin() + at, fv.values.begin() + at + arity);
            at += arity;
        }
        if (fv.variant != Variant::llm_only) {
            j["s_true_label"] = fv.values[at++];
            j["s_other_labels"] = std::vector<double>(fv.values.begin() + at, fv.values.begin() + at + arity);
        }
        out << j.dump() << "\n";
    }
}

std::vector<FeatureVector> read_feature_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<FeatureVector> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto where = path.string() + ":" + std::to_string(line_no);
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw ParseError(where + ": not a JSON object");
        FeatureVector fv;
        try {
            fv.dataset_id = j.at("dataset_id").get<std::string>();
            fv.class_label = j.at("class_label").get<std::string>();
            fv.feature_order_version = j.at("feature_order_version").get<std::string>();
            fv.variant = parse_variant(j.at("variant").get<std::string>());
            if (fv.variant != Variant::vanilla_only) {
                fv.values.push_back(j.at("s_pc").get<double>());
                for (double s : j.at("s_cf").get<std::vector<double>>()) fv.values.push_back(s);
            }
            if (fv.variant != Variant::llm_only) {
                fv.values.push_back(j.at("s_true_label").get<double>());
                for (double s : j.at("s_other_labels").get<std::vector<double>>()) fv.values.push_back(s);
            }
        } catch (const json::exception& e) {
            throw ParseError(where + ": " + e.what());
        }
        out.push_back(std::move(fv));
    }
    return out;
}

}  // namespace plp::features
