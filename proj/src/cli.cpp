#include "plp/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <iostream>
#include <sstream>

#include "plp/errors.hpp"
#include "plp/log.hpp"
#include "plp/pipeline.hpp"
#include "plp/synthetic.hpp"

namespace plp::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::uint64_t seed = 42;
    std::string backend;
    std::string manifest;
    std::string dataset_id;
    std::string bundles;
    std::string cache;
    std::string out;
    std::string model;
    std::string values;
    std::string variant = "full";
    std::string mode = "per-row";
    std::string units = "fraction";
    std::string prompt_template = std::string(features::kDefaultPromptTemplate);
    std::vector<std::string> feature_paths;
    std::vector<std::string> report_paths;
    std::vector<std::string> prediction_paths;
    std::vector<std::string> test_ids;
    std::size_t n_test = 0;
    std::size_t n = features::kDefaultArity;
    bool percent = false;
    bool verbose = false;
    captiongen::LlmConfig llm;
    // synth
    std::size_t classes = 6;
    std::size_t probe_per_class = 2;
    std::size_t test_per_class = 20;
    std::size_t dim = 64;
    double image_sigma = 0.3;
    double text_sigma = 0.05;
};

class Timer {
public:
    Timer(std::ostream& err, std::string command) : err_(err), command_(std::move(command)) {}
    void report(std::size_t count, std::string_view what = "classes") const {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        err_ << "plp " << command_ << ": " << count << ' ' << what << " in " << std::fixed << std::setprecision(3)
             << secs << " s";
        if (secs > 0.0 && count > 0) err_ << " (" << std::setprecision(1) << count / secs << ' ' << what << "/sec)";
        err_ << '\n';
    }

private:
    std::ostream& err_;
    std::string command_;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

pipeline::RunConfig run_config(const Options& o) {
    pipeline::RunConfig cfg;
    cfg.seed = o.seed;
    cfg.n_counterfactuals = o.n;
    cfg.c_other_labels = o.n;
    cfg.llm = o.llm;
    cfg.mode = features::parse_mode(o.mode);
    cfg.variant = features::parse_variant(o.variant);
    cfg.prompt_template = o.prompt_template;
    cfg.validate();
    return cfg;
}

dataset::DatasetManifest manifest(const Options& o) {
    if (o.manifest.empty()) throw ConfigError("--manifest is required");
    return dataset::load_manifest(o.manifest, o.dataset_id.empty() ? std::nullopt
                                                                   : std::optional<std::string>(o.dataset_id));
}

std::unique_ptr<embedder::Backend> backend(const Options& o) {
    if (o.backend.empty()) throw ConfigError("--backend is required (mock:<spec>, remote:<url>, local:<dir>)");
    auto b = embedder::make_backend(o.backend);
    if (o.cache.empty()) return b;
    return std::make_unique<embedder::CachedBackend>(std::move(b), o.cache);
}

void flush(embedder::Backend& b) {
    if (auto* cached = dynamic_cast<embedder::CachedBackend*>(&b)) cached->flush();
}

fs::path require_out(const Options& o) {
    if (o.out.empty()) throw ConfigError("--out is required");
    return o.out;
}

// Files given directly, or every file with the suffix inside given directories.
std::vector<fs::path> expand(const std::vector<std::string>& paths, const std::string& suffix) {
    std::vector<fs::path> out;
    for (const auto& p : paths) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p)) {
                const auto name = e.path().filename().string();
                if (e.is_regular_file() && name.size() > suffix.size() &&
                    name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
                    found.push_back(e.path());
                }
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else if (fs::exists(p)) {
            out.emplace_back(p);
        } else {
            throw IoError("no such file or directory: " + p);
        }
    }
    return out;
}

std::vector<features::FeatureVector> read_features(const std::vector<std::string>& paths) {
    std::vector<features::FeatureVector> rows;
    for (const auto& f : expand(paths, ".features.jsonl")) {
        auto part = features::read_feature_file(f);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    if (rows.empty()) throw EmptyRows("no feature rows found");
    return rows;
}

std::map<std::string, double> read_targets(const std::vector<std::string>& paths) {
    std::map<std::string, double> out;
    for (const auto& f : expand(paths, ".zeroshot.json")) {
        const auto r = zeroshot::read_report(f);
        out[r.dataset_id] = r.accuracy;
    }
    return out;
}

int cmd_captions(const Options& o, std::ostream& out, std::ostream& err) {
    Timer timer(err, "captions");
    const auto cfg = run_config(o);
    const auto m = manifest(o);
    captiongen::CaptionRunStats stats;
    const auto bundles = pipeline::run_captions(m, require_out(o), cfg, &stats);
    out << "dataset " << m.dataset_id << ": " << bundles.size() << " bundles (" << stats.generated << " generated, "
        << stats.cached << " cached, " << stats.requests << " LLM requests)\n";
    timer.report(bundles.size());
    return 0;
}

std::vector<captiongen::CaptionBundle> bundles_for(const Options& o, const dataset::DatasetManifest& m) {
    if (o.bundles.empty()) throw ConfigError("--bundles is required");
    return captiongen::load_bundles(o.bundles, m.dataset_id);
}

int cmd_embed(Options o, std::ostream& out, std::ostream& err) {
    Timer timer(err, "embed");
    const auto cfg = run_config(o);
    const auto m = manifest(o);
    o.cache = require_out(o).string();
    auto b = backend(o);
    const auto stats = pipeline::run_embed(m, bundles_for(o, m), *b, cfg);
    flush(*b);
    auto* cached = dynamic_cast<embedder::CachedBackend*>(b.get());
    out << "dataset " << m.dataset_id << ": " << stats.texts << " texts, " << stats.images << " images ("
        << cached->hits() << " cache hits, " << cached->misses() << " misses)\n";
    timer.report(m.class_labels.size());
    return 0;
}

int cmd_features(const Options& o, std::ostream& out, std::ostream& err) {
    Timer timer(err, "features");
    const auto cfg = run_config(o);
    const auto m = manifest(o);
    const auto bundles = bundles_for(o, m);
    auto b = backend(o);
    const auto rows = pipeline::project_rows(pipeline::score_dataset(m, bundles, *b, cfg), cfg.variant);
    flush(*b);
    const auto path = features::feature_file_path(require_out(o), m.dataset_id);
    features::write_feature_file(rows, path);
    out << path.string() << ": " << rows.size() << " rows x " << features::feature_width(cfg.variant, cfg.n_counterfactuals)
        << " features (" << rows.front().feature_order_version << ")\n";
    timer.report(rows.size());
    return 0;
}

int cmd_zeroshot(const Options& o, std::ostream& out, std::ostream& err) {
    Timer timer(err, "zeroshot");
    const auto m = manifest(o);
    auto b = backend(o);
    const auto report = zeroshot::zero_shot_accuracy(m, *b, o.prompt_template);
    flush(*b);
    const auto path = zeroshot::report_path(require_out(o), m.dataset_id);
    zeroshot::write_report(report, path);
    out << m.dataset_id << ": accuracy " << std::fixed << std::setprecision(4) << report.accuracy << " ("
        << report.n_correct << "/" << report.n_test << ")\n";
    timer.report(m.class_labels.size());
    return 0;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
    Timer timer(err, "train");
    const auto rows = read_features(o.feature_paths);
    const auto targets = read_targets(o.report_paths);
    const auto model = pipeline::train(rows, targets, features::parse_mode(o.mode));
    const fs::path path = require_out(o);
    regressor::save_model(model, path);
    out << path.string() << ": lambda " << model.lambda << ", " << model.training_datasets.size() << " datasets, "
        << model.feature_order_version << ", " << features::to_string(model.aggregation_mode) << '\n';
    timer.report(rows.size());
    return 0;
}

int cmd_predict(const Options& o, std::ostream& out, std::ostream& err) {
    Timer timer(err, "predict");
    if (o.model.empty()) throw ConfigError("--model is required");
    const auto model = regressor::load_model(o.model);
    const auto rows = read_features(o.feature_paths);
    const fs::path dir = require_out(o);
    for (const auto& [id, group] : pipeline::by_dataset(rows)) {
        const auto p = regressor::predict_dataset(model, group);
        pipeline::write_prediction(p, pipeline::prediction_path(dir, id));
        out << id << ": predicted accuracy " << std::fixed << std::setprecision(4) << p.predicted_accuracy << '\n';
    }
    timer.report(rows.size());
    return 0;
}

metrics::Units parse_units(const std::string& s) {
    if (s == "fraction") return metrics::Units::fraction;
    if (s == "percent") return metrics::Units::percent;
    throw ConfigError("unknown units '" + s + "' (fraction or percent)");
}

int cmd_metrics(const Options& o, std::ostream& out, std::ostream& err) {
    Timer timer(err, "metrics");
    metrics::EvalPairs pairs;
    if (!o.values.empty()) {
        pairs = metrics::read_values_file(o.values, parse_units(o.units));
    } else {
        if (o.prediction_paths.empty() || o.report_paths.empty()) {
            throw ConfigError("give --values, or --predictions with --reports");
        }
        std::vector<regressor::DatasetPrediction> predictions;
        for (const auto& f : expand(o.prediction_paths, ".prediction.json")) {
            predictions.push_back(pipeline::read_prediction(f));
        }
        pairs = pipeline::pair_up(predictions, read_targets(o.report_paths));
    }
    if (o.percent) pairs = metrics::to_units(pairs, metrics::Units::percent);
    const auto summary = metrics::summarize(pairs);
    out << metrics::format_summary(pairs, summary);
    if (!o.out.empty()) {
        const fs::path path(o.out);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot write " + path.string());
        f << metrics::results_json(pairs, summary);
    }
    timer.report(pairs.pairs.size(), "datasets");
    return 0;
}

int cmd_ablate(const Options& o, std::ostream& out, std::ostream& err) {
    Timer timer(err, "ablate");
    const auto rows = read_features(o.feature_paths);
    const auto targets = read_targets(o.report_paths);
    std::vector<std::string> ids;
    for (const auto& [id, group] : pipeline::by_dataset(rows)) ids.push_back(id);

    std::vector<std::string> test_ids = o.test_ids;
    if (test_ids.empty()) {
        // default: 30% of the datasets held out, at least one
        const std::size_t k = o.n_test > 0 ? o.n_test : std::max<std::size_t>(1, (ids.size() * 3 + 5) / 10);
        test_ids = pipeline::choose_holdout(ids, k, o.seed);
    }
    std::vector<std::string> train_ids;
    for (const auto& id : ids) {
        if (std::find(test_ids.begin(), test_ids.end(), id) == test_ids.end()) train_ids.push_back(id);
    }
    const auto units = o.percent ? metrics::Units::percent : metrics::Units::fraction;
    const auto result =
        pipeline::run_ablation(rows, targets, train_ids, test_ids, features::parse_mode(o.mode), units);
    out << "held out:";
    for (const auto& id : test_ids) out << ' ' << id;
    out << '\n' << pipeline::format_ablation(result);
    if (!o.out.empty()) {
        nlohmann::ordered_json j;
        j["train"] = train_ids;
        j["test"] = test_ids;
        j["units"] = std::string(metrics::to_string(units));
        auto arr = nlohmann::ordered_json::array();
        for (const auto& r : result) {
            arr.push_back({{"variant", std::string(features::to_string(r.variant))},
                           {"pearson_r", r.summary.pearson_defined ? nlohmann::ordered_json(r.summary.pearson)
                                                                   : nlohmann::ordered_json(nullptr)},
                           {"rmse", r.summary.rmse}});
        }
        j["rows"] = arr;
        const fs::path path(o.out);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot write " + path.string());
        f << j.dump(2) << '\n';
    }
    timer.report(rows.size());
    return 0;
}

int cmd_synth(const Options& o, std::ostream& out, std::ostream& err) {
    Timer timer(err, "synth");
    if (o.dataset_id.empty()) throw ConfigError("--dataset-id is required");
    synthetic::CorpusSpec spec;
    spec.dataset_id = o.dataset_id;
    spec.n_classes = o.classes;
    spec.probe_per_class = o.probe_per_class;
    spec.test_per_class = o.test_per_class;
    spec.dim = o.dim;
    spec.image_noise_sigma = o.image_sigma;
    spec.text_noise_sigma = o.text_sigma;
    spec.seed = o.seed;
    const auto corpus = synthetic::write_corpus(spec, require_out(o));
    out << corpus.manifest_path.string() << '\n' << corpus.mock_spec_path.string() << '\n';
    timer.report(spec.n_classes);
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Pre-labelling probe: estimate zero-shot accuracy from one labelled image per class", "plp"};
    app.require_subcommand(1);
    app.fallthrough();

    Options o;
    app.add_option("--seed", o.seed, "Seed for all sampling")->capture_default_str();
    app.add_option("--backend", o.backend, "mock:<spec.json> | remote:<url> | local:<model_dir>");
    app.add_flag("-v,--verbose", o.verbose, "Log progress to stderr");

    auto add_manifest = [&](CLI::App* c) {
        c->add_option("--manifest", o.manifest, "Dataset manifest (image_ref, class_label, split)")->required();
        c->add_option("--dataset-id", o.dataset_id, "Dataset id (default: manifest file stem)");
    };
    auto add_llm = [&](CLI::App* c) {
        c->add_option("--llm-url", o.llm.base_url, "Chat-completions base URL, or stub: for offline runs")
            ->capture_default_str();
        c->add_option("--llm-model", o.llm.model_name)->capture_default_str();
        c->add_option("--max-retries", o.llm.max_retries)->capture_default_str();
        c->add_option("--rpm", o.llm.requests_per_minute, "Request rate limit")->capture_default_str();
        c->add_option("--max-in-flight", o.llm.max_in_flight)->capture_default_str();
        c->add_option("--timeout", o.llm.timeout_seconds)->capture_default_str();
    };
    auto add_n = [&](CLI::App* c) {
        c->add_option("-n,--counterfactuals", o.n, "Counterfactual captions (and other labels) per class")
            ->capture_default_str();
    };
    auto add_template = [&](CLI::App* c) {
        c->add_option("--template", o.prompt_template, "Label prompt template")->capture_default_str();
    };

    auto* captions = app.add_subcommand("captions", "Generate caption bundles for one dataset");
    add_manifest(captions);
    add_llm(captions);
    add_n(captions);
    captions->add_option("--out", o.out, "Bundle directory")->required();

    auto* embed = app.add_subcommand("embed", "Precompute embeddings into a cache directory");
    add_manifest(embed);
    add_n(embed);
    add_template(embed);
    embed->add_option("--bundles", o.bundles, "Bundle directory")->required();
    embed->add_option("--out", o.out, "Cache directory")->required();

    auto* feats = app.add_subcommand("features", "Score probe images against captions and label prompts");
    add_manifest(feats);
    add_n(feats);
    add_template(feats);
    feats->add_option("--bundles", o.bundles, "Bundle directory")->required();
    feats->add_option("--variant", o.variant, "full | llm-only | vanilla-only")->capture_default_str();
    feats->add_option("--cache", o.cache, "Embedding cache directory");
    feats->add_option("--out", o.out, "Output directory")->required();

    auto* zs = app.add_subcommand("zeroshot", "Measure zero-shot accuracy on the test split");
    add_manifest(zs);
    add_template(zs);
    zs->add_option("--cache", o.cache, "Embedding cache directory");
    zs->add_option("--out", o.out, "Output directory")->required();

    auto* train = app.add_subcommand("train", "Fit the ridge regressor");
    train->add_option("--features", o.feature_paths, "Feature files or directories")->required();
    train->add_option("--reports", o.report_paths, "Zero-shot report files or directories")->required();
    train->add_option("--mode", o.mode, "per-row | per-dataset-mean")->capture_default_str();
    train->add_option("--out", o.out, "Model file")->required();

    auto* predict = app.add_subcommand("predict", "Predict dataset accuracy from feature files");
    predict->add_option("--model", o.model, "Model file")->required();
    predict->add_option("--features", o.feature_paths, "Feature files or directories")->required();
    predict->add_option("--out", o.out, "Output directory")->required();

    auto* met = app.add_subcommand("metrics", "Pearson-r and RMSE of predictions");
    met->add_option("--values", o.values, "TSV of dataset, true, predicted");
    met->add_option("--units", o.units, "Units of --values: fraction | percent")->capture_default_str();
    met->add_option("--predictions", o.prediction_paths, "Prediction files or directories");
    met->add_option("--reports", o.report_paths, "Zero-shot report files or directories");
    met->add_flag("--percent", o.percent, "Report in percent");
    met->add_option("--out", o.out, "Results JSON file");

    auto* ablate = app.add_subcommand("ablate", "Compare llm-only, vanilla-only and full features");
    ablate->add_option("--features", o.feature_paths, "Full-variant feature files or directories")->required();
    ablate->add_option("--reports", o.report_paths, "Zero-shot report files or directories")->required();
    ablate->add_option("--test", o.test_ids, "Held-out dataset ids");
    ablate->add_option("--n-test", o.n_test, "Number of datasets to hold out at random (default 30%)");
    ablate->add_option("--mode", o.mode, "per-row | per-dataset-mean")->capture_default_str();
    ablate->add_flag("--percent", o.percent, "Report RMSE in percent");
    ablate->add_option("--out", o.out, "Results JSON file");

    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset for the mock backend");
    synth->add_option("--dataset-id", o.dataset_id)->required();
    synth->add_option("--classes", o.classes)->capture_default_str();
    synth->add_option("--probe-per-class", o.probe_per_class)->capture_default_str();
    synth->add_option("--test-per-class", o.test_per_class)->capture_default_str();
    synth->add_option("--dim", o.dim)->capture_default_str();
    synth->add_option("--image-sigma", o.image_sigma)->capture_default_str();
    synth->add_option("--text-sigma", o.text_sigma)->capture_default_str();
    synth->add_option("--out", o.out, "Corpus root directory")->required();

    std::vector<std::string> argv_storage{"plp"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(ErrorCategory::config);
    }

    const auto previous_level = log::level();
    log::set_level(o.verbose ? log::Level::info : log::Level::warning);
    int code = 0;
    try {
        if (*captions) code = cmd_captions(o, out, err);
        else if (*embed) code = cmd_embed(o, out, err);
        else if (*feats) code = cmd_features(o, out, err);
        else if (*zs) code = cmd_zeroshot(o, out, err);
        else if (*train) code = cmd_train(o, out, err);
        else if (*predict) code = cmd_predict(o, out, err);
        else if (*met) code = cmd_metrics(o, out, err);
        else if (*ablate) code = cmd_ablate(o, out, err);
        else if (*synth) code = cmd_synth(o, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        code = exit_code(e.category());
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        code = exit_code(ErrorCategory::data);
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        code = exit_code(ErrorCategory::internal);
    }
    log::set_level(previous_level);
    return code;
}

}  // namespace plp::cli
