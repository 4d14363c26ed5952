#include <doctest.h>

#include <algorithm>
#include <random>

#include "plp/embedder.hpp"
#include "plp/errors.hpp"
#include "plp/features.hpp"
#include "test_util.hpp"

using namespace plp;
using namespace plp::features;

namespace {

std::vector<EmbeddingVector> randoms(std::mt19937_64& gen, std::size_t n, std::size_t dim) {
    std::vector<EmbeddingVector> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(test::random_unit(gen, dim));
    return out;
}

EmbeddingVector axis(std::size_t dim, std::size_t k) {
    std::vector<double> v(dim, 0.0);
    v[k] = 1.0;
    return normalize(std::span<const double>(v));
}

FeatureVector fv(const std::string& ds, const std::string& cls, std::vector<double> values) {
    return {ds, cls, Variant::full, "v1", std::move(values)};
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("label prompts") {
    CHECK(label_prompt("cat") == "A photo of a cat");
    CHECK(label_prompt("Ekwang") == "A photo of a Ekwang");
    CHECK(label_prompt("cat", "a photo of {label}.") == "a photo of cat.");
    CHECK_THROWS_AS(label_prompt(""), PreconditionError);
    CHECK_THROWS_AS(label_prompt("cat", "no placeholder"), ConfigError);
}

TEST_CASE("identical image and caption") {
    std::mt19937_64 gen(1);
    const auto img = test::random_unit(gen, 16);
    const auto row = build_feature_row(img, img, randoms(gen, 5, 16), img, randoms(gen, 5, 16));
    CHECK(row.s_pc == doctest::Approx(1.0));
    CHECK(row.s_true_label == doctest::Approx(1.0));
    CHECK(row.feature_order_version == "v1");
}

TEST_CASE("orthogonal counterfactuals score zero") {
    const std::size_t dim = 8;
    std::vector<EmbeddingVector> cfs;
    for (std::size_t k = 1; k <= 5; ++k) cfs.push_back(axis(dim, k));
    const auto row = build_feature_row(axis(dim, 0), axis(dim, 0), cfs, axis(dim, 0), cfs);
    CHECK(row.s_cf == std::vector<double>(5, 0.0));
}

TEST_CASE("mock prototypes give exact label scores") {
    embedder::MockSpec spec;
    spec.dim = 32;
    spec.seed = 3;
    const std::vector<std::string> labels{"apple", "banana", "cherry", "donkey", "eagle", "falcon"};
    for (std::size_t i = 0; i < labels.size(); ++i) spec.class_prototypes[labels[i]] = i + 10;
    embedder::MockBackend backend(spec);

    const auto img = backend.embed_images({image::make_mock_png("apple", "probe")}).front();
    const auto pc = backend.embed_text("apple close-up");
    std::vector<EmbeddingVector> others;
    std::vector<double> expected;
    for (const std::string l : {"banana", "cherry", "donkey", "eagle", "falcon"}) {
        others.push_back(backend.embed_text("A photo of a " + l));
        expected.push_back(cosine_sim(embedder::mock_prototype(spec, "apple"), embedder::mock_prototype(spec, l)));
    }
    const auto row = build_feature_row(img, pc, others, backend.embed_text(label_prompt("apple")), others);
    CHECK(row.s_true_label == doctest::Approx(1.0).epsilon(1e-12));
    std::sort(expected.begin(), expected.end(), std::greater<>());
    for (std::size_t i = 0; i < 5; ++i) CHECK(row.s_other_labels[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("wrong arity") {
    std::mt19937_64 gen(2);
    const auto img = test::random_unit(gen, 8);
    CHECK_THROWS_AS(build_feature_row(img, img, randoms(gen, 4, 8), img, randoms(gen, 5, 8)), WrongArity);
    CHECK_NOTHROW(build_feature_row(img, img, randoms(gen, 3, 8), img, randoms(gen, 3, 8), 3));
    CHECK_THROWS_AS(build_feature_row(img, img, randoms(gen, 5, 8), img, randoms(gen, 5, 4)), DimensionMismatch);
}

TEST_CASE("property: 12 bounded, sorted, permutation-invariant entries") {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t dim = 2 + static_cast<std::size_t>(trial % 30);
        const auto img = test::random_unit(gen, dim);
        const auto pc = test::random_unit(gen, dim);
        const auto tl = test::random_unit(gen, dim);
        auto cfs = randoms(gen, 5, dim);
        auto others = randoms(gen, 5, dim);
        const auto row = project(build_feature_row(img, pc, cfs, tl, others), Variant::full);
        REQUIRE(row.values.size() == 12);
        for (double v : row.values) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
        const auto base = build_feature_row(img, pc, cfs, tl, others);
        CHECK(std::is_sorted(base.s_cf.rbegin(), base.s_cf.rend()));
        CHECK(std::is_sorted(base.s_other_labels.rbegin(), base.s_other_labels.rend()));
        std::shuffle(cfs.begin(), cfs.end(), gen);
        std::shuffle(others.begin(), others.end(), gen);
        CHECK(build_feature_row(img, pc, cfs, tl, others) == base);
    }
}

TEST_CASE("variants and versions") {
    CHECK(feature_width(Variant::full) == 12);
    CHECK(feature_width(Variant::llm_only) == 6);
    CHECK(feature_width(Variant::vanilla_only) == 6);
    CHECK(feature_order_version(Variant::full) == "v1");
    CHECK(feature_order_version(Variant::llm_only) != feature_order_version(Variant::vanilla_only));
    CHECK(feature_order_version(Variant::full, 3) != "v1");
    CHECK(column_names(Variant::full).front() == "s_pc");
    CHECK(column_names(Variant::full)[6] == "s_true_label");
    CHECK(parse_variant("llm-only") == Variant::llm_only);
    CHECK(parse_mode("per-dataset-mean") == AggregationMode::per_dataset_mean);
    CHECK_THROWS_AS(parse_variant("both"), ConfigError);

    std::mt19937_64 gen(4);
    const auto img = test::random_unit(gen, 8);
    const auto row = build_feature_row(img, img, randoms(gen, 5, 8), img, randoms(gen, 5, 8));
    const auto llm = project(row, Variant::llm_only);
    const auto van = project(row, Variant::vanilla_only);
    CHECK(llm.values.size() == 6);
    CHECK(van.values.size() == 6);
    CHECK(llm.values[0] == row.s_pc);
    CHECK(van.values[0] == row.s_true_label);
}

TEST_CASE("design matrix per-row and per-dataset-mean") {
    std::vector<FeatureVector> rows;
    for (const std::string ds : {"b_ds", "a_ds"}) {
        for (int c = 0; c < 3; ++c) {
            std::vector<double> v(12);
            for (int j = 0; j < 12; ++j) v[static_cast<std::size_t>(j)] = (ds == "a_ds" ? 1.0 : -1.0) * (c + 1) * 0.1 + j * 0.01;
            rows.push_back(fv(ds, "c" + std::to_string(c), v));
        }
    }
    const std::map<std::string, double> targets{{"a_ds", 0.9}, {"b_ds", 0.4}};
    const auto per_row = assemble_design_matrix(rows, targets, AggregationMode::per_row);
    CHECK(per_row.X.rows() == 6);
    CHECK(per_row.X.cols() == 12);
    CHECK(per_row.rows.front().dataset_id == "a_ds");
    CHECK(per_row.y(0) == 0.9);
    CHECK(per_row.y(2) == 0.9);
    CHECK(per_row.y(3) == 0.4);

    const auto mean = assemble_design_matrix(rows, targets, AggregationMode::per_dataset_mean);
    CHECK(mean.X.rows() == 2);
    for (Eigen::Index j = 0; j < 12; ++j) {
        const double expected = (per_row.X(0, j) + per_row.X(1, j) + per_row.X(2, j)) / 3.0;
        CHECK(std::abs(mean.X(0, j) - expected) < 1e-12);
    }
    CHECK(mean.rows[0].class_labels.size() == 3);
}

TEST_CASE("single row design") {
    std::vector<FeatureVector> rows{fv("x", "only", std::vector<double>(12, 0.5))};
    const auto dm = assemble_design_matrix(rows, {{"x", 0.7}}, AggregationMode::per_row);
    CHECK(dm.X.rows() == 1);
    CHECK(dm.X.cols() == 12);
}

TEST_CASE("design matrix errors") {
    std::vector<FeatureVector> rows{fv("x", "c", std::vector<double>(12, 0.1))};
    CHECK_THROWS_AS(assemble_design_matrix(rows, {}, AggregationMode::per_row), MissingTarget);
    CHECK_THROWS_AS(assemble_design_matrix({}, {}, AggregationMode::per_row), EmptyDataset);
    rows.push_back({"y", "c", Variant::llm_only, "v1-llm-only", std::vector<double>(6, 0.1)});
    CHECK_THROWS_AS(assemble_design_matrix(rows, {{"x", 0.5}, {"y", 0.5}}, AggregationMode::per_row),
                    VersionMismatch);
}

TEST_CASE("feature file round trip") {
    test::TempDir dir;
    std::mt19937_64 gen(9);
    std::vector<FeatureVector> rows;
    for (const auto variant : {Variant::full, Variant::llm_only, Variant::vanilla_only}) {
        rows.clear();
        for (int c = 0; c < 4; ++c) {
            const auto img = test::random_unit(gen, 8);
            auto row = build_feature_row(img, test::random_unit(gen, 8), randoms(gen, 5, 8), test::random_unit(gen, 8),
                                         randoms(gen, 5, 8));
            row.dataset_id = "ds";
            row.class_label = "class " + std::to_string(c);
            rows.push_back(project(row, variant));
        }
        const auto path = feature_file_path(dir.path(), "ds");
        CHECK(path == dir / "ds.features.jsonl");
        write_feature_file(rows, path);
        CHECK(read_feature_file(path) == rows);
    }
}

TEST_CASE("malformed feature file") {
    test::TempDir dir;
    test::spit(dir / "x.features.jsonl", "{\"dataset_id\": \"x\"}\n");
    CHECK_THROWS_AS(read_feature_file(dir / "x.features.jsonl"), ParseError);
    test::spit(dir / "y.features.jsonl", "not json\n");
    CHECK_THROWS_AS(read_feature_file(dir / "y.features.jsonl"), ParseError);
}

}
