#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace plp::metrics {

enum class Units { fraction, percent };

std::string_view to_string(Units u);

struct EvalPair {
    std::string dataset_id;
    double true_accuracy = 0.0;
    double predicted_accuracy = 0.0;
};

struct EvalPairs {
    std::vector<EvalPair> pairs;
    Units units = Units::fraction;
};

// Throws PreconditionError (< 2 pairs or non-finite), ConstantSeries.
double pearson_r(const EvalPairs& pairs);
// Throws EmptyRows, PreconditionError (non-finite). Same units as the input.
double rmse(const EvalPairs& pairs);

// Explicit conversion; the other functions never rescale.
EvalPairs to_units(const EvalPairs& pairs, Units target);

// Tab-separated lines "dataset_id<TAB>true<TAB>predicted", '#' comments.
EvalPairs read_values_file(const std::filesystem::path& path, Units units);
void write_values_file(const EvalPairs& pairs, const std::filesystem::path& path);

struct Summary {
    std::size_t n = 0;
    Units units = Units::fraction;
    double pearson = 0.0;
    bool pearson_defined = false;
    double rmse = 0.0;
};

Summary summarize(const EvalPairs& pairs);
std::string format_summary(const EvalPairs& pairs, const Summary& summary);
std::string results_json(const EvalPairs& pairs, const Summary& summary);

}  // namespace plp::metrics
