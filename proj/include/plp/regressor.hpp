#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "plp/features.hpp"

namespace plp::regressor {

inline constexpr int kModelSchemaVersion = 1;

// Ridge model on standardized features. weights live in standardized space:
// raw prediction = intercept + sum_j weights[j] * (x_j - feature_means[j]) / feature_stds[j].
struct RegressionModel {
    std::vector<double> weights;
    double intercept = 0.0;
    double lambda = 0.0;
    std::vector<double> feature_means;
    std::vector<double> feature_stds;
    std::string feature_order_version = "v1";
    features::AggregationMode aggregation_mode = features::AggregationMode::per_row;
    // provenance
    std::string variant = "full";
    std::vector<std::string> training_datasets;

    friend bool operator==(const RegressionModel&, const RegressionModel&) = default;
};

struct ClassPrediction {
    std::string class_label;
    double raw = 0.0;
};

struct DatasetPrediction {
    std::string dataset_id;
    double predicted_accuracy = 0.0;
    std::vector<ClassPrediction> per_class_predictions;
};

// Columns with (population) std at or below this are treated as constant.
inline constexpr double kDegenerateStd = 1e-12;

// Closed-form ridge: standardize X, solve (Z'Z + lambda I) w = Z'(y - mean y)
// by Cholesky, intercept = mean y (never penalized). Constant columns get
// std 1 and weight 0. Throws SingularSystem only for lambda == 0 with a
// rank-deficient design.
RegressionModel fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);

double predict_raw(const RegressionModel& model, std::span<const double> features);
Eigen::VectorXd predict_raw(const RegressionModel& model, const Eigen::MatrixXd& X);

// Dataset accuracy: clamp(mean of per-row raw predictions) in per-row mode, or
// clamp of the prediction on the mean feature row in per-dataset-mean mode.
// Throws EmptyRows, VersionMismatch, ValidationError (mixed datasets).
DatasetPrediction predict_dataset(const RegressionModel& model, std::span<const features::FeatureVector> rows);

struct LambdaGroup {
    std::string dataset_id;
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

struct LambdaSelection {
    double lambda = 0.0;
    std::vector<std::pair<double, double>> cv_rmse;  // (lambda, held-out RMSE) per grid point
};

// 13 log-spaced points, 1e-3 .. 1e3.
std::vector<double> default_lambda_grid();

// Leave-one-dataset-out CV over the grid; held-out prediction per dataset is
// clamp(mean raw prediction of its rows), compared to the mean of its y.
// Returns the grid value with the lowest RMSE, larger lambda on ties.
// Throws InsufficientGroups when fewer than two groups are given.
LambdaSelection select_lambda(std::span<const LambdaGroup> groups, std::span<const double> grid);

std::string model_to_json(const RegressionModel& model);
RegressionModel model_from_json(const std::string& text, const std::string& source);
void save_model(const RegressionModel& model, const std::filesystem::path& path);
RegressionModel load_model(const std::filesystem::path& path);

}  // namespace plp::regressor
