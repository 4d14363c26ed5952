#include "plp/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "plp/errors.hpp"

namespace plp::regressor {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

RegressionModel fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    if (n < 1) throw EmptyRows("fit_ridge: no rows");
    if (y.size() != n) throw DimensionMismatch("fit_ridge: X has " + std::to_string(n) + " rows, y " +
                                               std::to_string(y.size()));
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw PreconditionError("fit_ridge: lambda must be finite and >= 0");
    if (!X.allFinite() || !y.allFinite()) throw ValidationError("fit_ridge: non-finite input");

    RegressionModel model;
    model.lambda = lambda;
    model.feature_means.resize(static_cast<std::size_t>(d));
    model.feature_stds.resize(static_cast<std::size_t>(d));
    model.weights.assign(static_cast<std::size_t>(d), 0.0);

    const double y_mean = y.mean();
    model.intercept = y_mean;

    Eigen::MatrixXd Z(n, d);
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < d; ++j) {
        const double mean = X.col(j).mean();
        const double var = (X.col(j).array() - mean).square().sum() / static_cast<double>(n);
        const double sd = std::sqrt(var);
        const auto uj = static_cast<std::size_t>(j);
        model.feature_means[uj] = mean;
        if (sd <= kDegenerateStd * std::max(1.0, std::abs(mean))) {
            model.feature_stds[uj] = 1.0;
            Z.col(j).setZero();
        } else {
            model.feature_stds[uj] = sd;
            Z.col(j) = (X.col(j).array() - mean) / sd;
            active.push_back(j);
        }
    }
    if (active.empty()) return model;

    const auto k = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd Za(n, k);
    for (Eigen::Index c = 0; c < k; ++c) Za.col(c) = Z.col(active[static_cast<std::size_t>(c)]);
    const Eigen::VectorXd yc = y.array() - y_mean;

    Eigen::MatrixXd A = Za.transpose() * Za;
    A.diagonal().array() += lambda;
    const Eigen::VectorXd b = Za.transpose() * yc;

    Eigen::LLT<Eigen::MatrixXd> llt(A);
    bool singular = llt.info() != Eigen::Success;
    if (!singular && lambda == 0.0) {
        // Cholesky can succeed on a numerically singular Gram matrix; check the pivots.
        const Eigen::MatrixXd L = llt.matrixL();
        const double max_pivot = L.diagonal().cwiseAbs().maxCoeff();
        const double min_pivot = L.diagonal().cwiseAbs().minCoeff();
        singular = min_pivot <= 1e-7 * max_pivot;
    }
    if (singular) {
        throw SingularSystem("design is rank-deficient at lambda = " + std::to_string(lambda));
    }
    const Eigen::VectorXd w = llt.solve(b);
    for (Eigen::Index c = 0; c < k; ++c) {
        model.weights[static_cast<std::size_t>(active[static_cast<std::size_t>(c)])] = w(c);
    }
    return model;
}

double predict_raw(const RegressionModel& model, std::span<const double> features) {
    if (features.size() != model.weights.size()) {
        throw DimensionMismatch("model expects " + std::to_string(model.weights.size()) + " features, got " +
                                std::to_string(features.size()));
    }
    double out = model.intercept;
    for (std::size_t j = 0; j < features.size(); ++j) {
        out += model.weights[j] * ((features[j] - model.feature_means[j]) / model.feature_stds[j]);
    }
    return out;
}

Eigen::VectorXd predict_raw(const RegressionModel& model, const Eigen::MatrixXd& X) {
    Eigen::VectorXd out(X.rows());
    std::vector<double> row(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) row[static_cast<std::size_t>(j)] = X(i, j);
        out(i) = predict_raw(model, row);
    }
    return out;
}

DatasetPrediction predict_dataset(const RegressionModel& model, std::span<const features::FeatureVector> rows) {
    if (rows.empty()) throw EmptyRows("predict_dataset: no rows");
    DatasetPrediction out;
    out.dataset_id = rows.front().dataset_id;
    for (const auto& r : rows) {
        if (r.feature_order_version != model.feature_order_version) {
            throw VersionMismatch("features are '" + r.feature_order_version + "', model expects '" +
                                  model.feature_order_version + "'");
        }
        if (r.dataset_id != out.dataset_id) {
            throw ValidationError("predict_dataset: rows from '" + out.dataset_id + "' and '" + r.dataset_id + "'");
        }
    }
    double sum = 0.0;
    for (const auto& r : rows) {
        const double raw = predict_raw(model, r.values);
        out.per_class_predictions.push_back({r.class_label, raw});
        sum += raw;
    }
    double estimate = sum / static_cast<double>(rows.size());
    if (model.aggregation_mode == features::AggregationMode::per_dataset_mean) {
        std::vector<double> mean(rows.front().values.size(), 0.0);
        for (const auto& r : rows) {
            for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += r.values[j];
        }
        for (double& m : mean) m /= static_cast<double>(rows.size());
        estimate = predict_raw(model, mean);
    }
    out.predicted_accuracy = std::clamp(estimate, 0.0, 1.0);
    return out;
}

std::vector<double> default_lambda_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 12; ++i) grid.push_back(std::pow(10.0, -3.0 + 0.5 * i));
    return grid;
}

LambdaSelection select_lambda(std::span<const LambdaGroup> groups, std::span<const double> grid) {
    if (groups.size() < 2) throw InsufficientGroups("need at least 2 dataset groups, got " + std::to_string(groups.size()));
    if (grid.empty()) throw PreconditionError("select_lambda: empty grid");
    const Eigen::Index d = groups.front().X.cols();
    for (const auto& g : groups) {
        if (g.X.rows() == 0 || g.X.rows() != g.y.size()) throw EmptyRows("group '" + g.dataset_id + "' is empty");
        if (g.X.cols() != d) throw DimensionMismatch("groups disagree on feature width");
    }
    for (double l : grid) {
        if (!(l >= 0.0)) throw PreconditionError("select_lambda: negative grid value");
    }

    LambdaSelection out;
    double best_rmse = std::numeric_limits<double>::infinity();
    for (double lambda : grid) {
        double sq = 0.0;
        for (std::size_t held = 0; held < groups.size(); ++held) {
            Eigen::Index n_train = 0;
            for (std::size_t g = 0; g < groups.size(); ++g) {
                if (g != held) n_train += groups[g].X.rows();
            }
            Eigen::MatrixXd X(n_train, d);
            Eigen::VectorXd y(n_train);
            Eigen::Index at = 0;
            for (std::size_t g = 0; g < groups.size(); ++g) {
                if (g == held) continue;
                X.middleRows(at, groups[g].X.rows()) = groups[g].X;
                y.segment(at, groups[g].y.size()) = groups[g].y;
                at += groups[g].X.rows();
            }
            const auto model = fit_ridge(X, y, lambda);
            const double predicted = std::clamp(predict_raw(model, groups[held].X).mean(), 0.0, 1.0);
            const double err = predicted - groups[held].y.mean();
            sq += err * err;
        }
        const double rmse = std::sqrt(sq / static_cast<double>(groups.size()));
        out.cv_rmse.emplace_back(lambda, rmse);
        const double tol = 1e-12 * std::max(1.0, std::abs(best_rmse));
        if (rmse < best_rmse - tol || (std::abs(rmse - best_rmse) <= tol && lambda > out.lambda)) {
            best_rmse = std::min(best_rmse, rmse);
            out.lambda = lambda;
        }
    }
    return out;
}

std::string model_to_json(const RegressionModel& m) {
    ordered_json j;
    j["schema_version"] = kModelSchemaVersion;
    j["weights"] = m.weights;
    j["intercept"] = m.intercept;
    j["lambda"] = m.lambda;
    j["feature_means"] = m.feature_means;
    j["feature_stds"] = m.feature_stds;
    j["feature_order_version"] = m.feature_order_version;
    j["aggregation_mode"] = std::string(features::to_string(m.aggregation_mode));
    j["variant"] = m.variant;
    j["training_datasets"] = m.training_datasets;
    return j.dump(2) + "\n";
}

RegressionModel model_from_json(const std::string& text, const std::string& source) {
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(source + ": not a JSON object");
    if (!j.contains("schema_version")) throw ParseError(source + ": missing field 'schema_version'");
    if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kModelSchemaVersion) {
        throw SchemaVersionMismatch(source + ": schema_version " + j["schema_version"].dump());
    }
    RegressionModel m;
    try {
        m.weights = j.at("weights").get<std::vector<double>>();
        m.intercept = j.at("intercept").get<double>();
        m.lambda = j.at("lambda").get<double>();
        m.feature_means = j.at("feature_means").get<std::vector<double>>();
        m.feature_stds = j.at("feature_stds").get<std::vector<double>>();
        m.feature_order_version = j.at("feature_order_version").get<std::string>();
        m.aggregation_mode = features::parse_mode(j.at("aggregation_mode").get<std::string>());
        m.variant = j.value("variant", std::string("full"));
        m.training_datasets = j.value("training_datasets", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw ParseError(source + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ParseError(source + ": " + e.what());
    }
    const auto d = m.weights.size();
    if (m.feature_means.size() != d || m.feature_stds.size() != d) {
        throw ParseError(source + ": weights, feature_means and feature_stds differ in length");
    }
    auto finite = [](double x) { return std::isfinite(x); };
    if (!std::all_of(m.weights.begin(), m.weights.end(), finite) ||
        !std::all_of(m.feature_means.begin(), m.feature_means.end(), finite) || !std::isfinite(m.intercept) ||
        !std::isfinite(m.lambda) || m.lambda < 0.0) {
        throw ParseError(source + ": non-finite or negative parameter");
    }
    for (double s : m.feature_stds) {
        if (!(s > 0.0) || !std::isfinite(s)) throw ParseError(source + ": feature_stds must be positive");
    }
    return m;
}

void save_model(const RegressionModel& model, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << model_to_json(model);
}

RegressionModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str(), path.string());
}

}  // namespace plp::regressor
