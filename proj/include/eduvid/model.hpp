#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "eduvid/dataset.hpp"

namespace eduvid::model {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Per-column z-score parameters. Standard deviations are population (ddof 0).
struct Standardizer {
    std::vector<std::string> feature_names;
    std::vector<double> means;
    std::vector<double> stds;

    std::size_t size() const noexcept { return means.size(); }
    bool operator==(const Standardizer&) const = default;
};

/// Throws TooFewRows (n < 2), ZeroVarianceColumn (naming the feature) or
/// NonFiniteInput.
Standardizer fit_standardizer(const Matrix& X, std::vector<std::string> feature_names);
Matrix transform(const Standardizer& standardizer, const Matrix& X);

struct OlsFit {
    std::vector<double> weights;
    double intercept = 0.0;
};

/// Least squares with an intercept column, solved by column-pivoted
/// Householder QR. Throws TooFewRows (n < p + 1) or RankDeficient.
OlsFit fit_ols(const Matrix& X_std, const Vector& y);

struct ModelMetrics {
    double rmse = 0.0;
    double r_squared = 0.0;
    std::size_t n = 0;

    bool operator==(const ModelMetrics&) const = default;
};

struct RegressionModel {
    Standardizer standardizer;
    std::vector<double> weights;  // target units per feature standard deviation
    double intercept = 0.0;       // target units
    ModelMetrics metrics;

    const std::vector<std::string>& feature_names() const noexcept { return standardizer.feature_names; }
    bool operator==(const RegressionModel&) const = default;
};

struct Prediction {
    double value = 0.0;
    bool out_of_bounds = false;  // value outside [0, 100]; not clamped
};

/// Raw-unit features in the model's feature order. Throws LengthMismatch or
/// NonFiniteInput.
Prediction predict(const RegressionModel& model, std::span<const double> features);

/// rmse = sqrt(mean squared residual), r_squared = 1 - SSE/SST. Throws
/// ZeroVarianceTarget when y is constant.
ModelMetrics metrics_from_predictions(std::span<const double> y, std::span<const double> predicted);
ModelMetrics evaluate(const RegressionModel& model, const Matrix& X, const Vector& y);

/// Variance inflation factor per column, 1 / (1 - R_j^2) from regressing
/// column j on the others. Perfect collinearity yields +infinity.
std::vector<double> vif(const Matrix& X_std);

struct TrainOptions {
    unsigned cv_folds = 0;  // 0 disables cross-validation
    std::uint64_t seed = 42;
    std::optional<std::string> trained_at;
};

struct CrossValidation {
    unsigned folds = 0;
    std::uint64_t seed = 0;
    ModelMetrics metrics;  // pooled out-of-fold predictions

    bool operator==(const CrossValidation&) const = default;
};

struct TrainResult {
    RegressionModel model;  // metrics are in-sample
    std::vector<double> vifs;
    std::optional<CrossValidation> cross_validation;
    std::size_t dataset_rows = 0;
    std::optional<std::string> trained_at;

    bool operator==(const TrainResult&) const = default;
};

/// Fixed-seed k-fold assignment: a Fisher-Yates shuffle driven by mt19937_64,
/// then position i goes to fold i % k.
std::vector<unsigned> fold_assignment(std::size_t n, unsigned folds, std::uint64_t seed);

/// Complete rows of the dataset -> standardize -> OLS -> in-sample metrics,
/// VIFs and optional cross-validation.
TrainResult train(const dataset::AnalysisDataset& ds, const TrainOptions& options = {});

/// Design matrix of the complete rows in kFeatureNames order.
Matrix design_matrix(const dataset::ModelingView& view);

nlohmann::json to_json(const TrainResult& result);
TrainResult train_result_from_json(const nlohmann::json& j);

}  // namespace eduvid::model
