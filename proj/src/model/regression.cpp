#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "eduvid/error.hpp"
#include "eduvid/model.hpp"

namespace eduvid::model {

namespace {

void require_finite(const Matrix& m, std::string_view what) {
    if (!m.allFinite()) throw Error(ErrorKind::NonFiniteInput, std::string(what) + " contains a non-finite value");
}

Matrix with_intercept(const Matrix& X) {
    Matrix A(X.rows(), X.cols() + 1);
    A.col(0).setOnes();
    A.rightCols(X.cols()) = X;
    return A;
}

// Relative pivot threshold below which a column counts as dependent.
constexpr double kRankThreshold = 1e-10;

}  // namespace

Standardizer fit_standardizer(const Matrix& X, std::vector<std::string> feature_names) {
    const auto n = X.rows(), p = X.cols();
    if (n < 2) throw Error(ErrorKind::TooFewRows, "standardization needs at least 2 rows");
    if (feature_names.size() != static_cast<std::size_t>(p))
        throw Error(ErrorKind::LengthMismatch, std::to_string(feature_names.size()) + " names for " +
                                                   std::to_string(p) + " columns");
    require_finite(X, "feature matrix");

    Standardizer s;
    s.feature_names = std::move(feature_names);
    s.means.resize(p);
    s.stds.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto col = X.col(j);
        double mean = col.mean();
        mean += (col.array() - mean).mean();  // second pass removes most of the first pass's rounding
        const double var = (col.array() - mean).square().mean();
        const bool constant = (col.array() == col(0)).all();
        if (constant || !(var > 0.0))
            throw Error(ErrorKind::ZeroVarianceColumn, "column has zero variance",
                        {.field = s.feature_names[static_cast<std::size_t>(j)]});
        s.means[j] = mean;
        s.stds[j] = std::sqrt(var);
    }
    return s;
}

Matrix transform(const Standardizer& standardizer, const Matrix& X) {
    if (static_cast<std::size_t>(X.cols()) != standardizer.size())
        throw Error(ErrorKind::LengthMismatch, "matrix has " + std::to_string(X.cols()) + " columns, standardizer " +
                                                   std::to_string(standardizer.size()));
    Matrix Z(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        Z.col(j) = (X.col(j).array() - standardizer.means[j]) / standardizer.stds[j];
    return Z;
}

OlsFit fit_ols(const Matrix& X_std, const Vector& y) {
    const auto n = X_std.rows(), p = X_std.cols();
    if (y.size() != n)
        throw Error(ErrorKind::LengthMismatch, std::to_string(n) + " rows but " + std::to_string(y.size()) + " targets");
    if (n < p + 1)
        throw Error(ErrorKind::TooFewRows,
                    std::to_string(n) + " rows cannot determine " + std::to_string(p + 1) + " coefficients");
    require_finite(X_std, "feature matrix");
    if (!y.allFinite()) throw Error(ErrorKind::NonFiniteInput, "target contains a non-finite value");

    const Matrix A = with_intercept(X_std);
    Eigen::ColPivHouseholderQR<Matrix> qr(A);
    qr.setThreshold(kRankThreshold);
    if (qr.rank() < A.cols())
        throw Error(ErrorKind::RankDeficient, "design matrix has rank " + std::to_string(qr.rank()) + " < " +
                                                  std::to_string(A.cols()) + " (collinear features)");
    const Vector beta = qr.solve(y);

    OlsFit fit;
    fit.intercept = beta(0);
    fit.weights.assign(beta.data() + 1, beta.data() + beta.size());
    return fit;
}

Prediction predict(const RegressionModel& model, std::span<const double> features) {
    const auto& s = model.standardizer;
    if (features.size() != model.weights.size() || features.size() != s.size())
        throw Error(ErrorKind::LengthMismatch, "expected " + std::to_string(model.weights.size()) + " features, got " +
                                                   std::to_string(features.size()));
    double y = model.intercept;
    for (std::size_t j = 0; j < features.size(); ++j) {
        if (!std::isfinite(features[j]))
            throw Error(ErrorKind::NonFiniteInput, "feature value is not finite", {.field = s.feature_names[j]});
        y += model.weights[j] * ((features[j] - s.means[j]) / s.stds[j]);
    }
    return Prediction{y, y < 0.0 || y > 100.0};
}

ModelMetrics metrics_from_predictions(std::span<const double> y, std::span<const double> predicted) {
    if (y.size() != predicted.size())
        throw Error(ErrorKind::LengthMismatch, "targets and predictions differ in length");
    if (y.empty()) throw Error(ErrorKind::TooFewRows, "no rows to evaluate");
    const double n = static_cast<double>(y.size());
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sse = 0.0, sst = 0.0;
    bool constant = true;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sse += (y[i] - predicted[i]) * (y[i] - predicted[i]);
        sst += (y[i] - mean) * (y[i] - mean);
        constant = constant && y[i] == y[0];
    }
    if (constant || sst == 0.0) throw Error(ErrorKind::ZeroVarianceTarget, "target has zero variance");
    return ModelMetrics{std::sqrt(sse / n), 1.0 - sse / sst, y.size()};
}

ModelMetrics evaluate(const RegressionModel& model, const Matrix& X, const Vector& y) {
    if (X.rows() != y.size()) throw Error(ErrorKind::LengthMismatch, "rows and targets differ in length");
    std::vector<double> predicted(static_cast<std::size_t>(X.rows()));
    std::vector<double> row(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) row[j] = X(i, j);
        predicted[i] = predict(model, row).value;
    }
    return metrics_from_predictions(std::span(y.data(), static_cast<std::size_t>(y.size())), predicted);
}

std::vector<double> vif(const Matrix& X_std) {
    const auto n = X_std.rows(), p = X_std.cols();
    require_finite(X_std, "feature matrix");
    std::vector<double> out(static_cast<std::size_t>(p), 1.0);
    if (p < 2) return out;
    if (n < p + 1)
        throw Error(ErrorKind::TooFewRows, "VIF needs more rows than columns");
    for (Eigen::Index j = 0; j < p; ++j) {
        Matrix others(n, p - 1);
        for (Eigen::Index c = 0, k = 0; c < p; ++c)
            if (c != j) others.col(k++) = X_std.col(c);
        const Matrix A = with_intercept(others);
        const Vector target = X_std.col(j);
        Eigen::ColPivHouseholderQR<Matrix> qr(A);
        qr.setThreshold(kRankThreshold);
        const Vector fitted = A * qr.solve(target);
        const double sse = (target - fitted).squaredNorm();
        const double sst = (target.array() - target.mean()).square().sum();
        const double unexplained = sst > 0.0 ? sse / sst : 0.0;
        out[static_cast<std::size_t>(j)] =
            unexplained <= 1e-10 ? std::numeric_limits<double>::infinity() : 1.0 / unexplained;
    }
    return out;
}

std::vector<unsigned> fold_assignment(std::size_t n, unsigned folds, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    std::vector<unsigned> fold(n);
    for (std::size_t pos = 0; pos < n; ++pos) fold[order[pos]] = static_cast<unsigned>(pos % folds);
    return fold;
}

Matrix design_matrix(const dataset::ModelingView& view) {
    Matrix X(static_cast<Eigen::Index>(view.features.size()), static_cast<Eigen::Index>(dataset::kFeatureCount));
    for (std::size_t i = 0; i < view.features.size(); ++i)
        for (std::size_t j = 0; j < dataset::kFeatureCount; ++j) X(i, j) = view.features[i][j];
    return X;
}

namespace {

std::vector<std::string> feature_name_list() {
    return {dataset::kFeatureNames.begin(), dataset::kFeatureNames.end()};
}

RegressionModel fit_model(const Matrix& X, const Vector& y) {
    RegressionModel m;
    m.standardizer = fit_standardizer(X, feature_name_list());
    auto fit = fit_ols(transform(m.standardizer, X), y);
    m.weights = std::move(fit.weights);
    m.intercept = fit.intercept;
    return m;
}

}  // namespace

TrainResult train(const dataset::AnalysisDataset& ds, const TrainOptions& options) {
    const auto view = dataset::modeling_view(ds);
    const Matrix X = design_matrix(view);
    const Vector y = Eigen::Map<const Vector>(view.target.data(), static_cast<Eigen::Index>(view.target.size()));

    TrainResult result;
    result.dataset_rows = ds.rows.size();
    result.trained_at = options.trained_at;
    result.model = fit_model(X, y);
    result.model.metrics = evaluate(result.model, X, y);
    result.vifs = vif(transform(result.model.standardizer, X));

    if (options.cv_folds > 0) {
        const std::size_t n = view.target.size();
        if (options.cv_folds < 2 || options.cv_folds > n)
            throw Error(ErrorKind::ValueError, "cv folds must be in [2, " + std::to_string(n) + "]", {.field = "cv"});
        const auto fold = fold_assignment(n, options.cv_folds, options.seed);
        std::vector<double> predicted(n);
        for (unsigned f = 0; f < options.cv_folds; ++f) {
            std::vector<Eigen::Index> train_idx, test_idx;
            for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? test_idx : train_idx).push_back(static_cast<Eigen::Index>(i));
            const Matrix Xtr = X(train_idx, Eigen::all);
            const Vector ytr = y(train_idx);
            RegressionModel m;
            try {
                m = fit_model(Xtr, ytr);
            } catch (const Error& e) {
                throw Error(e.kind(), "fold " + std::to_string(f) + ": " + e.message(), e.context());
            }
            std::vector<double> row(dataset::kFeatureCount);
            for (auto i : test_idx) {
                for (std::size_t j = 0; j < dataset::kFeatureCount; ++j) row[j] = X(i, static_cast<Eigen::Index>(j));
                predicted[static_cast<std::size_t>(i)] = predict(m, row).value;
            }
        }
        result.cross_validation = CrossValidation{options.cv_folds, options.seed,
                                                  metrics_from_predictions(view.target, predicted)};
    }
    return result;
}

namespace {

nlohmann::json metrics_json(const ModelMetrics& m) {
    return {{"rmse", m.rmse}, {"r_squared", m.r_squared}, {"n", m.n}};
}

ModelMetrics metrics_from(const nlohmann::json& j) {
    return {j.at("rmse").get<double>(), j.at("r_squared").get<double>(), j.at("n").get<std::size_t>()};
}

}  // namespace

nlohmann::json to_json(const TrainResult& r) {
    using nlohmann::json;
    json vifs = json::array();
    for (double v : r.vifs) vifs.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    json metrics = metrics_json(r.model.metrics);
    metrics["kind"] = "in_sample";
    json cv = nullptr;
    if (r.cross_validation) {
        cv = metrics_json(r.cross_validation->metrics);
        cv["kind"] = "k_fold";
        cv["folds"] = r.cross_validation->folds;
        cv["seed"] = r.cross_validation->seed;
    }
    return json{{"feature_names", r.model.standardizer.feature_names},
                {"means", r.model.standardizer.means},
                {"stds", r.model.standardizer.stds},
                {"weights", r.model.weights},
                {"intercept", r.model.intercept},
                {"target_name", dataset::kTargetName},
                {"metrics", std::move(metrics)},
                {"cross_validation", std::move(cv)},
                {"vif", std::move(vifs)},
                {"training",
                 {{"dataset_rows", r.dataset_rows},
                  {"complete_rows", r.model.metrics.n},
                  {"trained_at", r.trained_at ? json(*r.trained_at) : json(nullptr)}}}};
}

TrainResult train_result_from_json(const nlohmann::json& j) {
    try {
        TrainResult r;
        auto& m = r.model;
        m.standardizer.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.standardizer.means = j.at("means").get<std::vector<double>>();
        m.standardizer.stds = j.at("stds").get<std::vector<double>>();
        m.weights = j.at("weights").get<std::vector<double>>();
        m.intercept = j.at("intercept").get<double>();
        m.metrics = metrics_from(j.at("metrics"));
        const std::size_t p = m.weights.size();
        if (m.standardizer.feature_names.size() != p || m.standardizer.means.size() != p || m.standardizer.stds.size() != p)
            throw Error(ErrorKind::SchemaError, "feature_names, means, stds and weights differ in length");
        for (double s : m.standardizer.stds)
            if (!(s > 0.0)) throw Error(ErrorKind::SchemaError, "standard deviations must be positive");
        if (auto it = j.find("vif"); it != j.end() && it->is_array())
            for (const auto& v : *it)
                r.vifs.push_back(v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>());
        if (auto it = j.find("cross_validation"); it != j.end() && !it->is_null())
            r.cross_validation = CrossValidation{it->at("folds").get<unsigned>(), it->at("seed").get<std::uint64_t>(),
                                                 metrics_from(*it)};
        if (auto it = j.find("training"); it != j.end()) {
            r.dataset_rows = it->value("dataset_rows", std::size_t{0});
            if (auto t = it->find("trained_at"); t != it->end() && t->is_string()) r.trained_at = t->get<std::string>();
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::SchemaError, std::string("malformed model: ") + e.what());
    }
}

}  // namespace eduvid::model
