#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "eduvid/error.hpp"
#include "eduvid/model.hpp"
#include "oracles.hpp"
#include "synth.hpp"

using namespace eduvid;
using namespace eduvid::model;

namespace {

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an eduvid::Error");
    return ErrorKind::IoError;
}

Matrix random_matrix(testing::Rng& rng, Eigen::Index n, Eigen::Index p) {
    Matrix X(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < p; ++j) X(i, j) = rng.uniform(-3, 3) * (1 + j) + 2 * j;
    return X;
}

std::vector<std::string> names(Eigen::Index p) {
    std::vector<std::string> out;
    for (Eigen::Index j = 0; j < p; ++j) out.push_back("f" + std::to_string(j));
    return out;
}

dataset::AnalysisDataset planted_dataset(testing::Rng& rng, std::size_t n, double noise) {
    dataset::AnalysisDataset ds;
    for (std::size_t i = 0; i < n; ++i) {
        dataset::DatasetRow row;
        row.video_id = "v" + std::to_string(i);
        extract::VideoFeatures f;
        f.video_id = row.video_id;
        f.duration_min = rng.uniform(2, 10);
        f.word_count = static_cast<std::uint64_t>(rng.integer(200, 1500));
        f.scene_count = static_cast<std::uint64_t>(rng.integer(0, 20));
        f.speaking_speed_wpm = static_cast<double>(f.word_count) / f.duration_min;
        f.scene_rate_spm = static_cast<double>(f.scene_count) / f.duration_min;
        row.features = f;
        row.average_percentage_viewed = std::clamp(90 - 4 * f.duration_min + noise * rng.normal(), 0.0, 100.0);
        row.complete = true;
        ds.rows.push_back(row);
    }
    return ds;
}

}  // namespace

TEST_CASE("standardizer on a single column") {
    Matrix X(3, 1);
    X << 1, 2, 3;
    const auto s = fit_standardizer(X, {"a"});
    CHECK(s.means[0] == 2.0);
    CHECK(s.stds[0] == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-15));
    const auto Z = transform(s, X);
    CHECK(Z(0, 0) == doctest::Approx(-1.224744871391589).epsilon(1e-14));
    CHECK(Z(1, 0) == 0.0);
    CHECK(Z(2, 0) == doctest::Approx(1.224744871391589).epsilon(1e-14));

    const auto again = transform(fit_standardizer(Z, {"a"}), Z);
    CHECK((again - Z).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("standardizer errors") {
    Matrix constant(4, 2);
    constant << 1, 5, 2, 5, 3, 5, 4, 5;
    try {
        fit_standardizer(constant, {"a", "b"});
        FAIL("expected ZeroVarianceColumn");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ZeroVarianceColumn);
        CHECK(e.context().field == "b");
    }
    CHECK(kind_of([] { fit_standardizer(Matrix::Ones(1, 1), {"a"}); }) == ErrorKind::TooFewRows);
    Matrix nan(2, 1);
    nan << 1, std::numeric_limits<double>::quiet_NaN();
    CHECK(kind_of([&] { fit_standardizer(nan, {"a"}); }) == ErrorKind::NonFiniteInput);
    CHECK(kind_of([] { fit_standardizer(Matrix::Ones(2, 2), {"a"}); }) == ErrorKind::LengthMismatch);
}

TEST_CASE("ols recovers an exact line") {
    Matrix X(5, 1);
    X << -2, -1, 0, 1, 2;
    const auto s = fit_standardizer(X, {"x"});
    const Matrix Z = transform(s, X);
    Vector y(5);
    for (int i = 0; i < 5; ++i) y(i) = 5 * Z(i, 0) + 10;
    const auto fit = fit_ols(Z, y);
    CHECK(fit.weights[0] == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(fit.intercept == doctest::Approx(10.0).epsilon(1e-14));

    const RegressionModel m{s, fit.weights, fit.intercept, {}};
    const auto metrics = evaluate(m, X, y);
    CHECK(metrics.r_squared == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(metrics.rmse <= 1e-12);
}

TEST_CASE("ols errors") {
    Matrix dup(6, 2);
    dup << 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6;
    CHECK(kind_of([&] { fit_ols(dup, Vector::LinSpaced(6, 0, 1)); }) == ErrorKind::RankDeficient);
    CHECK(kind_of([] { fit_ols(Matrix::Random(2, 2), Vector::Ones(2)); }) == ErrorKind::TooFewRows);

    // A constant target still fits; evaluating it is what fails.
    testing::Rng rng(2);
    const Matrix X = random_matrix(rng, 10, 2);
    const auto s = fit_standardizer(X, names(2));
    const auto fit = fit_ols(transform(s, X), Vector::Constant(10, 7.0));
    CHECK(std::fabs(fit.weights[0]) <= 1e-12);
    CHECK(fit.intercept == doctest::Approx(7.0));
    const RegressionModel m{s, fit.weights, fit.intercept, {}};
    CHECK(kind_of([&] { evaluate(m, X, Vector::Constant(10, 7.0)); }) == ErrorKind::ZeroVarianceTarget);
}

TEST_CASE("metrics formulas") {
    const std::vector<double> y{3, 4}, zero{0, 0}, mean{3.5, 3.5};
    CHECK(metrics_from_predictions(y, zero).rmse == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));
    CHECK(metrics_from_predictions(y, y).r_squared == 1.0);
    CHECK(metrics_from_predictions(y, y).rmse == 0.0);
    CHECK(metrics_from_predictions(y, mean).r_squared == 0.0);
    CHECK(metrics_from_predictions(y, mean).n == 2);
}

TEST_CASE("prediction identities") {
    testing::Rng rng(4);
    const Matrix X = random_matrix(rng, 30, 3);
    Vector y(30);
    for (int i = 0; i < 30; ++i) y(i) = X(i, 0) - 2 * X(i, 1) + 0.5 * X(i, 2) + rng.normal();
    const auto s = fit_standardizer(X, names(3));
    const auto fit = fit_ols(transform(s, X), y);
    const RegressionModel m{s, fit.weights, fit.intercept, {}};

    CHECK(predict(m, s.means).value == doctest::Approx(fit.intercept).epsilon(1e-14));
    for (std::size_t j = 0; j < 3; ++j) {
        auto x = s.means;
        x[j] += s.stds[j];
        CHECK(std::fabs(predict(m, x).value - (fit.intercept + fit.weights[j])) <= 1e-12);
    }
    const std::vector<double> two{1, 2};
    CHECK(kind_of([&] { predict(m, two); }) == ErrorKind::LengthMismatch);
    const std::vector<double> inf{1, 2, std::numeric_limits<double>::infinity()};
    CHECK(kind_of([&] { predict(m, inf); }) == ErrorKind::NonFiniteInput);

    const RegressionModel high{s, {0, 0, 0}, 150.0, {}};
    const auto p = predict(high, s.means);
    CHECK(p.value == 150.0);
    CHECK(p.out_of_bounds);
}

TEST_CASE("permuting features with their names leaves predictions unchanged") {
    testing::Rng rng(5);
    const Matrix X = random_matrix(rng, 25, 3);
    Vector y(25);
    for (int i = 0; i < 25; ++i) y(i) = 3 * X(i, 0) + X(i, 2) + rng.normal();
    Matrix P(25, 3);
    P << X.col(2), X.col(0), X.col(1);

    const auto s = fit_standardizer(X, {"a", "b", "c"});
    const auto fit = fit_ols(transform(s, X), y);
    const auto sp = fit_standardizer(P, {"c", "a", "b"});
    const auto fitp = fit_ols(transform(sp, P), y);
    const RegressionModel m{s, fit.weights, fit.intercept, {}};
    const RegressionModel mp{sp, fitp.weights, fitp.intercept, {}};
    for (int i = 0; i < 25; ++i) {
        const std::vector<double> row{X(i, 0), X(i, 1), X(i, 2)}, rowp{X(i, 2), X(i, 0), X(i, 1)};
        CHECK(std::fabs(predict(m, row).value - predict(mp, rowp).value) <= 1e-9);
    }
}

TEST_CASE("ols agrees with the normal-equations oracle and leaves orthogonal residuals") {
    testing::Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix X = random_matrix(rng, 40, 4);
        Vector y(40);
        for (int i = 0; i < 40; ++i) y(i) = rng.uniform(-5, 5) + X.row(i).sum() + rng.normal();
        const auto s = fit_standardizer(X, names(4));
        const Matrix Z = transform(s, X);
        const auto fit = fit_ols(Z, y);

        std::vector<std::vector<double>> rows(40, std::vector<double>(4));
        for (int i = 0; i < 40; ++i)
            for (int j = 0; j < 4; ++j) rows[i][j] = Z(i, j);
        const auto beta = oracle::normal_equations(rows, {y.data(), y.data() + 40});
        CHECK(std::fabs(beta[0] - fit.intercept) <= 1e-7);
        for (int j = 0; j < 4; ++j) CHECK(std::fabs(beta[j + 1] - fit.weights[j]) <= 1e-7);

        Vector r = y - Vector::Constant(40, fit.intercept);
        for (int j = 0; j < 4; ++j) r -= fit.weights[j] * Z.col(j);
        CHECK(std::fabs(r.sum()) <= 1e-8 * 40);
        for (int j = 0; j < 4; ++j) CHECK(std::fabs(r.dot(Z.col(j))) <= 1e-8 * 40);

        const auto again = fit_ols(Z, y);
        CHECK(again.weights == fit.weights);
        CHECK(again.intercept == fit.intercept);
    }
}

TEST_CASE("variance inflation factors") {
    Matrix orth(4, 2);
    orth << 1, 1, 1, -1, -1, 1, -1, -1;
    for (double v : vif(orth)) CHECK(std::fabs(v - 1.0) <= 1e-9);

    testing::Rng rng(12);
    Matrix dup = random_matrix(rng, 20, 3);
    dup.col(2) = dup.col(0);
    const auto inf = vif(dup);
    CHECK(std::isinf(inf[0]));
    CHECK(std::isinf(inf[2]));
    CHECK(std::isfinite(inf[1]));

    Matrix near = random_matrix(rng, 50, 3);
    for (int i = 0; i < 50; ++i) near(i, 2) = near(i, 0) + 0.01 * rng.normal();
    const auto v = vif(transform(fit_standardizer(near, names(3)), near));
    CHECK(v[0] > 100);
    CHECK(v[2] > 100);
    CHECK(v[1] < 2);

    CHECK(vif(Matrix::Random(5, 1)) == std::vector<double>{1.0});
}

TEST_CASE("fold assignment is balanced and seeded") {
    const auto a = fold_assignment(23, 5, 42);
    CHECK(a == fold_assignment(23, 5, 42));
    CHECK(a != fold_assignment(23, 5, 43));
    std::vector<int> sizes(5, 0);
    for (auto f : a) ++sizes[f];
    for (int s : sizes) CHECK((s == 4 || s == 5));
}

TEST_CASE("train end to end with cross-validation and JSON round-trip") {
    testing::Rng rng(13);
    const auto ds = planted_dataset(rng, 40, 1.0);
    TrainOptions opts;
    opts.cv_folds = 5;
    opts.trained_at = "2024-01-01T00:00:00Z";
    const auto result = train(ds, opts);
    CHECK(result.model.feature_names().size() == 5);
    CHECK(result.model.feature_names()[0] == "duration_min");
    CHECK(result.model.weights[0] < 0);
    CHECK(result.model.metrics.n == 40);
    CHECK(result.model.metrics.r_squared > 0.8);
    REQUIRE(result.cross_validation.has_value());
    CHECK(result.cross_validation->metrics.n == 40);
    CHECK(result.cross_validation->metrics.rmse >= result.model.metrics.rmse);
    CHECK(result.vifs.size() == 5);
    CHECK(result.dataset_rows == 40);

    const auto j = to_json(result);
    CHECK(j.at("metrics").at("kind") == "in_sample");
    CHECK(j.at("cross_validation").at("kind") == "k_fold");
    CHECK(j.at("training").at("trained_at") == "2024-01-01T00:00:00Z");
    const auto back = train_result_from_json(j);
    CHECK(back == result);
    CHECK(to_json(back).dump() == j.dump());

    CHECK(train(ds, opts) == result);
}

TEST_CASE("train errors") {
    testing::Rng rng(14);
    const auto ds = planted_dataset(rng, 10, 1.0);
    TrainOptions bad;
    bad.cv_folds = 11;
    try {
        train(ds, bad);
        FAIL("expected ValueError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ValueError);
        CHECK(e.context().field == "cv");
    }
    auto few = planted_dataset(rng, 5, 1.0);
    CHECK(kind_of([&] { train(few); }) == ErrorKind::TooFewRows);
    CHECK(kind_of([] { train_result_from_json(nlohmann::json::object()); }) == ErrorKind::SchemaError);
}
