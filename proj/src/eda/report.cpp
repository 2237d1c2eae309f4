#include <cmath>

#include "eduvid/eda.hpp"
#include "eduvid/error.hpp"

namespace eduvid::eda {

EDAReport eda_report(const dataset::AnalysisDataset& ds, double span) {
    const auto view = dataset::modeling_view(ds);
    const std::size_t n = view.target.size();
    if (n < 3)
        throw Error(ErrorKind::TooFewCompleteRows, std::to_string(n) + " complete rows; EDA needs at least 3");

    EDAReport report;
    report.span = span;
    report.total_rows = ds.rows.size();
    report.complete_rows = n;

    for (std::size_t j = 0; j < dataset::kFeatureCount; ++j) {
        std::vector<double> values;
        for (const auto& row : ds.rows) {
            if (!row.features) continue;
            const double v = dataset::feature_vector(*row.features)[j];
            if (std::isfinite(v)) values.push_back(v);
        }
        report.histograms.push_back(histogram(values, 15, std::string(dataset::kFeatureNames[j])));
    }
    {
        std::vector<double> values;
        for (const auto& row : ds.rows)
            if (row.average_percentage_viewed && std::isfinite(*row.average_percentage_viewed))
                values.push_back(*row.average_percentage_viewed);
        report.histograms.push_back(histogram(values, 15, std::string(dataset::kTargetName)));
    }

    std::vector<double> column(n);
    for (std::size_t j = 0; j < dataset::kFeatureCount; ++j) {
        const std::string name(dataset::kFeatureNames[j]);
        for (std::size_t i = 0; i < n; ++i) column[i] = view.features[i][j];

        CorrelationResult corr{name, std::nullopt, n};
        try {
            corr.r = pearson(column, view.target);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::ZeroVariance) throw;
        }
        report.correlations.push_back(std::move(corr));
        report.curves.push_back(loess(column, view.target, span, std::nullopt, name));
    }
    return report;
}

nlohmann::json to_json(const EDAReport& report) {
    using nlohmann::json;
    json hist = json::array(), corr = json::array(), curves = json::array();
    for (const auto& h : report.histograms)
        hist.push_back({{"feature_name", h.feature_name}, {"bin_edges", h.bin_edges}, {"counts", h.counts}, {"n", h.n}});
    for (const auto& c : report.correlations)
        corr.push_back({{"feature_name", c.feature_name}, {"r", c.r ? json(*c.r) : json(nullptr)}, {"n", c.n}});
    for (const auto& c : report.curves)
        curves.push_back({{"feature_name", c.feature_name},
                          {"span", c.span},
                          {"degree", c.degree},
                          {"eval_x", c.eval_x},
                          {"fitted_y", c.fitted_y}});
    return json{{"span", report.span},
                {"total_rows", report.total_rows},
                {"complete_rows", report.complete_rows},
                {"target_name", dataset::kTargetName},
                {"histograms", std::move(hist)},
                {"correlations", std::move(corr)},
                {"loess", std::move(curves)}};
}

EDAReport eda_report_from_json(const nlohmann::json& j) {
    try {
        EDAReport report;
        report.span = j.at("span").get<double>();
        report.total_rows = j.at("total_rows").get<std::size_t>();
        report.complete_rows = j.at("complete_rows").get<std::size_t>();
        for (const auto& h : j.at("histograms"))
            report.histograms.push_back({h.at("feature_name").get<std::string>(),
                                         h.at("bin_edges").get<std::vector<double>>(),
                                         h.at("counts").get<std::vector<std::size_t>>(), h.at("n").get<std::size_t>()});
        for (const auto& c : j.at("correlations")) {
            CorrelationResult corr{c.at("feature_name").get<std::string>(), std::nullopt, c.at("n").get<std::size_t>()};
            if (!c.at("r").is_null()) corr.r = c.at("r").get<double>();
            report.correlations.push_back(std::move(corr));
        }
        for (const auto& c : j.at("loess"))
            report.curves.push_back({c.at("feature_name").get<std::string>(), c.at("eval_x").get<std::vector<double>>(),
                                     c.at("fitted_y").get<std::vector<double>>(), c.at("span").get<double>(),
                                     c.at("degree").get<int>()});
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::SchemaError, std::string("malformed EDA report: ") + e.what());
    }
}

}  // namespace eduvid::eda
