#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "eduvid/dataset.hpp"

namespace eduvid::eda {

struct Histogram {
    std::string feature_name;
    std::vector<double> bin_edges;  // bins + 1, strictly increasing
    std::vector<std::size_t> counts;
    std::size_t n = 0;

    bool operator==(const Histogram&) const = default;
};

/// Equal-width bins over [min, max]; x == max goes to the last bin. A constant
/// sample lands in bin 0 over [min, min + 1).
Histogram histogram(std::span<const double> values, std::size_t bins = 15, std::string feature_name = {});

/// Pearson product-moment correlation. Throws LengthMismatch, TooFewPoints
/// (n < 2) or ZeroVariance.
double pearson(std::span<const double> x, std::span<const double> y);

struct CorrelationResult {
    std::string feature_name;
    std::optional<double> r;  // empty when the feature has zero variance
    std::size_t n = 0;

    bool operator==(const CorrelationResult&) const = default;
};

struct LoessCurve {
    std::string feature_name;
    std::vector<double> eval_x;
    std::vector<double> fitted_y;
    double span = 0.5;
    int degree = 1;

    bool operator==(const LoessCurve&) const = default;
};

/// Number of neighbours used per evaluation point: ceil(span * n), with a
/// 1e-9 tolerance so that e.g. 0.3 * 10 gives 3, not 4.
std::size_t loess_neighbours(double span, std::size_t n);

/// Degree-1 LOESS with tricube weights over the k = ceil(span*n) nearest
/// neighbours (no robustness iterations). When the weighted x spread vanishes
/// the local fit degrades to the weighted mean. `eval_x` defaults to the
/// sorted unique x values.
/// Throws LengthMismatch, TooFewPoints (n < 3), SpanTooSmall (span*n < 2) or
/// ValueError (span outside (0, 1]).
LoessCurve loess(std::span<const double> x, std::span<const double> y, double span = 0.5,
                 std::optional<std::vector<double>> eval_x = std::nullopt, std::string feature_name = {});

struct EDAReport {
    double span = 0.5;
    std::size_t total_rows = 0;
    std::size_t complete_rows = 0;
    std::vector<Histogram> histograms;  // five features, then the target
    std::vector<CorrelationResult> correlations;
    std::vector<LoessCurve> curves;

    bool operator==(const EDAReport&) const = default;
};

/// Histograms use every row where the value is present; correlations and
/// curves use complete rows only. Throws TooFewCompleteRows (< 3).
EDAReport eda_report(const dataset::AnalysisDataset& ds, double span = 0.5);

nlohmann::json to_json(const EDAReport& report);
EDAReport eda_report_from_json(const nlohmann::json& j);

/// File name -> SVG document: hist_<name>.svg, corr.svg, loess_<feature>.svg.
std::map<std::string, std::string> render_svgs(const EDAReport& report);

}  // namespace eduvid::eda
