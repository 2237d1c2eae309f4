#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "eduvid/eda.hpp"
#include "eduvid/model.hpp"

namespace eduvid::insight {

enum class Direction { Positive, Negative };

std::string_view to_string(Direction d) noexcept;

struct FeatureInfluence {
    std::string feature_name;
    double weight = 0.0;
    int rank = 0;  // 1 = largest |weight|
    Direction direction = Direction::Positive;

    bool operator==(const FeatureInfluence&) const = default;
};

/// Sorted by |weight| descending, ties by feature name ascending. A zero
/// weight counts as positive.
std::vector<FeatureInfluence> rank_features(const model::RegressionModel& model);

struct WhatIfScenario {
    std::string label;
    std::vector<double> baseline;
    std::vector<double> deltas;
    double predicted_baseline = 0.0;
    double predicted_new = 0.0;
    double delta_engagement = 0.0;  // sum_j weight_j * delta_j / std_j
    bool out_of_bounds = false;     // either prediction outside [0, 100]
};

/// Throws LengthMismatch or NonFiniteInput.
WhatIfScenario what_if(const model::RegressionModel& model, std::span<const double> baseline,
                       std::span<const double> deltas);

/// Index of a feature in the model, or UnknownResource.
std::size_t feature_index(const model::RegressionModel& model, std::string_view feature_name);

struct FeedbackConfig {
    double materiality = 0.1;     // fraction of max |weight|
    double min_r_squared = 0.3;   // below this every recommendation is flagged
    double max_vif = 5.0;         // above this the feature's recommendation is flagged
};

enum class Advice { Increase, Decrease };

std::string_view to_string(Advice a) noexcept;

struct Recommendation {
    std::string feature_name;
    Advice advice = Advice::Increase;
    double weight = 0.0;
    int rank = 0;
    bool caution = false;
    std::vector<std::string> caution_reasons;
    std::string text;
};

struct DesignReport {
    model::ModelMetrics metrics;
    FeedbackConfig config;
    std::vector<FeatureInfluence> influences;
    std::vector<Recommendation> recommendations;
    std::vector<WhatIfScenario> scenarios;
    std::vector<std::string> caveats;
};

/// vifs may be empty (no collinearity check) or one per feature. The EDA
/// report supplies Pearson r for the sign comparison; features missing from it
/// are skipped.
DesignReport design_feedback(const model::RegressionModel& model, const std::vector<FeatureInfluence>& influences,
                             const std::vector<double>& vifs, const eda::EDAReport& eda,
                             const FeedbackConfig& config = {});

nlohmann::json to_json(const FeatureInfluence& f);
nlohmann::json to_json(const WhatIfScenario& s);
nlohmann::json to_json(const DesignReport& report);
std::string to_markdown(const DesignReport& report);

}  // namespace eduvid::insight
