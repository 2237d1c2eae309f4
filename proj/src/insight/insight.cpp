#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "eduvid/error.hpp"
#include "eduvid/insight.hpp"

namespace eduvid::insight {

std::string_view to_string(Direction d) noexcept { return d == Direction::Positive ? "positive" : "negative"; }

std::string_view to_string(Advice a) noexcept { return a == Advice::Increase ? "increase" : "decrease"; }

std::vector<FeatureInfluence> rank_features(const model::RegressionModel& model) {
    std::vector<FeatureInfluence> out;
    const auto& names = model.feature_names();
    for (std::size_t j = 0; j < model.weights.size(); ++j) {
        const double w = model.weights[j];
        out.push_back({j < names.size() ? names[j] : "feature_" + std::to_string(j), w, 0,
                       w < 0.0 ? Direction::Negative : Direction::Positive});
    }
    std::sort(out.begin(), out.end(), [](const FeatureInfluence& a, const FeatureInfluence& b) {
        const double ma = std::abs(a.weight), mb = std::abs(b.weight);
        if (ma != mb) return ma > mb;
        return a.feature_name < b.feature_name;
    });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i + 1);
    return out;
}

std::size_t feature_index(const model::RegressionModel& model, std::string_view feature_name) {
    const auto& names = model.feature_names();
    const auto it = std::find(names.begin(), names.end(), feature_name);
    if (it == names.end())
        throw Error(ErrorKind::UnknownResource, "model has no feature '" + std::string(feature_name) + "'",
                    {.field = "feature"});
    return static_cast<std::size_t>(it - names.begin());
}

WhatIfScenario what_if(const model::RegressionModel& model, std::span<const double> baseline,
                       std::span<const double> deltas) {
    const std::size_t p = model.weights.size();
    if (baseline.size() != p)
        throw Error(ErrorKind::LengthMismatch, "baseline has " + std::to_string(baseline.size()) + " values, model " +
                                                   std::to_string(p), {.field = "baseline"});
    if (deltas.size() != p)
        throw Error(ErrorKind::LengthMismatch, "deltas has " + std::to_string(deltas.size()) + " values, model " +
                                                   std::to_string(p), {.field = "deltas"});
    for (std::size_t j = 0; j < p; ++j)
        if (!std::isfinite(deltas[j]))
            throw Error(ErrorKind::NonFiniteInput, "delta is not finite", {.field = "deltas." + model.feature_names()[j]});

    WhatIfScenario s;
    s.baseline.assign(baseline.begin(), baseline.end());
    s.deltas.assign(deltas.begin(), deltas.end());
    const auto before = model::predict(model, baseline);
    s.predicted_baseline = before.value;
    double delta = 0.0;
    for (std::size_t j = 0; j < p; ++j) delta += model.weights[j] * (deltas[j] / model.standardizer.stds[j]);
    s.delta_engagement = delta;
    s.predicted_new = before.value + delta;
    s.out_of_bounds = before.out_of_bounds || s.predicted_new < 0.0 || s.predicted_new > 100.0;
    return s;
}

namespace {

struct FeatureWording {
    std::string_view label;
    std::string_view unit;
    std::string_view increase;
    std::string_view decrease;
};

const std::map<std::string_view, FeatureWording>& wordings() {
    static const std::map<std::string_view, FeatureWording> table{
        {"duration_min", {"video duration", "min", "Allow longer videos", "Keep videos shorter"}},
        {"word_count", {"total words", "words", "Use fuller narration", "Trim narration"}},
        {"speaking_speed_wpm", {"speaking speed", "wpm", "Speak faster", "Slow the delivery"}},
        {"scene_count", {"number of scenes", "scenes", "Add more scenes", "Use fewer scenes"}},
        {"scene_rate_spm", {"scene change rate", "scenes/min", "Cut between scenes more often",
                            "Hold each scene longer"}},
    };
    return table;
}

std::string fixed(double v, const char* fmt = "%.2f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v == 0.0 ? 0.0 : v);
    return buf;
}

std::string recommendation_text(const std::string& feature, Advice advice, double weight, double sd) {
    const auto& table = wordings();
    const auto it = table.find(feature);
    const std::string label = it != table.end() ? std::string(it->second.label) : feature;
    const std::string unit = it != table.end() ? " " + std::string(it->second.unit) : std::string();
    std::string head;
    if (it != table.end())
        head = std::string(advice == Advice::Increase ? it->second.increase : it->second.decrease);
    else
        head = std::string(advice == Advice::Increase ? "Increase " : "Decrease ") + feature;
    return head + ": one standard deviation more " + label + " (" + fixed(sd, "%.4g") + unit +
           ") goes with " + fixed(weight, "%+.2f") + " points of average percentage viewed.";
}

}  // namespace

DesignReport design_feedback(const model::RegressionModel& model, const std::vector<FeatureInfluence>& influences,
                             const std::vector<double>& vifs, const eda::EDAReport& eda, const FeedbackConfig& config) {
    const auto& names = model.feature_names();
    if (!vifs.empty() && vifs.size() != names.size())
        throw Error(ErrorKind::LengthMismatch, "vif list does not match the model's features", {.field = "vif"});

    DesignReport report;
    report.metrics = model.metrics;
    report.config = config;
    report.influences = influences;

    const bool low_r2 = model.metrics.r_squared < config.min_r_squared;
    if (low_r2)
        report.caveats.push_back("Model R^2 is " + fixed(model.metrics.r_squared, "%.4f") + ", below " +
                                 fixed(config.min_r_squared, "%.2g") +
                                 ": the features explain little of the variation in viewing, so every "
                                 "recommendation is tentative.");

    auto vif_of = [&](const std::string& name) -> std::optional<double> {
        if (vifs.empty()) return std::nullopt;
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) return std::nullopt;
        return vifs[static_cast<std::size_t>(it - names.begin())];
    };
    for (std::size_t j = 0; j < vifs.size(); ++j)
        if (vifs[j] > config.max_vif)
            report.caveats.push_back("VIF of " + names[j] + " is " +
                                     (std::isfinite(vifs[j]) ? fixed(vifs[j]) : std::string("infinite")) +
                                     " (above " + fixed(config.max_vif, "%.2g") +
                                     "): its weight is unstable because it overlaps with other features.");

    std::map<std::string, double> pearson_r;
    for (const auto& c : eda.correlations)
        if (c.r) pearson_r[c.feature_name] = *c.r;
    std::map<std::string, double> weight_of;
    for (const auto& f : influences) weight_of[f.feature_name] = f.weight;
    for (const auto& f : influences) {
        const auto r = pearson_r.find(f.feature_name);
        if (r == pearson_r.end() || r->second == 0.0 || f.weight == 0.0) continue;
        if ((r->second > 0.0) == (f.weight > 0.0)) continue;
        // Partner: a feature that correlates with the target in the same direction
        // but carries the opposite-signed weight; largest |weight| wins.
        std::string partner;
        double best = -1.0;
        for (const auto& g : influences) {
            if (g.feature_name == f.feature_name) continue;
            const auto gr = pearson_r.find(g.feature_name);
            if (gr == pearson_r.end() || (gr->second > 0.0) != (r->second > 0.0)) continue;
            if (g.weight == 0.0 || (g.weight > 0.0) == (f.weight > 0.0)) continue;
            if (std::abs(g.weight) > best) best = std::abs(g.weight), partner = g.feature_name;
        }
        std::string text = "Sign disagreement for " + f.feature_name + ": Pearson r = " + fixed(r->second, "%+.4f") +
                           " but regression weight = " + fixed(f.weight, "%+.2f") + "; ";
        if (!partner.empty())
            text += "likely collinearity between " + f.feature_name + " and " + partner + " (weight " +
                    fixed(weight_of[partner], "%+.2f") + ").";
        else
            text += "likely collinearity with the other features.";
        report.caveats.push_back(std::move(text));
    }

    double max_abs = 0.0;
    for (const auto& f : influences) max_abs = std::max(max_abs, std::abs(f.weight));
    for (const auto& f : influences) {
        if (max_abs == 0.0 || std::abs(f.weight) < config.materiality * max_abs) continue;
        Recommendation rec;
        rec.feature_name = f.feature_name;
        rec.advice = f.weight < 0.0 ? Advice::Decrease : Advice::Increase;
        rec.weight = f.weight;
        rec.rank = f.rank;
        if (low_r2) rec.caution_reasons.push_back("low_r_squared");
        if (const auto v = vif_of(f.feature_name); v && *v > config.max_vif) rec.caution_reasons.push_back("high_vif");
        rec.caution = !rec.caution_reasons.empty();
        double sd = 0.0;
        if (const auto it = std::find(names.begin(), names.end(), f.feature_name); it != names.end())
            sd = model.standardizer.stds[static_cast<std::size_t>(it - names.begin())];
        rec.text = recommendation_text(f.feature_name, rec.advice, f.weight, sd);
        report.recommendations.push_back(std::move(rec));
    }

    const auto& means = model.standardizer.means;
    for (std::size_t j = 0; j < names.size(); ++j) {
        std::vector<double> deltas(names.size(), 0.0);
        deltas[j] = model.standardizer.stds[j];
        auto s = what_if(model, means, deltas);
        s.label = "+1 SD " + names[j];
        report.scenarios.push_back(std::move(s));
    }
    return report;
}

nlohmann::json to_json(const FeatureInfluence& f) {
    return {{"feature_name", f.feature_name},
            {"weight", f.weight},
            {"rank", f.rank},
            {"direction", to_string(f.direction)}};
}

nlohmann::json to_json(const WhatIfScenario& s) {
    nlohmann::json j{{"baseline", s.baseline},
                     {"deltas", s.deltas},
                     {"predicted_baseline", s.predicted_baseline},
                     {"predicted_new", s.predicted_new},
                     {"delta_engagement", s.delta_engagement},
                     {"out_of_bounds", s.out_of_bounds}};
    if (!s.label.empty()) j["label"] = s.label;
    return j;
}

nlohmann::json to_json(const DesignReport& report) {
    using nlohmann::json;
    json influences = json::array(), recs = json::array(), scenarios = json::array();
    for (const auto& f : report.influences) influences.push_back(to_json(f));
    for (const auto& r : report.recommendations)
        recs.push_back({{"feature_name", r.feature_name},
                        {"advice", to_string(r.advice)},
                        {"weight", r.weight},
                        {"rank", r.rank},
                        {"caution", r.caution},
                        {"caution_reasons", r.caution_reasons},
                        {"text", r.text}});
    for (const auto& s : report.scenarios) scenarios.push_back(to_json(s));
    return json{{"model",
                 {{"r_squared", report.metrics.r_squared}, {"rmse", report.metrics.rmse}, {"n", report.metrics.n}}},
                {"config",
                 {{"materiality", report.config.materiality},
                  {"min_r_squared", report.config.min_r_squared},
                  {"max_vif", report.config.max_vif}}},
                {"influences", std::move(influences)},
                {"recommendations", std::move(recs)},
                {"scenarios", std::move(scenarios)},
                {"caveats", report.caveats}};
}

std::string to_markdown(const DesignReport& report) {
    std::string md = "# Design feedback\n\n";
    md += "Model fit: R^2 " + fixed(report.metrics.r_squared, "%.4f") + ", RMSE " + fixed(report.metrics.rmse) +
          " points, n = " + std::to_string(report.metrics.n) + ".\n\n";

    md += "## Feature influence\n\n| Rank | Feature | Weight | Direction |\n|---:|---|---:|---|\n";
    for (const auto& f : report.influences)
        md += "| " + std::to_string(f.rank) + " | " + f.feature_name + " | " + fixed(f.weight, "%+.2f") + " | " +
              std::string(to_string(f.direction)) + " |\n";

    md += "\n## Recommendations\n\n";
    if (report.recommendations.empty()) md += "No feature passes the materiality threshold.\n";
    for (const auto& r : report.recommendations) {
        md += "- " + r.text;
        if (r.caution) {
            md += " **Caution:** ";
            for (std::size_t i = 0; i < r.caution_reasons.size(); ++i)
                md += (i ? ", " : "") + r.caution_reasons[i];
            md += ".";
        }
        md += "\n";
    }

    md += "\n## What-if scenarios (from training means)\n\n| Scenario | Baseline | New | Change |\n|---|---:|---:|---:|\n";
    for (const auto& s : report.scenarios)
        md += "| " + s.label + " | " + fixed(s.predicted_baseline) + " | " + fixed(s.predicted_new) + " | " +
              fixed(s.delta_engagement, "%+.2f") + " |\n";

    if (!report.caveats.empty()) {
        md += "\n## Caveats\n\n";
        for (const auto& c : report.caveats) md += "- " + c + "\n";
    }
    return md;
}

}  // namespace eduvid::insight
