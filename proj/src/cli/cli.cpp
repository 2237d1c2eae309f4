#include <algorithm>
#include <cstdio>
#include <fstream>

#include <CLI11.hpp>

#include "eduvid/cli.hpp"
#include "eduvid/csv.hpp"
#include "eduvid/http_transport.hpp"
#include "eduvid/service.hpp"
#include "eduvid/workflow.hpp"

namespace eduvid::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kConfigKeys[] = {"threshold",   "min_gap", "stride",  "jobs",      "decoder_cmd",
                                            "span",        "materiality", "cv",  "seed",      "port",
                                            "bind",        "data_dir", "workers", "static_dir"};

std::map<std::string, std::string> load_config(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config" && i + 1 < args.size())
            path = args[i + 1];
        else if (args[i].starts_with("--config="))
            path = args[i].substr(9);
        else
            continue;
        auto values = workflow::parse_config(read_file(path));
        for (const auto& [key, value] : values)
            if (std::find(std::begin(kConfigKeys), std::end(kConfigKeys), key) == std::end(kConfigKeys))
                throw Error(ErrorKind::ValueError, "unknown config key", {.field = key});
        return values;
    }
    return {};
}

template <class T>
void config_default(const std::map<std::string, std::string>& config, const char* key, T& target) {
    const auto it = config.find(key);
    if (it == config.end()) return;
    if constexpr (std::is_same_v<T, std::string>) {
        target = it->second;
    } else if constexpr (std::is_floating_point_v<T>) {
        const auto v = parse_number(it->second);
        if (!v) throw Error(ErrorKind::ValueError, "expected a number", {.field = key});
        target = *v;
    } else {
        const auto v = parse_unsigned(it->second);
        if (!v) throw Error(ErrorKind::ValueError, "expected a non-negative integer", {.field = key});
        target = static_cast<T>(*v);
    }
}

std::string fmt(double v) { return format_number(v); }

std::pair<std::uint32_t, std::uint32_t> parse_fps(const std::string& text) {
    const auto slash = text.find('/');
    const auto num = parse_unsigned(text.substr(0, slash));
    const auto den = slash == std::string::npos ? std::optional<std::uint64_t>(1) : parse_unsigned(text.substr(slash + 1));
    if (!num || !den || *num == 0 || *den == 0 || *num > UINT32_MAX || *den > UINT32_MAX)
        throw Error(ErrorKind::ValueError, "fps must look like 25 or 30000/1001", {.field = "fps"});
    return {static_cast<std::uint32_t>(*num), static_cast<std::uint32_t>(*den)};
}

struct Options {
    bool json_output = false;
    std::string config_path;
    std::string project;

    // ingest
    std::string metadata_file, engagement_file;
    bool fetch = false;

    // extract
    std::vector<std::string> video_ids, frames, transcripts, videos;
    double threshold = 0.12, min_gap = 1.0;
    std::uint64_t stride = 1;
    unsigned jobs = 1;
    std::string decoder_cmd;

    // eda / train / report
    double span = 0.5;
    bool svg = false;
    unsigned cv = 0;
    std::uint64_t seed = 42;
    std::string timestamp;
    double materiality = 0.1;
    bool markdown = false;

    // whatif
    std::vector<std::string> whatif_features;
    std::vector<double> whatif_deltas;
    bool sigma = false;

    // serve
    service::ServiceConfig serve;
    std::string data_dir, static_dir;

    // evf-wrap
    std::uint32_t width = 0, height = 0;
    std::string fps, output, input;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    bool json_mode = std::find(args.begin(), args.end(), "--json") != args.end();

    auto fail = [&](const Error& e) {
        if (json_mode)
            out << workflow::dump_json(workflow::error_json(e));
        else
            err << "error: " << e.what() << "\n";
        return is_io_kind(e.kind()) ? 2 : 1;
    };

    std::map<std::string, std::string> config;
    try {
        config = load_config(args);
        config_default(config, "threshold", o.threshold);
        config_default(config, "min_gap", o.min_gap);
        config_default(config, "stride", o.stride);
        config_default(config, "jobs", o.jobs);
        config_default(config, "decoder_cmd", o.decoder_cmd);
        config_default(config, "span", o.span);
        config_default(config, "materiality", o.materiality);
        config_default(config, "cv", o.cv);
        config_default(config, "seed", o.seed);
        std::map<std::string, std::string> serve_keys;
        for (const auto& key : {"port", "bind", "data_dir", "workers", "static_dir", "decoder_cmd"})
            if (config.count(key)) serve_keys[key] = config.at(key);
        service::apply_config(o.serve, serve_keys);
    } catch (const Error& e) {
        return fail(e);
    }

    CLI::App app{"Educational video feature analysis pipeline", "eduvid"};
    app.require_subcommand(1);
    app.add_flag("--json", o.json_output, "Machine-readable JSON output");
    app.add_option("--config", o.config_path, "Flat key=value config file");

    auto project = [&](CLI::App* sub) {
        sub->add_option("--project,-p", o.project, "Project directory")->required();
    };

    auto* ingest_cmd = app.add_subcommand("ingest", "Record video metadata and import engagement metrics");
    project(ingest_cmd);
    ingest_cmd->add_option("--metadata", o.metadata_file, "Metadata request JSON")->check(CLI::ExistingFile);
    ingest_cmd->add_option("--engagement", o.engagement_file, "Analytics CSV export")->check(CLI::ExistingFile);
    ingest_cmd->add_flag("--fetch", o.fetch, "Fetch remote fields (uses EDUVID_API_KEY)");

    auto* extract_cmd = app.add_subcommand("extract", "Measure duration, words and scene changes per video");
    project(extract_cmd);
    extract_cmd->add_option("--video-id", o.video_ids, "Video id (repeat per video)")->required();
    extract_cmd->add_option("--frames", o.frames, "EVF1 frame stream (repeat per video)");
    extract_cmd->add_option("--video", o.videos, "Media file decoded through --decoder-cmd (repeat per video)");
    extract_cmd->add_option("--transcript", o.transcripts, "Transcript text file (repeat per video)")->required();
    extract_cmd->add_option("--threshold", o.threshold, "Scene-change threshold in (0, 1]")->capture_default_str();
    extract_cmd->add_option("--min-gap", o.min_gap, "Minimum seconds between scene changes")->capture_default_str();
    extract_cmd->add_option("--stride", o.stride, "Compare every Nth frame")->capture_default_str();
    extract_cmd->add_option("--jobs,-j", o.jobs, "Videos processed in parallel")->capture_default_str();
    extract_cmd->add_option("--decoder-cmd", o.decoder_cmd, "Command template with {input} and {output}");

    auto* dataset_cmd = app.add_subcommand("dataset", "Dataset operations");
    dataset_cmd->require_subcommand(1);
    auto* build_cmd = dataset_cmd->add_subcommand("build", "Join metadata, features and engagement");
    project(build_cmd);

    auto* eda_cmd = app.add_subcommand("eda", "Histograms, correlations and LOESS curves");
    project(eda_cmd);
    eda_cmd->add_option("--span", o.span, "LOESS neighbourhood fraction")->capture_default_str();
    eda_cmd->add_flag("--svg", o.svg, "Also write svg/*.svg charts");

    auto* train_cmd = app.add_subcommand("train", "Fit the standardized linear model");
    project(train_cmd);
    train_cmd->add_option("--cv", o.cv, "k-fold cross-validation (0 = off)")->capture_default_str();
    train_cmd->add_option("--seed", o.seed, "Shuffle seed for cross-validation")->capture_default_str();
    train_cmd->add_option("--timestamp", o.timestamp, "Training timestamp to record (ISO 8601 UTC)");

    auto* insight_cmd = app.add_subcommand("insight", "Feature influence and what-if simulation");
    insight_cmd->require_subcommand(1);
    auto* rank_cmd = insight_cmd->add_subcommand("rank", "Rank features by |weight|");
    project(rank_cmd);
    auto* whatif_cmd = insight_cmd->add_subcommand("whatif", "Predicted change for feature deltas from the means");
    project(whatif_cmd);
    whatif_cmd->add_option("--feature", o.whatif_features, "Feature name (repeat)")->required();
    whatif_cmd->add_option("--delta", o.whatif_deltas, "Change in raw units (repeat, paired with --feature)")->required();
    whatif_cmd->add_flag("--sigma", o.sigma, "Deltas are in training standard deviations");

    auto* report_cmd = app.add_subcommand("report", "Write report.json and report.md");
    project(report_cmd);
    report_cmd->add_option("--materiality", o.materiality, "Fraction of max |weight| worth a recommendation")->capture_default_str();
    report_cmd->add_flag("--markdown", o.markdown, "Print the Markdown report");

    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
    serve_cmd->add_option("--port", o.serve.port, "Listen port")->capture_default_str();
    serve_cmd->add_option("--bind", o.serve.bind, "Listen address")->capture_default_str();
    serve_cmd->add_option("--data-dir", o.data_dir, "Project store directory");
    serve_cmd->add_option("--decoder-cmd", o.decoder_cmd, "Command template with {input} and {output}");
    serve_cmd->add_option("--workers", o.serve.workers, "Concurrent extraction videos")->capture_default_str();
    serve_cmd->add_option("--static-dir", o.static_dir, "Serve web UI assets from this directory");

    auto* wrap_cmd = app.add_subcommand("evf-wrap", "Wrap raw 8-bit gray frames into an EVF1 stream");
    wrap_cmd->add_option("--width", o.width, "Frame width")->required();
    wrap_cmd->add_option("--height", o.height, "Frame height")->required();
    wrap_cmd->add_option("--fps", o.fps, "Frame rate, N or N/D")->required();
    wrap_cmd->add_option("--output,-o", o.output, "EVF1 file to write")->required();
    wrap_cmd->add_option("--input,-i", o.input, "Raw frames (default: stdin)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        return fail(Error(ErrorKind::ValueError, e.what()));
    }
    json_mode = o.json_output;

    auto emit = [&](const json& j, const std::string& text) {
        if (json_mode)
            out << workflow::dump_json(j);
        else
            out << text;
    };

    const workflow::Layout layout{o.project};
    try {
        if (ingest_cmd->parsed()) {
            if (o.metadata_file.empty() && o.engagement_file.empty())
                throw Error(ErrorKind::ValueError, "give --metadata and/or --engagement", {.field = "metadata"});
            json result = json::object();
            std::string text;
            if (!o.metadata_file.empty()) {
                json body;
                try {
                    body = json::parse(read_file(o.metadata_file));
                } catch (const json::parse_error& e) {
                    throw Error(ErrorKind::SchemaError, std::string("metadata file is not valid JSON: ") + e.what());
                }
                auto request = workflow::parse_metadata_request(body);
                request.fetch_remote = request.fetch_remote || o.fetch;
                std::unique_ptr<ingest::Transport> transport;
                if (request.fetch_remote) transport = std::make_unique<ingest::HttpTransport>();
                const char* key = std::getenv("EDUVID_API_KEY");
                const auto r = workflow::ingest_metadata(layout, request, transport.get(), key ? key : "");
                json tags = json::array();
                for (const auto& v : r.videos) tags.push_back({{"video_id", v.remote.video_id}, {"dataset_tag", v.dataset_tag.value()}});
                result["metadata"] = {{"videos", std::move(tags)}, {"tag_collisions", r.collisions.size()}};
                text += "metadata.csv: " + std::to_string(r.videos.size()) + " videos\n";
                for (const auto& c : r.collisions)
                    text += "warning: " + c.first_video_id + " and " + c.second_video_id + " share tag " +
                            c.dataset_tag + " but differ in " + c.field + "\n";
            }
            if (!o.engagement_file.empty()) {
                const auto records = workflow::ingest_engagement(layout, read_file(o.engagement_file));
                result["engagement"] = {{"records", records.size()}};
                text += "engagement.csv: " + std::to_string(records.size()) + " records\n";
            }
            emit(result, text);
        } else if (extract_cmd->parsed()) {
            const std::size_t n = o.video_ids.size();
            const bool media = !o.videos.empty();
            if (o.transcripts.size() != n || (media ? o.videos.size() : o.frames.size()) != n || (media && !o.frames.empty()))
                throw Error(ErrorKind::ValueError,
                            "give one --transcript and one --frames (or --video) per --video-id", {.field = "video-id"});
            std::vector<workflow::ExtractItem> items;
            for (std::size_t i = 0; i < n; ++i) {
                workflow::ExtractItem item{o.video_ids[i], media ? fs::path() : fs::path(o.frames[i]), o.transcripts[i], std::nullopt};
                if (media) item.video = o.videos[i];
                items.push_back(std::move(item));
            }
            workflow::ExtractOptions options;
            options.detector = {o.threshold, o.min_gap, o.stride};
            options.jobs = std::max(1u, o.jobs);
            if (!o.decoder_cmd.empty()) options.decoder_cmd = o.decoder_cmd;
            const auto features = workflow::extract_videos(layout, items, options);
            workflow::store_features(layout, features);
            json rows = json::array();
            std::string text;
            for (const auto& f : features) {
                rows.push_back(workflow::to_json(f));
                text += f.video_id + ": duration_min=" + fmt(f.duration_min) + " word_count=" + std::to_string(f.word_count) +
                        " speaking_speed_wpm=" + fmt(f.speaking_speed_wpm) + " scene_count=" + std::to_string(f.scene_count) +
                        " scene_rate_spm=" + fmt(f.scene_rate_spm) + "\n";
            }
            emit(json{{"features", std::move(rows)}}, text);
        } else if (build_cmd->parsed()) {
            const auto r = workflow::build_dataset(layout);
            std::string text = "dataset.csv: " + std::to_string(r.validation.total_rows) + " rows, " +
                               std::to_string(r.validation.complete_rows) + " complete, " +
                               std::to_string(r.validation.issues.size()) + " issues\n";
            for (const auto& i : r.validation.issues)
                text += "  " + i.video_id + " " + i.field + " " + std::string(dataset::to_string(i.kind)) + ": " + i.message + "\n";
            for (const auto& id : r.orphans.features) text += "warning: features for unknown video " + id + "\n";
            for (const auto& id : r.orphans.engagement) text += "warning: engagement for unknown video " + id + "\n";
            emit(workflow::to_json(r), text);
        } else if (eda_cmd->parsed()) {
            const auto report = workflow::run_eda(layout, o.span, o.svg);
            std::string text = "eda.json: " + std::to_string(report.complete_rows) + " complete rows, span " + fmt(report.span) + "\n";
            for (const auto& c : report.correlations)
                text += "  r(" + c.feature_name + ") = " + (c.r ? fmt(*c.r) : std::string("undefined")) + "\n";
            emit(eda::to_json(report), text);
        } else if (train_cmd->parsed()) {
            model::TrainOptions options;
            options.cv_folds = o.cv;
            options.seed = o.seed;
            options.trained_at = o.timestamp.empty() ? workflow::timestamp_from_env() : std::optional(o.timestamp);
            if (!o.timestamp.empty()) ingest::parse_utc(o.timestamp);
            const auto r = workflow::run_train(layout, options);
            const auto& m = r.model;
            std::string text = "model.json: in-sample R^2 " + fmt(m.metrics.r_squared) + ", RMSE " + fmt(m.metrics.rmse) +
                               ", n " + std::to_string(m.metrics.n) + "\n";
            if (r.cross_validation)
                text += "  " + std::to_string(r.cross_validation->folds) + "-fold CV R^2 " +
                        fmt(r.cross_validation->metrics.r_squared) + ", RMSE " + fmt(r.cross_validation->metrics.rmse) + "\n";
            for (std::size_t j = 0; j < m.weights.size(); ++j)
                text += "  " + m.feature_names()[j] + " weight " + fmt(m.weights[j]) + " vif " +
                        (std::isfinite(r.vifs[j]) ? fmt(r.vifs[j]) : std::string("inf")) + "\n";
            emit(model::to_json(r), text);
        } else if (rank_cmd->parsed()) {
            const auto influences = insight::rank_features(workflow::load_model(layout).model);
            json rows = json::array();
            std::string text;
            for (const auto& f : influences) {
                rows.push_back(insight::to_json(f));
                text += std::to_string(f.rank) + " " + f.feature_name + " " + fmt(f.weight) + " " +
                        std::string(insight::to_string(f.direction)) + "\n";
            }
            emit(json{{"influences", std::move(rows)}}, text);
        } else if (whatif_cmd->parsed()) {
            if (o.whatif_features.size() != o.whatif_deltas.size())
                throw Error(ErrorKind::LengthMismatch, "pair every --feature with a --delta", {.field = "delta"});
            const auto trained = workflow::load_model(layout);
            json deltas = json::object();
            for (std::size_t i = 0; i < o.whatif_features.size(); ++i) {
                const auto j = insight::feature_index(trained.model, o.whatif_features[i]);
                const double d = o.whatif_deltas[i] * (o.sigma ? trained.model.standardizer.stds[j] : 1.0);
                deltas[o.whatif_features[i]] = deltas.value(o.whatif_features[i], 0.0) + d;
            }
            const auto s = workflow::run_what_if(layout, json{{"deltas", deltas}});
            std::string text = "delta_engagement: " + fmt(s.delta_engagement) + "\npredicted: " + fmt(s.predicted_baseline) +
                               " -> " + fmt(s.predicted_new) + (s.out_of_bounds ? " (outside 0-100)" : "") + "\n";
            emit(insight::to_json(s), text);
        } else if (report_cmd->parsed()) {
            insight::FeedbackConfig cfg;
            cfg.materiality = o.materiality;
            const auto report = workflow::run_report(layout, cfg);
            std::string text = o.markdown ? insight::to_markdown(report)
                                          : "report.json, report.md: " + std::to_string(report.recommendations.size()) +
                                                " recommendations, " + std::to_string(report.caveats.size()) + " caveats\n";
            emit(insight::to_json(report), text);
        } else if (serve_cmd->parsed()) {
            if (!o.data_dir.empty()) o.serve.data_dir = o.data_dir;
            if (!o.static_dir.empty()) o.serve.static_dir = o.static_dir;
            if (!o.decoder_cmd.empty()) o.serve.decoder_cmd = o.decoder_cmd;
            if (const char* key = std::getenv("EDUVID_API_KEY")) o.serve.api_credential = key;
            service::Service svc(o.serve);
            const int port = svc.bind();
            err << "listening on http://" << o.serve.bind << ":" << port << " (data in " << o.serve.data_dir.string() << ")\n";
            svc.run();
        } else if (wrap_cmd->parsed()) {
            const auto [num, den] = parse_fps(o.fps);
            std::uint64_t frames = 0;
            if (o.input.empty() || o.input == "-") {
                frames = workflow::wrap_raw_frames(std::cin, o.output, o.width, o.height, num, den);
            } else {
                std::ifstream in(o.input, std::ios::binary);
                if (!in) throw Error(ErrorKind::IoError, "cannot open " + o.input);
                frames = workflow::wrap_raw_frames(in, o.output, o.width, o.height, num, den);
            }
            emit(json{{"output", o.output}, {"frame_count", frames}},
                 o.output + ": " + std::to_string(frames) + " frames\n");
        }
    } catch (const Error& e) {
        return fail(e);
    } catch (const fs::filesystem_error& e) {
        return fail(Error(ErrorKind::IoError, e.what()));
    } catch (const json::exception& e) {
        return fail(Error(ErrorKind::SchemaError, e.what()));
    }
    return 0;
}

}  // namespace eduvid::cli
