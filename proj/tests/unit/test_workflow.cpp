#include <doctest.h>

#include <atomic>
#include <cmath>
#include <sstream>

#include "eduvid/csv.hpp"
#include "eduvid/workflow.hpp"
#include "synth.hpp"

using namespace eduvid;
using namespace eduvid::workflow;

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

struct Fixture {
    fs::path corpus = testing::temp_dir("eduvid-wf-corpus");
    fs::path project = testing::temp_dir("eduvid-wf-project");
    Layout layout{project};

    Fixture() { testing::write_corpus(corpus); }
    ~Fixture() {
        fs::remove_all(corpus);
        fs::remove_all(project);
    }

    std::vector<ExtractItem> items() const {
        std::vector<ExtractItem> out;
        for (const auto& v : testing::corpus_plan())
            out.push_back({v.video_id, corpus / "frames" / (v.video_id + ".evf"),
                           corpus / "transcripts" / (v.video_id + ".txt"), std::nullopt});
        return out;
    }

    void ingest_all() {
        ingest_metadata(layout, parse_metadata_request(read_json_file(corpus / "videos.json")), nullptr, "");
        ingest_engagement(layout, read_file(corpus / "engagement.csv"));
        store_features(layout, extract_videos(layout, items(), {}));
    }
};

}  // namespace

TEST_CASE("stage status follows the files on disk") {
    Fixture fx;
    auto s = stage_status(fx.layout);
    CHECK(s["metadata"] == "ready");
    CHECK(s["dataset"] == "locked");
    CHECK(s["eda"] == "locked");
    CHECK(s["report"] == "locked");

    fx.ingest_all();
    s = stage_status(fx.layout);
    CHECK(s["metadata"] == "done");
    CHECK(s["extract"] == "done");
    CHECK(s["dataset"] == "ready");

    build_dataset(fx.layout);
    s = stage_status(fx.layout);
    CHECK(s["dataset"] == "done");
    CHECK(s["eda"] == "ready");
    CHECK(s["model"] == "ready");
    CHECK(s["report"] == "locked");
}

TEST_CASE("stages refuse to run out of order") {
    Fixture fx;
    CHECK(kind_of([&] { build_dataset(fx.layout); }) == ErrorKind::StageOrderViolation);
    CHECK(kind_of([&] { run_eda(fx.layout, 0.5, false); }) == ErrorKind::StageOrderViolation);
    CHECK(kind_of([&] { run_train(fx.layout, {}); }) == ErrorKind::StageOrderViolation);
    CHECK(kind_of([&] { run_report(fx.layout, {}); }) == ErrorKind::StageOrderViolation);
    CHECK(kind_of([&] { run_what_if(fx.layout, {{"deltas", nlohmann::json::array()}}); }) ==
          ErrorKind::StageOrderViolation);
}

TEST_CASE("full pipeline over the corpus") {
    Fixture fx;
    fx.ingest_all();
    const auto built = build_dataset(fx.layout);
    CHECK(built.dataset.rows.size() == 12);
    CHECK(built.dataset.complete_count() == 12);
    CHECK(built.validation.issues.empty());
    CHECK(built.collisions.empty());
    CHECK(read_file(fx.layout.dataset()) == dataset::write_dataset(built.dataset));

    const auto eda = run_eda(fx.layout, 0.5, true);
    CHECK(eda.histograms.size() == 6);
    CHECK(fs::exists(fx.layout.svg_dir() / "corr.svg"));
    CHECK(fs::exists(fx.layout.svg_dir() / "loess_duration_min.svg"));

    const auto trained = run_train(fx.layout, {});
    CHECK(trained.model.weights[0] < 0);
    CHECK(load_model(fx.layout) == trained);

    const auto report = run_report(fx.layout, {});
    CHECK(report.influences[0].feature_name == "duration_min");
    CHECK(fs::exists(fx.layout.report_md()));
    CHECK(read_json_file(fx.layout.report_json()) == insight::to_json(report));

    const auto zero = run_what_if(fx.layout, {{"deltas", nlohmann::json::object()}});
    CHECK(zero.delta_engagement == 0.0);
    CHECK(zero.baseline == trained.model.standardizer.means);

    const double sd = trained.model.standardizer.stds[0];
    const auto one = run_what_if(fx.layout, {{"deltas", {{"duration_min", sd}}}});
    CHECK(std::fabs(one.delta_engagement - trained.model.weights[0]) <= 1e-12);

    try {
        run_what_if(fx.layout, {{"deltas", {{"colour", 1.0}}}});
        FAIL("expected ValueError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ValueError);
        CHECK(e.context().field == "deltas.colour");
    }
}

TEST_CASE("extraction results do not depend on the worker count") {
    Fixture fx;
    const auto serial = extract_videos(fx.layout, fx.items(), {});
    ExtractOptions parallel;
    parallel.jobs = 4;
    std::atomic<std::size_t> last{0}, calls{0};
    bool monotone = true;
    const auto threaded = extract_videos(fx.layout, fx.items(), parallel, [&](std::size_t done, std::size_t total) {
        CHECK(total == 12);
        if (done < last) monotone = false;
        last = done;
        ++calls;
    });
    CHECK(serial == threaded);
    CHECK(monotone);
    CHECK(calls == 12);
    CHECK(last == 12);
}

TEST_CASE("the first failing item's error is reported") {
    Fixture fx;
    auto items = fx.items();
    items[3].transcript = fx.corpus / "missing.txt";
    items[7].frames = fx.corpus / "videos.json";
    ExtractOptions opts;
    opts.jobs = 4;
    try {
        extract_videos(fx.layout, items, opts);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.context().video_id == items[3].video_id);
        CHECK(e.kind() == ErrorKind::IoError);
    }
}

TEST_CASE("re-ingesting metadata upserts by video id") {
    Fixture fx;
    auto request = read_json_file(fx.corpus / "videos.json");
    ingest_metadata(fx.layout, parse_metadata_request(request), nullptr, "");
    request["videos"] = nlohmann::json::array({request["videos"][0]});
    request["videos"][0]["title"] = "Renamed";
    const auto result = ingest_metadata(fx.layout, parse_metadata_request(request), nullptr, "");
    REQUIRE(result.videos.size() == 12);
    CHECK(result.videos[0].remote.title == "Renamed");

    request["videos"].push_back(request["videos"][0]);
    CHECK(kind_of([&] { ingest_metadata(fx.layout, parse_metadata_request(request), nullptr, ""); }) ==
          ErrorKind::DuplicateKey);
}

TEST_CASE("metadata request errors carry a field path") {
    nlohmann::json request{{"manual", {{"institution_name", "U"}}},
                           {"videos", {{{"video_id", "a"}, {"manual", {{"year", "20x"}}}}}}};
    try {
        parse_metadata_request(request);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.context().field.rfind("videos[0].manual.", 0) == 0);
    }
    CHECK(kind_of([] { parse_metadata_request(nlohmann::json::array()); }) == ErrorKind::SchemaError);
}

TEST_CASE("fetching remote metadata needs a transport") {
    Fixture fx;
    auto request = parse_metadata_request(read_json_file(fx.corpus / "videos.json"));
    request.fetch_remote = true;
    CHECK_THROWS_AS(ingest_metadata(fx.layout, request, nullptr, "key"), Error);
    CHECK_FALSE(fs::exists(fx.layout.metadata()));
}

TEST_CASE("raw frame wrapping") {
    const auto dir = testing::temp_dir("eduvid-wrap");
    std::string raw(3 * 6, '\0');
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<char>(i * 10);
    std::istringstream in(raw);
    CHECK(wrap_raw_frames(in, dir / "out.evf", 3, 2, 30000, 1001) == 3);
    const auto header = extract::probe_file(dir / "out.evf");
    CHECK(header == extract::FrameStreamHeader{3, 2, 30000, 1001, 3});
    CHECK(read_file(dir / "out.evf").substr(extract::kEvfHeaderSize) == raw);

    std::istringstream partial(raw.substr(0, 10));
    CHECK(kind_of([&] { wrap_raw_frames(partial, dir / "bad.evf", 3, 2, 1, 1); }) == ErrorKind::TruncatedStream);
    fs::remove_all(dir);
}

TEST_CASE("config files") {
    const auto c = parse_config("# comment\nport = 9000\n\ndata_dir=/tmp/x y\n");
    CHECK(c.at("port") == "9000");
    CHECK(c.at("data_dir") == "/tmp/x y");
    try {
        parse_config("port=1\nnonsense\n");
        FAIL("expected ValueError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ValueError);
        CHECK(e.context().row == 2u);
    }
}

TEST_CASE("error JSON shape") {
    const Error e(ErrorKind::ValueError, "bad", {.video_id = "v", .field = "year", .row = 3});
    const auto j = error_json(e);
    CHECK(j["error"]["kind"] == "ValueError");
    CHECK(j["error"]["message"] == "bad");
    CHECK(j["error"]["field"] == "year");
    CHECK(j["error"]["video_id"] == "v");
    CHECK(j["error"]["row"] == 3);
    CHECK_FALSE(error_json(Error(ErrorKind::IoError, "x")).at("error").contains("field"));
}

TEST_CASE("the bundled corpus matches its generator") {
    const fs::path bundled = fs::path(EDUVID_TEST_ROOT) / "data" / "corpus";
    const auto fresh = testing::temp_dir("eduvid-corpus-check");
    testing::write_corpus(fresh);
    std::size_t files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(fresh)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), fresh);
        INFO(rel.string());
        REQUIRE(fs::exists(bundled / rel));
        CHECK(read_file(bundled / rel) == read_file(entry.path()));
        ++files;
    }
    CHECK(files == 2 + 2 * 12);
    fs::remove_all(fresh);
}
