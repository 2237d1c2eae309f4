#include <doctest.h>

#include <cmath>
#include <sstream>

#include "eduvid/cli.hpp"
#include "eduvid/csv.hpp"
#include "eduvid/workflow.hpp"
#include "synth.hpp"

using namespace eduvid;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome eduvid_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

struct Project {
    fs::path corpus = testing::temp_dir("eduvid-cli-corpus");
    fs::path dir = testing::temp_dir("eduvid-cli-project");
    std::string p = dir.string();

    Project() { testing::write_corpus(corpus); }
    ~Project() {
        fs::remove_all(corpus);
        fs::remove_all(dir);
    }

    void run_to_dataset() {
        REQUIRE(eduvid_cli({"ingest", "-p", p, "--metadata", (corpus / "videos.json").string(), "--engagement",
                            (corpus / "engagement.csv").string()})
                    .code == 0);
        std::vector<std::string> args{"extract", "-p", p, "-j", "2"};
        for (const auto& v : testing::corpus_plan()) {
            args.insert(args.end(), {"--video-id", v.video_id, "--frames",
                                     (corpus / "frames" / (v.video_id + ".evf")).string(), "--transcript",
                                     (corpus / "transcripts" / (v.video_id + ".txt")).string()});
        }
        REQUIRE(eduvid_cli(args).code == 0);
        REQUIRE(eduvid_cli({"dataset", "build", "-p", p}).code == 0);
    }
};

}  // namespace

TEST_CASE("usage errors exit 1, help exits 0") {
    CHECK(eduvid_cli({"--help"}).code == 0);
    CHECK(eduvid_cli({"--help"}).out.find("dataset") != std::string::npos);
    CHECK(eduvid_cli({"train"}).code == 1);
    CHECK(eduvid_cli({"no-such-command"}).code == 1);
}

TEST_CASE("stage-order violations exit 1 with a JSON error in --json mode") {
    Project pr;
    const auto r = eduvid_cli({"--json", "eda", "-p", pr.p});
    CHECK(r.code == 1);
    CHECK(json::parse(r.out)["error"]["kind"] == "StageOrderViolation");

    const auto plain = eduvid_cli({"train", "-p", pr.p});
    CHECK(plain.code == 1);
    CHECK(plain.err.rfind("error: ", 0) == 0);
}

TEST_CASE("I/O failures exit 2") {
    Project pr;
    const auto r = eduvid_cli({"extract", "-p", pr.p, "--video-id", "a", "--frames", (pr.corpus / "none.evf").string(),
                               "--transcript", (pr.corpus / "none.txt").string()});
    CHECK(r.code == 2);
}

TEST_CASE("single-video extract appends a features row") {
    Project pr;
    const auto v = testing::corpus_plan()[0];
    const auto r = eduvid_cli({"--json", "extract", "-p", pr.p, "--video-id", v.video_id, "--frames",
                               (pr.corpus / "frames" / (v.video_id + ".evf")).string(), "--transcript",
                               (pr.corpus / "transcripts" / (v.video_id + ".txt")).string(), "--min-gap", "0"});
    REQUIRE(r.code == 0);
    const auto rows = extract::read_features_csv(read_file(pr.dir / "features.csv"));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].video_id == v.video_id);
    CHECK(rows[0].word_count == v.words);
    CHECK(rows[0].scene_count == v.cuts);
    CHECK(json::parse(r.out)["features"][0]["word_count"] == v.words);
}

TEST_CASE("train then what-if agrees with the stored model") {
    Project pr;
    pr.run_to_dataset();
    REQUIRE(eduvid_cli({"train", "-p", pr.p, "--timestamp", "2024-06-11T00:00:00Z"}).code == 0);
    const auto trained = workflow::load_model(workflow::Layout{pr.dir});
    CHECK(trained.trained_at == "2024-06-11T00:00:00Z");

    const auto r = eduvid_cli({"--json", "insight", "whatif", "-p", pr.p, "--feature", "duration_min", "--delta", "-1.0"});
    REQUIRE(r.code == 0);
    const auto s = json::parse(r.out);
    const auto& m = trained.model;
    auto x = m.standardizer.means;
    const double base = model::predict(m, x).value;
    x[0] -= 1.0;
    CHECK(std::fabs(s["delta_engagement"].get<double>() - (model::predict(m, x).value - base)) <= 1e-12);
    CHECK(s["delta_engagement"].get<double>() > 0);

    const auto sigma = json::parse(
        eduvid_cli({"--json", "insight", "whatif", "-p", pr.p, "--feature", "duration_min", "--delta", "1", "--sigma"})
            .out);
    CHECK(std::fabs(sigma["delta_engagement"].get<double>() - m.weights[0]) <= 1e-12);

    CHECK(eduvid_cli({"insight", "whatif", "-p", pr.p, "--feature", "colour", "--delta", "1"}).code == 1);

    const auto rank = eduvid_cli({"insight", "rank", "-p", pr.p});
    CHECK(rank.out.rfind("1 duration_min ", 0) == 0);

    const auto report = eduvid_cli({"report", "-p", pr.p, "--markdown"});
    CHECK(report.code == 0);
    CHECK(report.out == read_file(pr.dir / "report.md"));
}

TEST_CASE("config file supplies defaults and rejects unknown keys") {
    Project pr;
    write_file_atomic(pr.dir / "eduvid.conf", "# test\nmin_gap = 0\nthreshold=0.2\n");
    const auto v = testing::corpus_plan()[1];
    const auto r = eduvid_cli({"--config", (pr.dir / "eduvid.conf").string(), "extract", "-p", pr.p, "--video-id",
                               v.video_id, "--frames", (pr.corpus / "frames" / (v.video_id + ".evf")).string(),
                               "--transcript", (pr.corpus / "transcripts" / (v.video_id + ".txt")).string()});
    CHECK(r.code == 0);
    CHECK(extract::read_features_csv(read_file(pr.dir / "features.csv"))[0].scene_count == v.cuts);

    write_file_atomic(pr.dir / "bad.conf", "colour=red\n");
    CHECK(eduvid_cli({"--config", (pr.dir / "bad.conf").string(), "dataset", "build", "-p", pr.p}).code == 1);
}

TEST_CASE("evf-wrap") {
    Project pr;
    write_file_atomic(pr.dir / "raw.bin", std::string(2 * 2 * 5, '\x40'));
    const auto r = eduvid_cli({"evf-wrap", "--width", "2", "--height", "2", "--fps", "30000/1001", "-i",
                               (pr.dir / "raw.bin").string(), "-o", (pr.dir / "out.evf").string()});
    CHECK(r.code == 0);
    CHECK(extract::probe_file(pr.dir / "out.evf") == extract::FrameStreamHeader{2, 2, 30000, 1001, 5});
    CHECK(eduvid_cli({"evf-wrap", "--width", "2", "--height", "2", "--fps", "0/1", "-i", (pr.dir / "raw.bin").string(),
                      "-o", (pr.dir / "x.evf").string()})
              .code == 1);
}
