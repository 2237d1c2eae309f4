#include <doctest.h>

#include <chrono>
#include <thread>

#include "eduvid/csv.hpp"
#include "eduvid/service.hpp"
#include "eduvid/workflow.hpp"
#include "synth.hpp"

#include <httplib.h>

using namespace eduvid;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class Running {
public:
    explicit Running(service::ServiceConfig cfg) : service_(std::move(cfg)) {
        port_ = service_.bind();
        thread_ = std::thread([this] { service_.run(); });
    }
    ~Running() {
        service_.stop();
        thread_.join();
    }

    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(30, 0);
        return c;
    }
    service::Service& service() { return service_; }

private:
    service::Service service_;
    int port_ = 0;
    std::thread thread_;
};

service::ServiceConfig config_for(const fs::path& data) {
    service::ServiceConfig cfg;
    cfg.port = 0;
    cfg.data_dir = data;
    return cfg;
}

json body_of(const httplib::Result& r) {
    REQUIRE(r);
    return json::parse(r->body);
}

json wait_for_job(httplib::Client& c, const std::string& job_id) {
    for (int i = 0; i < 600; ++i) {
        auto job = body_of(c.Get("/jobs/" + job_id));
        if (job["state"] == "done" || job["state"] == "failed") return job;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    FAIL("job did not finish");
    return {};
}

}  // namespace

TEST_CASE("status codes per error kind") {
    CHECK(service::http_status(ErrorKind::UnknownResource) == 404);
    CHECK(service::http_status(ErrorKind::StageOrderViolation) == 409);
    CHECK(service::http_status(ErrorKind::ValueError) == 422);
    CHECK(service::http_status(ErrorKind::SchemaError) == 422);
    CHECK(service::http_status(ErrorKind::IoError) == 500);
    CHECK(service::http_status(ErrorKind::TransportError) == 502);
}

TEST_CASE("config keys") {
    service::ServiceConfig cfg;
    service::apply_config(cfg, {{"port", "9100"}, {"workers", "3"}, {"data_dir", "/tmp/d"}});
    CHECK(cfg.port == 9100);
    CHECK(cfg.workers == 3);
    CHECK(cfg.data_dir == "/tmp/d");
    CHECK_THROWS_AS(service::apply_config(cfg, {{"colour", "red"}}), Error);
    CHECK_THROWS_AS(service::apply_config(cfg, {{"port", "lots"}}), Error);
}

TEST_CASE("projects, ordering errors and the full stage sequence") {
    const auto data = testing::temp_dir("eduvid-svc-data");
    const auto corpus = testing::temp_dir("eduvid-svc-corpus");
    testing::write_corpus(corpus);
    {
        Running server(config_for(data));
        auto c = server.client();

        auto created = c.Post("/projects", R"({"name":"Pilot"})", "application/json");
        REQUIRE(created);
        CHECK(created->status == 201);
        const std::string id = json::parse(created->body)["project_id"];
        CHECK(id == "proj-0001");

        CHECK(body_of(c.Get("/projects")).size() == 1);
        CHECK(c.Get("/projects/nope")->status == 404);
        CHECK(c.Get("/jobs/job-999999")->status == 404);

        const std::string P = "/projects/" + id;
        auto early = c.Get(P + "/eda");
        CHECK(early->status == 409);
        CHECK(json::parse(early->body)["error"]["kind"] == "StageOrderViolation");
        CHECK(c.Post(P + "/model/train", "", "application/json")->status == 409);
        CHECK(c.Post(P + "/whatif", R"({"deltas":{}})", "application/json")->status == 409);
        CHECK(body_of(c.Get(P))["stages"]["eda"] == "locked");

        auto bad = c.Post(P + "/engagement", "video_id,average_percentage_viewed\nA,101\n", "text/csv");
        CHECK(bad->status == 422);
        CHECK(json::parse(bad->body)["error"]["row"] == 1);

        CHECK(c.Post(P + "/metadata", read_file(corpus / "videos.json"), "application/json")->status == 200);

        httplib::MultipartFormDataItems upload{
            {"file", read_file(corpus / "engagement.csv"), "engagement.csv", "text/csv"}};
        CHECK(c.Post(P + "/engagement", upload)->status == 200);

        json videos = json::array();
        for (const auto& v : testing::corpus_plan())
            videos.push_back({{"video_id", v.video_id},
                              {"frames", (corpus / "frames" / (v.video_id + ".evf")).string()},
                              {"transcript", (corpus / "transcripts" / (v.video_id + ".txt")).string()}});
        auto queued = c.Post(P + "/extract", json{{"videos", videos}}.dump(), "application/json");
        REQUIRE(queued);
        CHECK(queued->status == 202);
        const auto job = wait_for_job(c, json::parse(queued->body)["job_id"]);
        CHECK(job["state"] == "done");
        CHECK(job["progress"] == 1.0);

        const auto built = body_of(c.Post(P + "/dataset/build", "", "application/json"));
        CHECK(body_of(c.Get(P + "/dataset"))["complete_rows"] == 12);
        CHECK(built.is_object());

        auto eda = c.Get(P + "/eda?span=0.5&svg=1");
        CHECK(eda->status == 200);
        CHECK(c.Get(P + "/svg/corr.svg")->status == 200);
        CHECK(c.Get(P + "/svg/missing.svg")->status == 404);

        auto model = body_of(c.Post(P + "/model/train?cv=3", "", "application/json"));
        CHECK(model["cross_validation"]["folds"] == 3);
        CHECK(body_of(c.Get(P + "/model")) == model);

        auto insights = body_of(c.Get(P + "/insights"));
        CHECK(insights["influences"][0]["feature_name"] == "duration_min");
        CHECK(c.Get(P + "/report.md")->body.rfind("# Design feedback", 0) == 0);

        auto zero = body_of(c.Post(P + "/whatif", R"({"deltas":{}})", "application/json"));
        CHECK(zero["delta_engagement"] == 0.0);

        const double sd = model["stds"][0];
        auto step = body_of(c.Post(P + "/whatif", json{{"deltas", {{"duration_min", sd}}}}.dump(), "application/json"));
        CHECK(std::fabs(step["delta_engagement"].get<double>() - model["weights"][0].get<double>()) <= 1e-12);

        auto unknown = c.Post(P + "/whatif", R"({"deltas":{"colour":1}})", "application/json");
        CHECK(unknown->status == 422);
        CHECK(json::parse(unknown->body)["error"]["field"] == "deltas.colour");

        CHECK(c.Post(P + "/whatif", "{not json", "application/json")->status == 422);
    }
    {
        // State lives in files: a fresh process sees the same project.
        Running server(config_for(data));
        auto c = server.client();
        auto p = body_of(c.Get("/projects/proj-0001"));
        CHECK(p["name"] == "Pilot");
        CHECK(p["stages"]["model"] == "done");
        auto second = body_of(c.Post("/projects", R"({"name":"Second"})", "application/json"));
        CHECK(second["project_id"] == "proj-0002");
        CHECK(body_of(c.Get("/jobs/job-000001"))["state"] == "done");
    }
    fs::remove_all(data);
    fs::remove_all(corpus);
}

TEST_CASE("multipart extraction uploads and failing jobs") {
    const auto data = testing::temp_dir("eduvid-svc-upload");
    Running server(config_for(data));
    auto c = server.client();
    const std::string id = body_of(c.Post("/projects", R"({"name":"U"})", "application/json"))["project_id"];
    const std::string P = "/projects/" + id;

    testing::Rng rng(3);
    const auto stream = testing::planted_stream(rng, 4, 4, 25, 1, 100, 2);
    httplib::MultipartFormDataItems parts{
        {"frames", stream.bytes, "lecture-1.evf", "application/octet-stream"},
        {"transcript", "one two three", "lecture-1.txt", "text/plain"},
        {"detector", R"({"threshold":0.12,"min_gap_s":0})", "", "application/json"},
    };
    auto queued = c.Post(P + "/extract", parts);
    REQUIRE(queued);
    CHECK(queued->status == 202);
    auto job = wait_for_job(c, json::parse(queued->body)["job_id"]);
    CHECK(job["state"] == "done");
    const auto features = extract::read_features_csv(read_file(data / "projects" / id / "features.csv"));
    REQUIRE(features.size() == 1);
    CHECK(features[0].video_id == "lecture-1");
    CHECK(features[0].word_count == 3);
    CHECK(features[0].scene_count == 2);

    httplib::MultipartFormDataItems broken{
        {"frames", "XXXX", "bad.evf", "application/octet-stream"},
        {"transcript", "words", "bad.txt", "text/plain"},
    };
    auto failing = wait_for_job(c, json::parse(c.Post(P + "/extract", broken)->body)["job_id"]);
    CHECK(failing["state"] == "failed");
    CHECK(failing["error"]["kind"] == "BadMagic");

    httplib::MultipartFormDataItems missing{{"frames", stream.bytes, "x.evf", "application/octet-stream"}};
    CHECK(c.Post(P + "/extract", missing)->status == 422);
    fs::remove_all(data);
}
