#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <regex>
#include <thread>

#include "eduvid/csv.hpp"
#include "eduvid/http_transport.hpp"
#include "eduvid/service.hpp"
#include "eduvid/workflow.hpp"

// Last: <resolv.h> defines _res, which collides with Eigen parameter names.
#include <httplib.h>

namespace eduvid::service {

namespace fs = std::filesystem;
using nlohmann::json;

int http_status(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::UnknownResource: return 404;
        case ErrorKind::StageOrderViolation: return 409;
        case ErrorKind::IoError: return 500;
        case ErrorKind::TransportError:
        case ErrorKind::DecoderError:
        case ErrorKind::AuthError: return 502;
        default: return 422;
    }
}

void apply_config(ServiceConfig& config, const std::map<std::string, std::string>& values) {
    auto number = [](const std::string& key, const std::string& text, std::uint64_t max) {
        const auto v = parse_unsigned(text);
        if (!v || *v > max) throw Error(ErrorKind::ValueError, "invalid value '" + text + "'", {.field = key});
        return *v;
    };
    for (const auto& [key, value] : values) {
        if (key == "port")
            config.port = static_cast<int>(number(key, value, 65535));
        else if (key == "bind")
            config.bind = value;
        else if (key == "data_dir")
            config.data_dir = value;
        else if (key == "decoder_cmd")
            config.decoder_cmd = value;
        else if (key == "workers")
            config.workers = static_cast<unsigned>(std::max<std::uint64_t>(1, number(key, value, 64)));
        else if (key == "static_dir")
            config.static_dir = value;
        else
            throw Error(ErrorKind::ValueError, "unknown config key", {.field = key});
    }
}

namespace {

std::string now_utc() {
    return ingest::format_utc(std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
}

std::string sequence_id(std::string_view prefix, std::size_t n, int width) {
    std::string digits = std::to_string(n);
    if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
    return std::string(prefix) + digits;
}

// Next free id: one past the largest numeric suffix already on disk.
std::size_t next_sequence(const fs::path& dir, std::string_view prefix, std::string_view suffix) {
    std::size_t best = 0;
    if (!fs::exists(dir)) return 1;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::string name = entry.path().filename().string();
        if (!suffix.empty()) {
            if (!name.ends_with(suffix)) continue;
            name.resize(name.size() - suffix.size());
        }
        if (!name.starts_with(prefix)) continue;
        if (const auto v = parse_unsigned(std::string_view(name).substr(prefix.size()))) best = std::max<std::size_t>(best, *v);
    }
    return best + 1;
}

bool safe_id(std::string_view id) {
    if (id.empty() || id.size() > 128) return false;
    for (char c : id)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) return false;
    return id.front() != '.';
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::SchemaError, std::string("request body is not valid JSON: ") + e.what());
    }
}

double query_number(const httplib::Request& req, const char* key, double fallback) {
    if (!req.has_param(key)) return fallback;
    const auto text = req.get_param_value(key);
    const auto v = parse_number(text);
    if (!v || !std::isfinite(*v)) throw Error(ErrorKind::ValueError, "invalid number '" + text + "'", {.field = key});
    return *v;
}

std::uint64_t query_unsigned(const httplib::Request& req, const char* key, std::uint64_t fallback) {
    if (!req.has_param(key)) return fallback;
    const auto text = req.get_param_value(key);
    const auto v = parse_unsigned(text);
    if (!v) throw Error(ErrorKind::ValueError, "invalid integer '" + text + "'", {.field = key});
    return *v;
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(workflow::dump_json(body), "application/json");
}

struct JobRequest {
    std::string job_id;
    std::string project_id;
    std::vector<workflow::ExtractItem> items;
    extract::SceneDetectorConfig detector;
};

}  // namespace

struct Service::Impl {
    ServiceConfig config;
    httplib::Server server;

    std::mutex projects_mutex;  // guards project creation and the lock table
    std::map<std::string, std::shared_ptr<std::mutex>> project_locks;

    std::mutex jobs_mutex;
    std::condition_variable jobs_cv;
    std::deque<JobRequest> queue;
    std::map<std::string, json> jobs;  // job_id -> record
    bool busy = false;
    bool stopping = false;
    std::thread dispatcher;

    explicit Impl(ServiceConfig c) : config(std::move(c)) {
        fs::create_directories(projects_dir());
        fs::create_directories(jobs_dir());
        recover_jobs();
        routes();
        dispatcher = std::thread([this] { dispatch(); });
    }

    fs::path projects_dir() const { return config.data_dir / "projects"; }
    fs::path jobs_dir() const { return config.data_dir / "jobs"; }

    // ---- projects --------------------------------------------------------

    fs::path project_root(const std::string& id) {
        if (!safe_id(id) || !fs::exists(projects_dir() / id / "project.json"))
            throw Error(ErrorKind::UnknownResource, "no project '" + id + "'", {.field = "project_id"});
        return projects_dir() / id;
    }

    std::shared_ptr<std::mutex> project_lock(const std::string& id) {
        std::lock_guard lock(projects_mutex);
        auto& m = project_locks[id];
        if (!m) m = std::make_shared<std::mutex>();
        return m;
    }

    json project_json(const std::string& id) {
        const auto root = project_root(id);
        json p = workflow::read_json_file(root / "project.json");
        p["stages"] = workflow::stage_status(workflow::Layout{root});
        return p;
    }

    json create_project(const json& body) {
        std::string name;
        if (const auto it = body.find("name"); it != body.end()) {
            if (!it->is_string()) throw Error(ErrorKind::SchemaError, "expected a string", {.field = "name"});
            name = it->get<std::string>();
        }
        std::lock_guard lock(projects_mutex);
        const auto id = sequence_id("proj-", next_sequence(projects_dir(), "proj-", ""), 4);
        const auto root = projects_dir() / id;
        fs::create_directories(root);
        json p{{"project_id", id}, {"name", name}, {"created_at", now_utc()}};
        write_file_atomic(root / "project.json", workflow::dump_json(p));
        p["stages"] = workflow::stage_status(workflow::Layout{root});
        return p;
    }

    json list_projects() {
        json out = json::array();
        std::vector<std::string> ids;
        for (const auto& entry : fs::directory_iterator(projects_dir()))
            if (fs::exists(entry.path() / "project.json")) ids.push_back(entry.path().filename().string());
        std::sort(ids.begin(), ids.end());
        for (const auto& id : ids) out.push_back(workflow::read_json_file(projects_dir() / id / "project.json"));
        return json{{"projects", std::move(out)}};
    }

    // ---- jobs ------------------------------------------------------------

    void persist_job(const json& record) {
        write_file_atomic(jobs_dir() / (record.at("job_id").get<std::string>() + ".json"), workflow::dump_json(record));
    }

    void recover_jobs() {
        for (const auto& entry : fs::directory_iterator(jobs_dir())) {
            if (entry.path().extension() != ".json") continue;
            json record;
            try {
                record = workflow::read_json_file(entry.path());
            } catch (const Error&) {
                continue;  // half-written temp files never carry the .json name
            }
            const auto state = record.value("state", "");
            if (state == "queued" || state == "running") {
                record["state"] = "failed";
                record["error"] = workflow::error_json(Error(ErrorKind::IoError, "service restarted before the job finished"))["error"];
                persist_job(record);
            }
            jobs[record.at("job_id").get<std::string>()] = record;
        }
    }

    json job_json(const std::string& id) {
        std::lock_guard lock(jobs_mutex);
        const auto it = jobs.find(id);
        if (it == jobs.end()) throw Error(ErrorKind::UnknownResource, "no job '" + id + "'", {.field = "job_id"});
        return it->second;
    }

    void update_job(const std::string& id, const std::function<void(json&)>& change) {
        std::lock_guard lock(jobs_mutex);
        auto& record = jobs.at(id);
        change(record);
        persist_job(record);
    }

    json enqueue(const std::string& project_id, std::vector<workflow::ExtractItem> items,
                 const extract::SceneDetectorConfig& detector) {
        std::lock_guard lock(jobs_mutex);
        const auto id = sequence_id("job-", next_sequence(jobs_dir(), "job-", ".json"), 6);
        json record{{"job_id", id},   {"project_id", project_id}, {"kind", "extract"},
                    {"state", "queued"}, {"progress", 0.0},       {"error", nullptr},
                    {"result", nullptr}};
        persist_job(record);
        jobs[id] = record;
        queue.push_back(JobRequest{id, project_id, std::move(items), detector});
        jobs_cv.notify_all();
        return record;
    }

    void dispatch() {
        while (true) {
            JobRequest job;
            {
                std::unique_lock lock(jobs_mutex);
                jobs_cv.wait(lock, [&] { return stopping || !queue.empty(); });
                if (stopping) return;
                job = std::move(queue.front());
                queue.pop_front();
                busy = true;
            }
            run_job(job);
            {
                std::lock_guard lock(jobs_mutex);
                busy = false;
            }
            jobs_cv.notify_all();
        }
    }

    void run_job(const JobRequest& job) {
        update_job(job.job_id, [](json& r) { r["state"] = "running"; });
        try {
            const workflow::Layout layout{project_root(job.project_id)};
            workflow::ExtractOptions options{job.detector, config.workers, config.decoder_cmd};
            const auto features = workflow::extract_videos(layout, job.items, options, [&](std::size_t done, std::size_t total) {
                update_job(job.job_id, [&](json& r) {
                    const double p = static_cast<double>(done) / static_cast<double>(total);
                    r["progress"] = std::max(p, r.value("progress", 0.0));
                });
            });
            {
                auto lock = project_lock(job.project_id);
                std::lock_guard guard(*lock);
                workflow::store_features(layout, features);
            }
            json rows = json::array();
            for (const auto& f : features) rows.push_back(workflow::to_json(f));
            update_job(job.job_id, [&](json& r) {
                r["state"] = "done";
                r["progress"] = 1.0;
                r["result"] = json{{"features", std::move(rows)}};
            });
        } catch (const Error& e) {
            update_job(job.job_id, [&](json& r) {
                r["state"] = "failed";
                r["error"] = workflow::error_json(e)["error"];
            });
        } catch (const std::exception& e) {
            update_job(job.job_id, [&](json& r) {
                r["state"] = "failed";
                r["error"] = workflow::error_json(Error(ErrorKind::IoError, e.what()))["error"];
            });
        }
    }

    // ---- extraction requests ---------------------------------------------

    std::vector<workflow::ExtractItem> items_from_json(const json& body) {
        const auto videos = body.find("videos");
        if (videos == body.end() || !videos->is_array() || videos->empty())
            throw Error(ErrorKind::SchemaError, "expected a non-empty array", {.field = "videos"});
        std::vector<workflow::ExtractItem> items;
        for (std::size_t i = 0; i < videos->size(); ++i) {
            const auto& v = (*videos)[i];
            const std::string path = "videos[" + std::to_string(i) + "]";
            auto text = [&](const char* key, bool required) -> std::optional<std::string> {
                const auto it = v.find(key);
                if (it == v.end() || it->is_null()) {
                    if (required) throw Error(ErrorKind::SchemaError, "missing field", {.field = path + "." + key});
                    return std::nullopt;
                }
                if (!it->is_string()) throw Error(ErrorKind::SchemaError, "expected a string", {.field = path + "." + key});
                return it->get<std::string>();
            };
            if (!v.is_object()) throw Error(ErrorKind::SchemaError, "expected an object", {.field = path});
            workflow::ExtractItem item;
            item.video_id = *text("video_id", true);
            item.transcript = *text("transcript", true);
            if (auto video = text("video", false)) item.video = *video;
            if (auto frames = text("frames", !item.video)) item.frames = *frames;
            items.push_back(std::move(item));
        }
        return items;
    }

    std::vector<workflow::ExtractItem> items_from_upload(const httplib::Request& req, const workflow::Layout& layout) {
        fs::create_directories(layout.uploads());
        std::map<std::string, workflow::ExtractItem> by_id;
        auto save = [&](const char* part, const char* extension) {
            for (const auto& file : req.get_file_values(part)) {
                const auto id = fs::path(file.filename).stem().string();
                if (!safe_id(id))
                    throw Error(ErrorKind::ValueError, "file name '" + file.filename + "' does not yield a video id",
                                {.field = part});
                const auto target = layout.uploads() / (id + extension);
                write_file_atomic(target, file.content);
                auto& item = by_id[id];
                item.video_id = id;
                if (std::string_view(part) == "frames") item.frames = target;
                else if (std::string_view(part) == "transcript") item.transcript = target;
                else item.video = target;
            }
        };
        save("frames", ".evf");
        save("transcript", ".txt");
        save("video", ".media");
        if (by_id.empty()) throw Error(ErrorKind::SchemaError, "no files uploaded", {.field = "frames"});
        std::vector<workflow::ExtractItem> items;
        for (auto& [id, item] : by_id) {
            if (item.transcript.empty())
                throw Error(ErrorKind::SchemaError, "missing transcript upload", {.video_id = id, .field = "transcript"});
            if (item.frames.empty() && !item.video)
                throw Error(ErrorKind::SchemaError, "missing frames upload", {.video_id = id, .field = "frames"});
            items.push_back(std::move(item));
        }
        return items;
    }

    // ---- routing ---------------------------------------------------------

    using Action = std::function<void(const httplib::Request&, httplib::Response&)>;

    static httplib::Server::Handler guarded(Action action) {
        return [action = std::move(action)](const httplib::Request& req, httplib::Response& res) {
            try {
                action(req, res);
            } catch (const Error& e) {
                send_json(res, workflow::error_json(e), http_status(e.kind()));
            } catch (const std::exception& e) {
                send_json(res, workflow::error_json(Error(ErrorKind::IoError, e.what())), 500);
            }
        };
    }

    // Runs `body` against the project's layout with the project lock held.
    template <class F>
    auto with_project(const httplib::Request& req, F&& body) {
        const std::string id = req.matches[1];
        const workflow::Layout layout{project_root(id)};
        auto lock = project_lock(id);
        std::lock_guard guard(*lock);
        return body(layout);
    }

    void routes() {
        auto& s = server;
        const std::string P = R"(/projects/([^/]+))";

        s.Post("/projects", guarded([this](const auto& req, auto& res) { send_json(res, create_project(parse_body(req)), 201); }));
        s.Get("/projects", guarded([this](const auto&, auto& res) { send_json(res, list_projects()); }));
        s.Get(P, guarded([this](const auto& req, auto& res) { send_json(res, project_json(req.matches[1])); }));

        s.Post(P + "/metadata", guarded([this](const auto& req, auto& res) {
            const auto request = workflow::parse_metadata_request(parse_body(req));
            send_json(res, with_project(req, [&](const workflow::Layout& layout) {
                std::shared_ptr<ingest::Transport> transport = config.transport;
                if (!transport && request.fetch_remote) transport = std::make_shared<ingest::HttpTransport>();
                const auto result = workflow::ingest_metadata(layout, request, transport.get(), config.api_credential);
                json videos = json::array(), collisions = json::array();
                for (const auto& v : result.videos)
                    videos.push_back({{"video_id", v.remote.video_id}, {"dataset_tag", v.dataset_tag.value()}});
                for (const auto& c : result.collisions)
                    collisions.push_back({{"dataset_tag", c.dataset_tag}, {"first_video_id", c.first_video_id},
                                          {"second_video_id", c.second_video_id}, {"field", c.field}});
                return json{{"videos", std::move(videos)}, {"tag_collisions", std::move(collisions)}};
            }));
        }));

        s.Post(P + "/engagement", guarded([this](const auto& req, auto& res) {
            std::string csv = req.body;
            if (req.is_multipart_form_data()) {
                if (!req.has_file("file")) throw Error(ErrorKind::SchemaError, "missing upload part", {.field = "file"});
                csv = req.get_file_value("file").content;
            }
            send_json(res, with_project(req, [&](const workflow::Layout& layout) {
                const auto records = workflow::ingest_engagement(layout, csv);
                return json{{"records", records.size()}};
            }));
        }));

        s.Post(P + "/extract", guarded([this](const auto& req, auto& res) {
            const std::string id = req.matches[1];
            const workflow::Layout layout{project_root(id)};
            std::vector<workflow::ExtractItem> items;
            extract::SceneDetectorConfig detector;
            if (req.is_multipart_form_data()) {
                if (req.has_file("detector")) {
                    try {
                        detector = workflow::detector_from_json(json::parse(req.get_file_value("detector").content));
                    } catch (const json::parse_error& e) {
                        throw Error(ErrorKind::SchemaError, e.what(), {.field = "detector"});
                    }
                }
                auto lock = project_lock(id);
                std::lock_guard guard(*lock);
                items = items_from_upload(req, layout);
            } else {
                const auto body = parse_body(req);
                detector = workflow::detector_from_json(body.value("detector", json()));
                items = items_from_json(body);
            }
            send_json(res, enqueue(id, std::move(items), detector), 202);
        }));

        s.Get(R"(/jobs/([^/]+))", guarded([this](const auto& req, auto& res) { send_json(res, job_json(req.matches[1])); }));

        s.Post(P + "/dataset/build", guarded([this](const auto& req, auto& res) {
            send_json(res, with_project(req, [](const workflow::Layout& layout) {
                return workflow::to_json(workflow::build_dataset(layout));
            }));
        }));

        s.Get(P + "/dataset", guarded([this](const auto& req, auto& res) {
            send_json(res, with_project(req, [](const workflow::Layout& layout) {
                const auto ds = workflow::load_dataset(layout);
                json rows = json::array();
                for (const auto& r : ds.rows) {
                    json row{{"video_id", r.video_id},
                             {"dataset_tag", r.dataset_tag},
                             {"manual", workflow::to_json(r.manual)},
                             {"video_url", r.video_url},
                             {"features", r.features ? workflow::to_json(*r.features) : json(nullptr)},
                             {"average_percentage_viewed",
                              r.average_percentage_viewed ? json(*r.average_percentage_viewed) : json(nullptr)},
                             {"complete", r.complete}};
                    rows.push_back(std::move(row));
                }
                json issues = json::array();
                for (const auto& i : dataset::validate_dataset(ds).issues)
                    issues.push_back({{"video_id", i.video_id}, {"field", i.field},
                                      {"kind", dataset::to_string(i.kind)}, {"message", i.message}});
                return json{{"rows", std::move(rows)}, {"complete_rows", ds.complete_count()}, {"issues", std::move(issues)}};
            }));
        }));

        s.Get(P + "/eda", guarded([this](const auto& req, auto& res) {
            const double span = query_number(req, "span", 0.5);
            const bool svg = query_unsigned(req, "svg", 0) != 0;
            send_json(res, with_project(req, [&](const workflow::Layout& layout) {
                return eda::to_json(workflow::run_eda(layout, span, svg));
            }));
        }));

        s.Post(P + "/model/train", guarded([this](const auto& req, auto& res) {
            model::TrainOptions options;
            options.cv_folds = static_cast<unsigned>(query_unsigned(req, "cv", 0));
            options.seed = query_unsigned(req, "seed", 42);
            options.trained_at = workflow::timestamp_from_env();
            send_json(res, with_project(req, [&](const workflow::Layout& layout) {
                return model::to_json(workflow::run_train(layout, options));
            }));
        }));

        s.Get(P + "/model", guarded([this](const auto& req, auto& res) {
            send_json(res, with_project(req, [](const workflow::Layout& layout) {
                return model::to_json(workflow::load_model(layout));
            }));
        }));

        s.Get(P + "/insights", guarded([this](const auto& req, auto& res) {
            insight::FeedbackConfig cfg;
            cfg.materiality = query_number(req, "materiality", cfg.materiality);
            send_json(res, with_project(req, [&](const workflow::Layout& layout) {
                return insight::to_json(workflow::run_report(layout, cfg));
            }));
        }));

        s.Get(P + "/report.md", guarded([this](const auto& req, auto& res) {
            with_project(req, [&](const workflow::Layout& layout) {
                if (!fs::exists(layout.report_md())) workflow::run_report(layout, {});
                res.set_content(read_file(layout.report_md()), "text/markdown; charset=utf-8");
                return 0;
            });
        }));

        s.Post(P + "/whatif", guarded([this](const auto& req, auto& res) {
            const auto body = parse_body(req);
            send_json(res, with_project(req, [&](const workflow::Layout& layout) {
                return insight::to_json(workflow::run_what_if(layout, body));
            }));
        }));

        s.Get(P + R"(/svg/([^/]+\.svg))", guarded([this](const auto& req, auto& res) {
            const std::string name = req.matches[2];
            with_project(req, [&](const workflow::Layout& layout) {
                const auto path = layout.svg_dir() / name;
                if (!safe_id(name) || !fs::exists(path))
                    throw Error(ErrorKind::UnknownResource, "no chart '" + name + "'", {.field = "name"});
                res.set_content(read_file(path), "image/svg+xml");
                return 0;
            });
        }));

        if (config.static_dir) s.set_mount_point("/", config.static_dir->string());
    }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() {
    stop();
    if (impl_->dispatcher.joinable()) impl_->dispatcher.join();
}

int Service::bind() {
    auto& c = impl_->config;
    if (c.port == 0) {
        const int port = impl_->server.bind_to_any_port(c.bind);
        if (port < 0) throw Error(ErrorKind::IoError, "cannot bind " + c.bind);
        c.port = port;
    } else if (!impl_->server.bind_to_port(c.bind, c.port)) {
        throw Error(ErrorKind::IoError, "cannot bind " + c.bind + ":" + std::to_string(c.port));
    }
    return c.port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
    impl_->server.stop();
    {
        std::lock_guard lock(impl_->jobs_mutex);
        impl_->stopping = true;
    }
    impl_->jobs_cv.notify_all();
}

void Service::wait_for_jobs() {
    std::unique_lock lock(impl_->jobs_mutex);
    impl_->jobs_cv.wait(lock, [&] { return impl_->stopping || (impl_->queue.empty() && !impl_->busy); });
}

const ServiceConfig& Service::config() const noexcept { return impl_->config; }

}  // namespace eduvid::service
