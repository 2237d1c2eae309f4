#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "eduvid/error.hpp"
#include "eduvid/ingest.hpp"

namespace eduvid::service {

struct ServiceConfig {
    std::string bind = "127.0.0.1";
    int port = 8787;  // 0 picks a free port
    std::filesystem::path data_dir = "eduvid-data";
    std::optional<std::string> decoder_cmd;
    unsigned workers = 2;  // concurrent videos across all extraction jobs
    std::string api_credential;
    std::optional<std::filesystem::path> static_dir;
    std::shared_ptr<ingest::Transport> transport;  // defaults to the live HTTPS transport
};

/// Applies keys port, bind, data_dir, decoder_cmd, workers, static_dir.
/// Throws ValueError on an unknown key or a bad value.
void apply_config(ServiceConfig& config, const std::map<std::string, std::string>& values);

/// HTTP status for an error kind: 404 unknown resource, 409 stage order,
/// 500 local I/O, 502 upstream/decoder failures, 422 everything else.
int http_status(ErrorKind kind) noexcept;

/// File-backed JSON API over data_dir/projects/<id>/ plus a background queue
/// for extraction jobs (records in data_dir/jobs/).
class Service {
public:
    explicit Service(ServiceConfig config);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds the listening socket and returns the port. Throws IoError.
    int bind();
    /// Serves until stop(); call after bind().
    void run();
    void stop();
    /// Blocks until the job queue is empty (used by tests and scripted runs).
    void wait_for_jobs();

    const ServiceConfig& config() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace eduvid::service
