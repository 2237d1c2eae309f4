#include "eduvid/http_transport.hpp"

#include <httplib.h>

#include "eduvid/error.hpp"

namespace eduvid::ingest {

HttpTransport::HttpTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

bool HttpTransport::tls_available() noexcept {
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
    return true;
#else
    return false;
#endif
}

HttpResponse HttpTransport::get(const std::string& url) {
    // scheme://host[:port]/path?query
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorKind::TransportError, "malformed url " + url);
    auto path_start = url.find('/', scheme_end + 3);
    std::string origin = url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    if (url.starts_with("https://") && !tls_available())
        throw Error(ErrorKind::TransportError, "built without TLS support; cannot reach " + origin);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_follow_location(true);
    auto res = client.Get(path);
    if (!res) throw Error(ErrorKind::TransportError, "request to " + origin + " failed: " + httplib::to_string(res.error()));
    return HttpResponse{res->status, res->body};
}

}  // namespace eduvid::ingest
