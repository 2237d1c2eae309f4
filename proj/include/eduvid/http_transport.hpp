#pragma once

#include <chrono>

#include "eduvid/ingest.hpp"

namespace eduvid::ingest {

/// Live network transport. Available only when built with TLS support;
/// otherwise get() throws TransportError.
class HttpTransport final : public Transport {
public:
    explicit HttpTransport(std::chrono::seconds timeout = std::chrono::seconds(15));
    HttpResponse get(const std::string& url) override;

    static bool tls_available() noexcept;

private:
    std::chrono::seconds timeout_;
};

}  // namespace eduvid::ingest
