#include <json.hpp>

#include "eduvid/error.hpp"
#include "eduvid/ingest.hpp"

namespace eduvid::ingest {

namespace {

std::string url_encode(std::string_view s) {
    static constexpr char hex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' ||
            c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xF]);
        }
    }
    return out;
}

// The API reports a rejected key as 400 with reason keyInvalid, and quota or
// permission problems as 403.
bool is_auth_failure(const HttpResponse& response) {
    if (response.status == 401 || response.status == 403) return true;
    if (response.status != 400) return false;
    auto body = nlohmann::json::parse(response.body, nullptr, false);
    if (body.is_discarded()) return false;
    const auto errors = body.value("/error/errors"_json_pointer, nlohmann::json::array());
    for (const auto& e : errors)
        if (e.value("reason", "") == "keyInvalid") return true;
    return false;
}

}  // namespace

std::string videos_endpoint_url(std::string_view video_id, std::string_view api_key) {
    return "https://www.googleapis.com/youtube/v3/videos?part=snippet&id=" + url_encode(video_id) +
           "&key=" + url_encode(api_key);
}

RemoteMetadata parse_videos_response(std::string_view video_id, const HttpResponse& response) {
    const std::string id(video_id);
    if (is_auth_failure(response))
        throw Error(ErrorKind::AuthError, "API credential rejected (HTTP " + std::to_string(response.status) + ")",
                    {.video_id = id});
    if (response.status == 404)
        throw Error(ErrorKind::NotFound, "platform returned 404", {.video_id = id});
    if (response.status != 200)
        throw Error(ErrorKind::TransportError, "unexpected HTTP status " + std::to_string(response.status),
                    {.video_id = id});

    auto body = nlohmann::json::parse(response.body, nullptr, false);
    if (body.is_discarded() || !body.is_object())
        throw Error(ErrorKind::TransportError, "response body is not a JSON object", {.video_id = id});
    const auto items = body.value("items", nlohmann::json::array());
    if (!items.is_array() || items.empty())
        throw Error(ErrorKind::NotFound, "no video with this id", {.video_id = id});

    const auto& item = items.front();
    const auto snippet = item.value("snippet", nlohmann::json::object());
    try {
        RemoteMetadata m;
        m.video_id = item.value("id", id);
        m.url = watch_url(m.video_id);
        m.title = snippet.value("title", "");
        m.published_at = parse_utc(snippet.value("publishedAt", ""));
        m.channel_name = snippet.value("channelTitle", "");
        m.channel_id = snippet.value("channelId", "");
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::TransportError, std::string("malformed snippet: ") + e.what(), {.video_id = id});
    }
}

RemoteMetadata fetch_video_metadata(std::string_view video_id, std::string_view api_credential,
                                    Transport& transport) {
    if (video_id.empty()) throw Error(ErrorKind::ValueError, "video_id is empty", {.field = "video_id"});
    if (api_credential.empty())
        throw Error(ErrorKind::AuthError, "no API credential (set EDUVID_API_KEY)",
                    {.video_id = std::string(video_id)});
    HttpResponse response;
    try {
        response = transport.get(videos_endpoint_url(video_id, api_credential));
    } catch (const Error& e) {
        throw e.with_video_id(std::string(video_id));
    }
    return parse_videos_response(video_id, response);
}

}  // namespace eduvid::ingest
