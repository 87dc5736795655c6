#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "lyricpref/errors.hpp"
#include "lyricpref/transport.hpp"

#include <chrono>
#include <thread>

namespace lyricpref {

namespace {

struct SplitUrl {
    std::string origin; // scheme://host[:port]
    std::string base_path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("provider endpoint needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    auto path = url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {url.substr(0, path_start), path};
}

class SlotGuard {
public:
    explicit SlotGuard(std::counting_semaphore<1024>& s) : s_(s) { s_.acquire(); }
    ~SlotGuard() { s_.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

private:
    std::counting_semaphore<1024>& s_;
};

} // namespace

HttpTransport::HttpTransport(HttpConfig config)
    : config_(std::move(config)), in_flight_(std::max(1, config_.max_in_flight)) {
    if (config_.base_url.empty()) throw ConfigError("provider endpoint is not configured");
    split_url(config_.base_url);
}

std::string HttpTransport::post(const std::string& route, const nlohmann::json& payload) {
    const auto url = split_url(config_.base_url);
    SlotGuard slot(in_flight_);

    httplib::Client client(url.origin);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);
    client.set_write_timeout(config_.timeout_seconds);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    const auto body = payload.dump();
    int backoff = config_.backoff_ms;
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
        auto res = client.Post(url.base_path + route, headers, body, "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) return res->body;
        last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
        const bool retriable = res->status == 429 || res->status >= 500;
        if (!retriable) throw ProviderError(last_error, false);
    }
    throw ProviderError(last_error + " (after " + std::to_string(config_.max_retries + 1) + " attempts)", true);
}

} // namespace lyricpref
