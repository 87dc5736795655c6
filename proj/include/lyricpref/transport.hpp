#pragma once

#include "json.hpp"

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>

namespace lyricpref {

// Sends one JSON request to a provider route ("/chat/completions", ...) and
// returns the raw response body.
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::string post(const std::string& route, const nlohmann::json& payload) = 0;
    virtual std::string provider_id() const = 0;
};

std::string sha256_hex(const std::string& data);

// Content-addressed on-disk response store. Entries live at
// <dir>/<first two hex chars>/<key>.json and hold the raw response plus the
// time it was written. Readers run concurrently; writers are serialized and
// publish via rename so readers never see partial files.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    static std::string key(const std::string& provider_id, const std::string& model_id, const std::string& route,
                           const std::string& payload);

    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& provider_id, const std::string& model_id,
             const std::string& response);

    struct Stats {
        std::size_t entries = 0;
        std::uintmax_t bytes = 0;
    };
    Stats stats() const;
    std::size_t purge();

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path path_for(const std::string& key) const;

    std::filesystem::path dir_;
    mutable std::shared_mutex mutex_;
};

// Routes every request through a ResponseCache; identical payloads reach the
// wrapped transport at most once.
class CachedTransport : public Transport {
public:
    CachedTransport(std::shared_ptr<Transport> inner, std::shared_ptr<ResponseCache> cache);

    std::string post(const std::string& route, const nlohmann::json& payload) override;
    std::string provider_id() const override { return inner_->provider_id(); }

    std::size_t upstream_calls() const { return upstream_calls_.load(); }
    std::size_t hits() const { return hits_.load(); }

private:
    std::shared_ptr<Transport> inner_;
    std::shared_ptr<ResponseCache> cache_;
    std::atomic<std::size_t> upstream_calls_{0};
    std::atomic<std::size_t> hits_{0};
};

struct HttpConfig {
    std::string base_url;      // e.g. https://api.example.com/v1
    std::string api_key;       // sent as a bearer token when non-empty
    int timeout_seconds = 60;
    int max_retries = 4;
    int backoff_ms = 500;      // doubled after each retriable failure
    int max_in_flight = 4;
};

class HttpTransport : public Transport {
public:
    explicit HttpTransport(HttpConfig config);

    std::string post(const std::string& route, const nlohmann::json& payload) override;
    std::string provider_id() const override { return "http:" + config_.base_url; }

private:
    HttpConfig config_;
    std::counting_semaphore<1024> in_flight_;
};

} // namespace lyricpref
