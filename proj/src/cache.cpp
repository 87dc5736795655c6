#include "lyricpref/transport.hpp"

#include "lyricpref/errors.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <unistd.h>

namespace lyricpref {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

std::string ResponseCache::key(const std::string& provider_id, const std::string& model_id, const std::string& route,
                               const std::string& payload) {
    std::string material;
    material.reserve(provider_id.size() + model_id.size() + route.size() + payload.size() + 3);
    material += provider_id;
    material += '\0';
    material += model_id;
    material += '\0';
    material += route;
    material += '\0';
    material += payload;
    return sha256_hex(material);
}

fs::path ResponseCache::path_for(const std::string& key) const { return dir_ / key.substr(0, 2) / (key + ".json"); }

std::optional<std::string> ResponseCache::get(const std::string& key) const {
    std::shared_lock lock(mutex_);
    std::ifstream in(path_for(key));
    if (!in) return std::nullopt;
    try {
        const auto entry = nlohmann::json::parse(in);
        return entry.at("response").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        return std::nullopt; // corrupt entry is treated as a miss and rewritten
    }
}

void ResponseCache::put(const std::string& key, const std::string& provider_id, const std::string& model_id,
                        const std::string& response) {
    const auto stamp = std::chrono::duration_cast<std::chrono::seconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count();
    nlohmann::json entry = {{"key", key},
                            {"provider", provider_id},
                            {"model", model_id},
                            {"timestamp", stamp},
                            {"response", response}};
    std::unique_lock lock(mutex_);
    const auto target = path_for(key);
    fs::create_directories(target.parent_path());
    std::ostringstream tmp_name;
    tmp_name << target.string() << ".tmp." << ::getpid() << '.' << std::this_thread::get_id();
    const fs::path tmp = tmp_name.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write cache entry " + tmp.string());
        out << entry.dump();
    }
    fs::rename(tmp, target);
}

ResponseCache::Stats ResponseCache::stats() const {
    std::shared_lock lock(mutex_);
    Stats s;
    if (!fs::exists(dir_)) return s;
    for (const auto& e : fs::recursive_directory_iterator(dir_)) {
        if (e.is_regular_file() && e.path().extension() == ".json") {
            ++s.entries;
            s.bytes += e.file_size();
        }
    }
    return s;
}

std::size_t ResponseCache::purge() {
    std::unique_lock lock(mutex_);
    std::size_t removed = 0;
    if (!fs::exists(dir_)) return 0;
    for (const auto& e : fs::directory_iterator(dir_)) {
        if (e.is_directory() && e.path().filename().string().size() == 2) {
            for (const auto& f : fs::directory_iterator(e.path())) {
                if (f.path().extension() == ".json") ++removed;
            }
            fs::remove_all(e.path());
        }
    }
    return removed;
}

CachedTransport::CachedTransport(std::shared_ptr<Transport> inner, std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

std::string CachedTransport::post(const std::string& route, const nlohmann::json& payload) {
    const auto model = payload.value("model", std::string{});
    const auto body = payload.dump();
    const auto key = ResponseCache::key(inner_->provider_id(), model, route, body);
    if (auto hit = cache_->get(key)) {
        ++hits_;
        return *hit;
    }
    ++upstream_calls_;
    auto response = inner_->post(route, payload);
    cache_->put(key, inner_->provider_id(), model, response);
    return response;
}

} // namespace lyricpref
