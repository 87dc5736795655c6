#include "doctest.h"

#include "lyricpref/config.hpp"
#include "lyricpref/errors.hpp"

#include "../support.hpp"

using namespace lyricpref;

namespace {

ConfigSources isolated() {
    ConfigSources s;
    s.getenv = [](const char*) -> const char* { return nullptr; };
    return s;
}

} // namespace

TEST_CASE("defaults resolve without any source") {
    const auto c = resolve_config(isolated());
    CHECK_FALSE(c.offline);
    CHECK(c.k_folds == 5);
    CHECK(c.n_seeds == 5);
    CHECK(c.test_fraction == 0.2);
    CHECK(c.models.learning_rate == 1e-4);
    CHECK(c.providers.completion_top_logprobs == 5);
    CHECK(c.resolution_log.empty());
    CHECK(c.taxonomy().size() == 29);
}

TEST_CASE("flags beat environment beats file") {
    testing::TempDir dir("config");
    testing::write_file(dir / "c.json",
                        R"({"seed": 3, "jobs": 2, "providers": {"chat_model": "from-file"}, "models": {"max_depth": 4}})");
    auto s = isolated();
    s.file = dir / "c.json";
    s.getenv = [](const char* name) -> const char* {
        const std::string n = name;
        if (n == "LYRICPREF_CHAT_MODEL") return "from-env";
        if (n == "LYRICPREF_JOBS") return "6";
        return nullptr;
    };
    s.flags["jobs"] = "8";
    const auto c = resolve_config(s);
    CHECK(c.seed == 3);
    CHECK(c.models.max_depth == 4);
    CHECK(c.providers.chat_model == "from-env");
    CHECK(c.jobs == 8);
    bool logged = false;
    for (const auto& line : c.resolution_log) logged |= line == "jobs = 8 (flag)";
    CHECK(logged);
}

TEST_CASE("unknown keys and wrong types are rejected") {
    testing::TempDir dir("config-bad");
    auto with_file = [&](const std::string& text) {
        testing::write_file(dir / "c.json", text);
        auto s = isolated();
        s.file = dir / "c.json";
        return resolve_config(s);
    };
    CHECK_THROWS_AS(with_file(R"({"sede": 3})"), ConfigError);
    CHECK_THROWS_AS(with_file(R"({"providers": {"chat_modle": "x"}})"), ConfigError);
    CHECK_THROWS_AS(with_file(R"({"models": {"depth": 4}})"), ConfigError);
    CHECK_THROWS_AS(with_file(R"({"jobs": "many"})"), ConfigError);
    CHECK_THROWS_AS(with_file(R"({"test_fraction": 1.5})"), ConfigError);
    CHECK_THROWS_AS(with_file("{not json"), ConfigError);
    auto s = isolated();
    s.flags["nope"] = "1";
    CHECK_THROWS_AS(resolve_config(s), ConfigError);
    s.flags.clear();
    s.flags["models.max_depth"] = "deep";
    CHECK_THROWS_AS(resolve_config(s), ConfigError);
}

TEST_CASE("sentiment partition override") {
    testing::TempDir dir("partition");
    const auto& tax = EmotionTaxonomy::shipped();
    nlohmann::json groups = {{"positive", nlohmann::json::array()}, {"neutral", nlohmann::json::array()},
                             {"negative", nlohmann::json::array()}};
    for (int i = 0; i < tax.size(); ++i) groups[i == 0 ? "negative" : "neutral"].push_back(tax.label(i));
    testing::write_file(dir / "p.json", groups.dump());
    const auto t = apply_partition(tax, dir / "p.json");
    CHECK(t.polarity(0) == -1);
    CHECK(t.polarity(1) == 0);
    groups["neutral"].erase(0);
    testing::write_file(dir / "p.json", groups.dump());
    CHECK_THROWS_AS(apply_partition(tax, dir / "p.json"), ConfigError);
}

TEST_CASE("shipped defaults file matches the built-in defaults") {
    const auto text = testing::read_file(std::filesystem::path(LYRICPREF_SOURCE_DIR) / "config" / "defaults.json");
    CHECK(nlohmann::json::parse(text) == default_config_json());
    auto s = isolated();
    s.file = std::filesystem::path(LYRICPREF_SOURCE_DIR) / "config" / "defaults.json";
    CHECK(resolve_config(s).k_folds == 5);
}
