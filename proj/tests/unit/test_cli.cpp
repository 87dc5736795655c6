#include "doctest.h"

#include "lyricpref/cli.hpp"

#include "../support.hpp"

#include <sstream>

using namespace lyricpref;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "lyricpref");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

} // namespace

TEST_CASE("offline pipeline through the command line") {
    testing::TempDir dir("cli");
    const auto p = [&](const std::string& name) { return (dir / name).string(); };
    testing::write_file(dir / "raw.jsonl", testing::synthetic_dataset_jsonl(40, 3));
    const std::vector<std::string> global = {"--offline", "--quiet", "--cache-dir", p("cache")};
    auto with = [&](std::vector<std::string> args) {
        args.insert(args.begin(), global.begin(), global.end());
        return cli(args);
    };

    auto r = with({"ingest", "--dataset", p("raw.jsonl"), "--out", p("data.jsonl")});
    REQUIRE(r.code == 0);
    r = with({"extract", "--dataset", p("data.jsonl"), "--out", p("f1.jsonl")});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("provider calls 0") == std::string::npos);
    r = with({"extract", "--dataset", p("data.jsonl"), "--out", p("f2.jsonl")});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("provider calls 0,") != std::string::npos);
    CHECK(testing::read_file(dir / "f1.jsonl") == testing::read_file(dir / "f2.jsonl"));

    const std::vector<std::string> data = {"--dataset", p("data.jsonl"), "--feature-file", p("f1.jsonl")};
    auto sub = [&](std::vector<std::string> head, std::vector<std::string> tail) {
        head.insert(head.end(), data.begin(), data.end());
        head.insert(head.end(), tail.begin(), tail.end());
        return with(head);
    };
    r = sub({"train"}, {"--annotator", "A1", "--model", "gbdt", "--out", p("m.json")});
    CHECK(r.code == 0);
    CHECK(std::filesystem::exists(dir / "m.json"));
    r = sub({"evaluate"}, {"--annotator", "A1", "--model", "logistic", "--mode", "means", "--seeds", "2", "--out",
                           p("report.json")});
    CHECK(r.code == 0);
    CHECK(testing::read_file(dir / "report.json").find("\"majority\"") != std::string::npos);
    r = sub({"analyze"}, {"--annotator", "A1", "--out", p("inter.csv")});
    CHECK(r.code == 0);
    r = sub({"profile"}, {"--out-dir", p("profiles")});
    CHECK(r.code == 0);
    CHECK(std::filesystem::exists(dir / "profiles" / "A3.svg"));
    CHECK(std::filesystem::exists(dir / "profiles" / "profiles.csv"));
    r = with({"agreement", "--dataset", p("data.jsonl"), "--out", p("agree.csv")});
    CHECK(r.code == 0);

    r = with({"cache", "stats"});
    CHECK(r.code == 0);
    CHECK(r.out.find(" 0 entries") == std::string::npos);
    r = with({"cache", "purge"});
    CHECK(r.code == 0);
    CHECK(with({"cache", "stats"}).out.find(" 0 entries") != std::string::npos);

    // Errors map onto exit codes.
    r = sub({"train"}, {"--annotator", "nobody", "--out", p("x.json")});
    CHECK(r.code == 1);
    CHECK(r.err.find("nobody") != std::string::npos);
    r = with({"ingest", "--dataset", p("missing.jsonl"), "--out", p("x.jsonl")});
    CHECK(r.code == 1);
}

TEST_CASE("usage errors print help and exit 1") {
    auto r = cli({"--definitely-not-a-flag", "cache", "stats"});
    CHECK(r.code == 1);
    CHECK(r.err.find("Usage") != std::string::npos);
    r = cli({"train", "--annotator"});
    CHECK(r.code == 1);
    r = cli({"--help"});
    CHECK(r.code == 0);
}

TEST_CASE("online mode needs an endpoint and reports provider failures") {
    testing::TempDir dir("cli-online");
    testing::write_file(dir / "raw.jsonl", testing::synthetic_dataset_jsonl(6, 1));
    const auto cache = (dir / "cache").string();
    auto r = cli({"--quiet", "--cache-dir", cache, "extract", "--dataset", (dir / "raw.jsonl").string(), "--out",
                  (dir / "f.jsonl").string()});
    CHECK(r.code == 1);
    r = cli({"--quiet", "--cache-dir", cache, "--set", "providers.endpoint=http://127.0.0.1:9", "--set",
             "providers.max_retries=0", "--set", "providers.timeout_seconds=2", "extract", "--dataset",
             (dir / "raw.jsonl").string(), "--out", (dir / "f.jsonl").string()});
    CHECK(r.code == 2);
}

TEST_CASE("timestamps") {
    CHECK(resolve_timestamp("2024-01-02T03:04:05Z", false) == "2024-01-02T03:04:05Z");
    if (!std::getenv("SOURCE_DATE_EPOCH")) CHECK(resolve_timestamp("", true) == "1970-01-01T00:00:00Z");
}
