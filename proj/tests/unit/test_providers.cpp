#include "doctest.h"

#include "lyricpref/clients.hpp"
#include "lyricpref/errors.hpp"
#include "lyricpref/mock.hpp"
#include "lyricpref/transport.hpp"

#include "../support.hpp"

using namespace lyricpref;
using nlohmann::json;

namespace {

std::string chat_with_top(const json& top) {
    json choice = {{"message", {{"content", "3"}}}, {"logprobs", {{"content", json::array({{{"top_logprobs", top}}})}}}};
    return json{{"choices", json::array({choice})}}.dump();
}

std::string chat_content(const std::string& content) {
    return json{{"choices", json::array({{{"message", {{"content", content}}}}})}}.dump();
}

// Counts posts and returns a fixed body.
class CountingTransport : public Transport {
public:
    std::string post(const std::string&, const json& payload) override {
        ++calls;
        return payload.dump();
    }
    std::string provider_id() const override { return "counting"; }
    int calls = 0;
};

} // namespace

TEST_CASE("rubric parser keeps only rating tokens") {
    const auto d = LlmRubricScorer::parse_response(chat_with_top(json::array(
        {{{"token", "4"}, {"logprob", std::log(0.5)}}, {{"token", " 2"}, {"logprob", std::log(0.25)}},
         {{"token", "Rating"}, {"logprob", std::log(0.25)}}})));
    CHECK(d.prob(4) == doctest::Approx(2.0 / 3.0));
    CHECK(d.prob(2) == doctest::Approx(1.0 / 3.0));
    CHECK(d.prob(1) == 0.0);
    CHECK_THROWS_AS(LlmRubricScorer::parse_response(chat_with_top(json::array({{{"token", "x"}, {"logprob", 0.0}}}))),
                    UnparseableResponseError);
    CHECK_THROWS_AS(LlmRubricScorer::parse_response("<html>"), UnparseableResponseError);
}

TEST_CASE("emotion parser validates against the taxonomy") {
    const auto& tax = EmotionTaxonomy::shipped();
    const auto labels = tax.labels();
    auto answer = [&](const std::vector<std::pair<std::string, double>>& items) {
        json list = json::array();
        for (const auto& [l, p] : items) list.push_back({{"label", l}, {"probability", p}});
        return chat_content("Here you go: " + json{{"emotions", list}}.dump());
    };
    const auto ok = LlmEmotionClassifier::parse_response(
        answer({{labels[0], 0.3}, {labels[1], 0.2}, {labels[2], 0.1}, {labels[3], 0.1}, {labels[4], 0.1}}), tax);
    CHECK(ok.top.size() == 5);
    CHECK_FALSE(ok.renormalized);
    const auto heavy = LlmEmotionClassifier::parse_response(
        answer({{labels[0], 0.5}, {labels[1], 0.5}, {labels[2], 0.5}, {labels[3], 0.25}, {labels[4], 0.25}}), tax);
    CHECK(heavy.renormalized);
    CHECK(heavy.mass() == doctest::Approx(1.0));
    CHECK_THROWS_AS(LlmEmotionClassifier::parse_response(
                        answer({{"wistful", 0.3}, {labels[1], 0.2}, {labels[2], 0.1}, {labels[3], 0.1}, {labels[4], 0.1}}),
                        tax),
                    TaxonomyError);
    CHECK_THROWS_AS(LlmEmotionClassifier::parse_response(answer({{labels[0], 0.3}}), tax), UnparseableResponseError);
}

TEST_CASE("category counts are bounded by the word count") {
    const auto c = LlmCategoryCounter::parse_response(chat_content("{\"dav\":1,\"iav\":0,\"sv\":2,\"adj\":1}"), 5);
    CHECK(c.dav == 1);
    CHECK(c.total() == 4);
    CHECK_THROWS_AS(LlmCategoryCounter::parse_response(chat_content("{\"dav\":9,\"iav\":0,\"sv\":0,\"adj\":0}"), 3),
                    UnparseableResponseError);
    CHECK_THROWS_AS(LlmCategoryCounter::parse_response(chat_content("{\"dav\":1}"), 3), UnparseableResponseError);
}

TEST_CASE("tokens align to words by offset") {
    CHECK(word_for_offset("the city", 0, "the") == 0u);
    CHECK(word_for_offset("the city", 3, " city") == 1u);
    CHECK(word_for_offset("the city", 5, "ity") == 1u);
}

TEST_CASE("embeddings are unit length and cosine is symmetric") {
    auto t = std::make_shared<MockTransport>();
    EmbeddingsClient e(t, EmbeddingSettings{"embed", 0});
    const auto a = e.embed("the night sky");
    const auto b = e.embed("a burning city");
    CHECK(a.dimension() == 64);
    CHECK(a.values().norm() == doctest::Approx(1.0));
    CHECK(cosine(a, b) == doctest::Approx(cosine(b, a)));
    CHECK(cosine(a, a) == doctest::Approx(1.0));
    CHECK(e.embed("the night sky").values() == a.values());
    CHECK_THROWS_AS(EmbeddingVector(VectorXd::Zero(3)), ProviderError);
    EmbeddingsClient wrong(t, EmbeddingSettings{"embed", 32});
    CHECK_THROWS_AS(wrong.embed("x"), ConfigError);
}

TEST_CASE("cache serves repeated requests without the upstream") {
    testing::TempDir dir("cache");
    auto inner = std::make_shared<CountingTransport>();
    auto cache = std::make_shared<ResponseCache>(dir.path());
    CachedTransport cached(inner, cache);
    const json p1 = {{"model", "m"}, {"prompt", "x"}};
    const json p2 = {{"model", "m"}, {"prompt", "y"}};
    const auto r1 = cached.post("/completions", p1);
    CHECK(cached.post("/completions", p1) == r1);
    cached.post("/completions", p2);
    cached.post("/chat/completions", p1);
    CHECK(inner->calls == 3);
    CHECK(cached.upstream_calls() == 3);
    CHECK(cached.hits() == 1);
    CHECK(cache->stats().entries == 3);

    // A fresh transport over the same directory is fully warm.
    auto inner2 = std::make_shared<CountingTransport>();
    CachedTransport again(inner2, std::make_shared<ResponseCache>(dir.path()));
    CHECK(again.post("/completions", p1) == r1);
    CHECK(inner2->calls == 0);

    CHECK(cache->purge() == 3);
    CHECK(cache->stats().entries == 0);
}

TEST_CASE("cache keys separate provider, model and route") {
    const auto k = ResponseCache::key("p", "m", "/r", "{}");
    CHECK(k.size() == 64);
    CHECK(k != ResponseCache::key("q", "m", "/r", "{}"));
    CHECK(k != ResponseCache::key("p", "n", "/r", "{}"));
    CHECK(k != ResponseCache::key("p", "m", "/s", "{}"));
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("mock is a pure function of its seed") {
    MockOptions o1;
    o1.seed = 1;
    MockTransport a(o1), b(o1);
    MockOptions o2;
    o2.seed = 2;
    MockTransport c(o2);
    const json req = {{"model", "m"}, {"input", "hello"}};
    CHECK(a.post("/embeddings", req) == b.post("/embeddings", req));
    CHECK(a.post("/embeddings", req) != c.post("/embeddings", req));
    CHECK(a.calls() == 2);
    CHECK_THROWS_AS(a.post("/unknown", req), ProviderError);
    CHECK(a.tokenize("i keep burning") == std::vector<std::string>{"i", " keep", " burni", "ng"});
}
