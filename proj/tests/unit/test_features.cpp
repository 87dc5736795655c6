#include "doctest.h"

#include "lyricpref/clients.hpp"
#include "lyricpref/errors.hpp"
#include "lyricpref/extraction.hpp"
#include "lyricpref/features.hpp"
#include "lyricpref/mock.hpp"

#include "../support.hpp"

#include <cmath>

using namespace lyricpref;

namespace {

CorpusStats stats_of(const std::vector<std::vector<std::string>>& corpus) {
    CorpusStats s;
    for (const auto& l : corpus) s.add_line(l);
    return s;
}

std::shared_ptr<MockTransport> mock(MockLm lm) {
    MockOptions o;
    o.lm = lm;
    return std::make_shared<MockTransport>(o);
}

} // namespace

TEST_CASE("rubric expectation") {
    CHECK(RatingDistribution({1, 1, 1, 1, 1}).expectation() == 3.0);
    CHECK(RatingDistribution({1, 0, 0, 0, 0}).expectation() == 1.0);
    CHECK(RatingDistribution({0, 0, 0, 0, 7}).expectation() == 5.0);
    CHECK(RatingDistribution({0, 2, 0, 2, 0}).expectation() == doctest::Approx(3.0).epsilon(1e-15));
    CHECK_THROWS_AS(RatingDistribution({0, 0, 0, 0, 0}), UnparseableResponseError);
    CHECK_THROWS_AS(RatingDistribution({1, -1, 0, 0, 0}), UnparseableResponseError);
}

TEST_CASE("abstraction score") {
    CHECK(abstraction_score({5, 0, 0, 0}) == 1.0);
    CHECK(abstraction_score({2, 2, 2, 2}) == 2.5);
    CHECK(abstraction_score({0, 0, 0, 3}) == 4.0);
    CHECK(abstraction_score({}) == 0.0);
    CHECK(abstraction_score({1, 0, 1, 0}) == 2.0);
}

TEST_CASE("valence redistribution fills the taxonomy") {
    const auto& tax = EmotionTaxonomy::shipped();
    REQUIRE(tax.size() == 29);
    EmotionPrediction p;
    p.top = {{0, 0.4}, {3, 0.2}, {7, 0.1}, {12, 0.05}, {20, 0.05}};
    const auto full = redistribute(p, tax);
    CHECK(full.size() == 29);
    CHECK(full.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(full(3) == 0.2);
    CHECK(full(1) == (1.0 - p.mass()) / 24.0);
    const double v = binary_valence(full, tax);
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);

    EmotionPrediction bad;
    bad.top = {{0, 0.4}, {0, 0.2}, {7, 0.1}, {12, 0.05}, {20, 0.05}};
    CHECK_THROWS(redistribute(bad, tax));
    EmotionPrediction heavy;
    heavy.top = {{0, 0.4}, {1, 0.4}, {7, 0.4}, {12, 0.05}, {20, 0.05}};
    CHECK_THROWS_AS(redistribute(heavy, tax), FeatureError);
}

TEST_CASE("NPMI matches direct enumeration") {
    Rng rng(5);
    const std::vector<std::string> words = {"a", "b", "c", "d", "e", "f"};
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::vector<std::string>> corpus(1 + rng.index(8));
        for (auto& line : corpus) {
            line.resize(1 + rng.index(10));
            for (auto& w : line) w = words[rng.index(2 + rng.index(5))];
        }
        const auto stats = stats_of(corpus);
        for (const auto& line : corpus) {
            std::string text;
            for (const auto& w : line) text += w + " ";
            const auto l = LyricLine::from_raw("l", text);
            for (bool bi : {false, true}) {
                const auto v = npmi_vector(l, stats, bi ? NpmiDirection::Bi : NpmiDirection::Uni);
                REQUIRE(v.size() == static_cast<Eigen::Index>(line.size()));
                double sum = 0.0;
                for (std::size_t i = 0; i + 1 < line.size(); ++i) {
                    const double expected = testing::npmi_oracle(corpus, line[i], line[i + 1], bi);
                    CHECK(v(static_cast<Eigen::Index>(i)) == expected);
                    sum += expected;
                }
                if (line.size() > 1) CHECK(v(v.size() - 1) == doctest::Approx(sum / (line.size() - 1)));
                else CHECK(v(0) == 0.0);
                CHECK(v.minCoeff() >= -1.0);
                CHECK(v.maxCoeff() <= 1.0);
            }
        }
    }
}

TEST_CASE("NPMI worked values") {
    const auto stats = stats_of({{"a", "b", "a", "b"}});
    CHECK(npmi(stats, "a", "b", NpmiDirection::Uni) == 1.0);
    CHECK(npmi(stats, "b", "b", NpmiDirection::Uni) == -1.0);
    // Bigrams never cross lines.
    const auto split = stats_of({{"a"}, {"b"}});
    CHECK(split.count("a", "b") == 0);
    CHECK(npmi(split, "a", "b", NpmiDirection::Bi) == -1.0);
    CHECK_THROWS_AS(npmi(stats, "a", "zzz", NpmiDirection::Uni), FeatureError);

    const auto line = LyricLine::from_raw("l", "a zzz b");
    CHECK_THROWS_AS(npmi_vector(line, stats, NpmiDirection::Uni), FeatureError);
    bool fallback = false;
    const auto v = npmi_vector(line, stats, NpmiDirection::Uni, UnseenWordPolicy::MinusOne, &fallback);
    CHECK(fallback);
    CHECK(v(0) == -1.0);
    CHECK(v(1) == -1.0);
}

TEST_CASE("surprisal and entropy against closed-form mocks") {
    const int vocab = 50257;
    const double log2v = std::log2(static_cast<double>(vocab));
    // "burning" is two mock tokens (chunks of five characters).
    const auto line = LyricLine::from_raw("l", "i keep burning");
    CompletionSettings cs;
    CompletionsTokenModel uniform(mock(MockLm::Uniform), cs);
    const auto s = surprisal_vector(line, uniform);
    const auto h = entropy_vector(line, uniform);
    REQUIRE(s.size() == 4);
    CHECK(s(0) == doctest::Approx(log2v).epsilon(1e-12));
    CHECK(s(2) == doctest::Approx(2 * log2v).epsilon(1e-12));
    CHECK(s(3) == doctest::Approx(4 * log2v / 3).epsilon(1e-12));
    for (int i = 0; i < 4; ++i) CHECK(h(i) == doctest::Approx(log2v).epsilon(1e-12));

    CompletionsTokenModel onehot(mock(MockLm::Deterministic), cs);
    CHECK(surprisal_vector(line, onehot).isZero(0.0));
    CHECK(entropy_vector(line, onehot).isZero(0.0));
}

TEST_CASE("missing entropies need the explicit approximation") {
    MockOptions o;
    o.exact_entropy = false;
    auto t = std::make_shared<MockTransport>(o);
    CompletionSettings strict;
    CompletionsTokenModel lm(t, strict);
    CHECK_THROWS_AS(lm.token_logprobs("hello there"), CapabilityError);
    CompletionSettings lax;
    lax.allow_topk_entropy = true;
    CompletionsTokenModel approx(t, lax);
    const auto steps = approx.token_logprobs("hello there");
    REQUIRE_FALSE(steps.empty());
    for (const auto& st : steps) CHECK(st.entropy_approximate);
}

TEST_CASE("extracted tensors respect shape and bounds") {
    auto transport = mock(MockLm::Hashed);
    ChatSettings chat{"chat", 20, 0};
    ExtractionProviders p;
    p.rubric = std::make_shared<LlmRubricScorer>(transport, chat, PromptSet::shipped());
    p.emotions = std::make_shared<LlmEmotionClassifier>(transport, chat, PromptSet::shipped(), EmotionTaxonomy::shipped());
    p.categories = std::make_shared<LlmCategoryCounter>(transport, chat, PromptSet::shipped());
    p.tokens = std::make_shared<CompletionsTokenModel>(transport, CompletionSettings{});
    std::vector<LyricLine> lines = {LyricLine::from_raw("a", "the city is burning tonight"),
                                    LyricLine::from_raw("b", "love"), LyricLine::from_raw("c", "hold on to the light")};
    const double log2v = std::log2(50257.0);
    for (auto mode : {ValenceMode::Binary, ValenceMode::Full}) {
        ExtractionOptions opts;
        opts.valence_mode = mode;
        opts.jobs = 2;
        FeatureExtractor ex(p, build_corpus_stats(lines), opts);
        const auto records = ex.extract_all(lines);
        REQUIRE(records.size() == 3);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const auto& t = records[i].tensor;
            CHECK(t.line_id == lines[i].id);
            CHECK(t.timesteps() == static_cast<Eigen::Index>(lines[i].size()));
            CHECK(t.width() == (mode == ValenceMode::Binary ? 9 : 8 + 29));
            CHECK_NOTHROW(check_tensor_bounds(t, log2v));
            for (Eigen::Index c = 0; c < t.width(); ++c) {
                CHECK(t.rows(t.timesteps(), c) == doctest::Approx(t.timestep_rows().col(c).mean()));
            }
            if (mode == ValenceMode::Full) {
                for (Eigen::Index r = 0; r <= t.timesteps(); ++r)
                    CHECK(t.rows.row(r).tail(29).sum() == doctest::Approx(1.0).epsilon(1e-9));
            }
        }
        // Same providers, same output.
        CHECK(ex.extract_all(lines)[0].tensor.rows == records[0].tensor.rows);
    }
}

TEST_CASE("flattened tensors pad to max_len") {
    FeatureTensor t;
    t.rows = MatrixXd::Constant(4, 9, 2.0); // three timesteps + aggregate
    t.rows(3, 0) = 7.0;
    const auto flat = flatten_tensor(t, 5);
    CHECK(flat.size() == 6 * 9);
    CHECK(flat.head(27).isConstant(2.0));
    CHECK(flat.segment(27, 18).isZero());
    CHECK(flat(45) == 7.0);
    const auto means = timestep_means(t);
    CHECK(means[kImagery] == 7.0);
    CHECK(means[kEnergy] == 2.0);
}

TEST_CASE("bounds checks name the offending cell") {
    FeatureTensor t;
    t.line_id = "x";
    t.rows = MatrixXd::Constant(2, 9, 2.0);
    t.rows(0, kNpmiUni) = 1.5;
    CHECK_THROWS_AS(check_tensor_bounds(t), FeatureError);
}
