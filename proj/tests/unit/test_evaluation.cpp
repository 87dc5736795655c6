#include "doctest.h"

#include "lyricpref/errors.hpp"
#include "lyricpref/evaluation.hpp"
#include "lyricpref/fewshot.hpp"

#include "../support.hpp"

#include <set>

using namespace lyricpref;

namespace {

ExperimentData planted_data(int n, std::uint64_t seed) {
    Rng rng(seed);
    ExperimentData d;
    for (int i = 0; i < n; ++i) {
        MeanFeatures m;
        for (auto& v : m.values) v = rng.normal();
        d.ids.push_back("l" + std::to_string(i));
        d.texts.push_back("line " + std::to_string(i));
        d.tensors.push_back(testing::tensor_with_means(m, 2 + static_cast<int>(rng.index(4)), rng, d.ids.back()));
        d.labels.push_back((m[kSurprisal] - m[kImagery] > 0) != rng.bernoulli(0.05));
    }
    d.feature_fingerprint = "test";
    return d;
}

// Embeds texts by hashing; answers by a keyword.
class FakeEmbedder : public Embedder {
public:
    EmbeddingVector embed(const std::string& text) override {
        Rng rng(stable_hash(text));
        VectorXd v(8);
        for (auto& x : v) x = rng.normal();
        return EmbeddingVector(v);
    }
    std::string fingerprint() const override { return "fake-embed"; }
};

class FakeChat : public ChatModel {
public:
    explicit FakeChat(std::string reply, std::size_t limit = 0) : reply_(std::move(reply)), limit_(limit) {}
    std::string complete(const std::string& prompt) override {
        last_prompt = prompt;
        return reply_;
    }
    std::size_t context_limit() const override { return limit_; }
    std::string fingerprint() const override { return "fake-chat"; }
    std::string last_prompt;

private:
    std::string reply_;
    std::size_t limit_;
};

} // namespace

TEST_CASE("rank AUC equals the pairwise definition") {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.index(60);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.index(trial % 3 == 0 ? 4 : 1000)); // heavy ties on some trials
            y[i] = static_cast<int>(rng.index(2));
        }
        y[0] = 0;
        y[1] = 1;
        CHECK(std::abs(rank_auc(s, y) - testing::pairwise_auc_oracle(s, y)) <= 1e-12);
    }
}

TEST_CASE("metric edge cases") {
    const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
    const std::vector<int> y{0, 0, 1, 1};
    const auto m = compute_metrics(s, y);
    CHECK(m.accuracy == 0.75);
    CHECK(*m.auc == 0.75);
    const std::vector<int> one_class{1, 1, 1, 1};
    const auto single = compute_metrics(s, one_class);
    CHECK_FALSE(single.auc.has_value());
    CHECK_THROWS_AS(single.require_auc(), ValidationError);
    const std::vector<double> perfect{0.0, 0.1, 0.9, 1.0};
    CHECK(rank_auc(perfect, y) == 1.0);
    const std::vector<double> flat{0.5, 0.5, 0.5, 0.5};
    CHECK(rank_auc(flat, y) == 0.5);
}

TEST_CASE("majority baseline in percent") {
    std::vector<int> y(200, 0);
    std::fill(y.begin(), y.begin() + 59, 1);
    CHECK(majority_baseline(y).accuracy == 70.5);
    CHECK(majority_baseline(y).auc == 50.0);
}

TEST_CASE("experiments are deterministic and independent of thread count") {
    const auto data = planted_data(150, 4);
    SplitConfig split;
    split.n_seeds = 3;
    split.base_seed = 77;
    TrainConfig c;
    const auto a = run_experiment(data, "A1", ModelKind::Logistic, FeatureMode::Means, split, c, nullptr, 1);
    const auto b = run_experiment(data, "A1", ModelKind::Logistic, FeatureMode::Means, split, c, nullptr, 3);
    CHECK(a == b);
    REQUIRE(a.rows.size() == 2);
    CHECK(a.rows[0].method == "logistic");
    CHECK(a.rows[1].method == "majority");
    CHECK(a.rows[0].accuracies.size() == 3);
    CHECK(a.rows[0].accuracy_mean > 80.0);
    CHECK(a.seeds.size() == 3);
    std::set<std::uint64_t> distinct(a.seeds.begin(), a.seeds.end());
    CHECK(distinct.size() == 3);

    const auto csv = export_report(a, ReportFormat::Csv);
    CHECK(csv.rfind("method,annotator,accuracy_mean,accuracy_std,auc_mean,auc_std\n", 0) == 0);
    CHECK(report_from_json(export_report(a, ReportFormat::Json)) == a);
}

TEST_CASE("tuning and tree models run through the protocol") {
    const auto data = planted_data(100, 5);
    SplitConfig split;
    split.n_seeds = 2;
    split.tune = true;
    split.k_folds = 3;
    TrainConfig c;
    c.n_trees = 5;
    c.rounds = 10;
    for (auto kind : {ModelKind::Tree, ModelKind::Gbdt, ModelKind::LinearSvm}) {
        CHECK_FALSE(tuning_grid(kind, c).empty());
        const auto r = run_experiment(data, "A1", kind, FeatureMode::Means, split, c);
        CHECK(r.rows[0].accuracy_mean > 50.0);
    }
}

TEST_CASE("gathering data reports every missing line") {
    testing::TempDir dir("gather");
    testing::write_file(dir / "d.jsonl", testing::synthetic_dataset_jsonl(5, 1));
    const auto ds = load_dataset(dir / "d.jsonl");
    std::map<std::string, FeatureRecord> features;
    FeatureRecord r;
    r.tensor.line_id = "line-0";
    r.tensor.rows = MatrixXd::Zero(2, 9);
    features["line-0"] = r;
    try {
        gather_experiment_data(ds, "A1", features);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string what = e.what();
        CHECK(what.find("line-1") != std::string::npos);
        CHECK(what.find("line-4") != std::string::npos);
    }
}

TEST_CASE("few-shot picks nearest examples per class") {
    FakeEmbedder embed;
    std::vector<FewshotExample> pool;
    for (int i = 0; i < 12; ++i) {
        const std::string text = "pool line " + std::to_string(i);
        pool.push_back({text, embed.embed(text), {i % 2, i < 6 ? 1 : 0}});
    }
    FakeChat chat("I think it is Inspiring.");
    FewshotOptions o;
    o.k = 3;
    std::vector<FewshotExample> one_source;
    for (auto ex : pool) {
        ex.labels.resize(1);
        one_source.push_back(ex);
    }
    const auto r = fewshot_llm_classify("query text", one_source, o, chat, embed);
    CHECK(r.label == 1);
    CHECK(r.k_used == 3);
    CHECK(r.positives.size() == 3);
    const auto q = embed.embed("query text");
    for (std::size_t i = 0; i + 1 < r.positives.size(); ++i)
        CHECK(cosine(q, pool[r.positives[i]].embedding) >= cosine(q, pool[r.positives[i + 1]].embedding));
    for (auto idx : r.negatives) CHECK(pool[idx].labels[0] == 0);
    CHECK(chat.last_prompt.find("-> not inspiring") != std::string::npos);

    FakeChat no("not inspiring");
    CHECK(fewshot_llm_classify("query text", one_source, o, no, embed).label == 0);
    FakeChat junk("maybe?");
    CHECK_THROWS_AS(fewshot_llm_classify("query text", one_source, o, junk, embed), ClassificationError);

    FakeChat tight("inspiring", 60);
    const auto reduced = fewshot_llm_classify("query text", one_source, o, tight, embed);
    CHECK(reduced.k_used < 3);
    CHECK_FALSE(reduced.warnings.empty());

    // The label source is a pure function of seed and text.
    const auto s1 = fewshot_llm_classify("another", pool, o, chat, embed).label_source;
    CHECK(fewshot_llm_classify("another", pool, o, chat, embed).label_source == s1);
    o.k = 7;
    CHECK_THROWS_AS(fewshot_llm_classify("query text", one_source, o, chat, embed), ValidationError);
}

TEST_CASE("few-shot answers parse") {
    CHECK(parse_fewshot_answer("Inspiring") == 1);
    CHECK(parse_fewshot_answer("not inspiring.") == 0);
    CHECK(parse_fewshot_answer("Uninspiring") == 0);
    CHECK_FALSE(parse_fewshot_answer("unsure").has_value());
}
