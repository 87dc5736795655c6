#include "doctest.h"

#include "lyricpref/corpus.hpp"
#include "lyricpref/errors.hpp"

#include "../support.hpp"

#include <set>

using namespace lyricpref;
using lyricpref::testing::TempDir;
using lyricpref::testing::write_file;

TEST_CASE("lines are lowercased and split on whitespace") {
    const auto line = LyricLine::from_raw("x", "  I  Walk\tALONE  ");
    CHECK(line.text == "i walk alone");
    CHECK(line.words == std::vector<std::string>{"i", "walk", "alone"});
    CHECK(line.prefix(2) == "i walk");
    CHECK_THROWS(line.prefix(0));
    CHECK_THROWS(line.prefix(4));
}

TEST_CASE("ratings are min-max scaled and thresholded at one half") {
    const auto labels = normalize_ratings({1, 5, 6, 10});
    // (r - 1) / 9 >= 0.5 holds from r = 5.5 upwards
    CHECK(labels == std::vector<Label>{Label::NotInspiring, Label::NotInspiring, Label::Inspiring, Label::Inspiring});
    // exact tie at the threshold is inspiring
    CHECK(normalize_ratings({1, 2, 3})[1] == Label::Inspiring);
    CHECK_THROWS_AS(normalize_ratings({4, 4, 4}), ValidationError);
}

TEST_CASE("JSONL and CSV datasets load to the same labels") {
    TempDir dir("corpus");
    write_file(dir / "d.jsonl",
               "{\"id\":\"a\",\"text\":\"Fire in the sky\",\"A1\":\"inspiring\",\"A2_rating\":9}\n"
               "{\"id\":\"b\",\"text\":\"the road home\",\"A1\":\"not_inspiring\",\"A2_rating\":2}\n"
               "\n"
               "{\"id\":\"c\",\"text\":\"cold, blue \\\"river\\\"\",\"A1\":\"inspiring\",\"A2_rating\":4}\n");
    write_file(dir / "d.csv",
               "id,text,A1,A2_rating\n"
               "a,Fire in the sky,inspiring,9\n"
               "b,the road home,not_inspiring,2\n"
               "c,\"cold, blue \"\"river\"\"\",inspiring,4\n");
    const auto j = load_dataset(dir / "d.jsonl");
    const auto c = load_dataset(dir / "d.csv");
    CHECK(j.size() == 3);
    CHECK(j.annotators == std::vector<std::string>{"A1", "A2"});
    CHECK(j.labels("A1") == Labels{1, 0, 1});
    // ratings 9, 2, 4 scale to 1, 0, 2/7
    CHECK(j.labels("A2") == Labels{1, 0, 0});
    CHECK(c.labels("A1") == j.labels("A1"));
    CHECK(c.labels("A2") == j.labels("A2"));
    CHECK(c.lines[2].text == j.lines[2].text);
    CHECK(j.annotations.at("A2")[0].raw_rating == 9);

    // Canonical output reloads to the same dataset.
    write_file(dir / "canon.jsonl", to_canonical_jsonl(j));
    const auto again = load_dataset(dir / "canon.jsonl");
    CHECK(to_canonical_jsonl(again) == to_canonical_jsonl(j));
}

TEST_CASE("malformed datasets are rejected") {
    TempDir dir("corpus-bad");
    auto load = [&](const std::string& text) {
        write_file(dir / "x.jsonl", text);
        return load_dataset(dir / "x.jsonl");
    };
    CHECK_THROWS_AS(load("{\"id\":\"a\",\"text\":\"x\",\"A1\":\"maybe\"}\n"), ParseError);
    CHECK_THROWS_AS(load("{\"id\":\"a\",\"text\":\"x\",\"A1\":11}\n"), ParseError);
    CHECK_THROWS_AS(load("{\"id\":\"a\",\"text\":\"x\"}\n"), ParseError);
    CHECK_THROWS_AS(load("{\"id\":\"a\",\"text\":\"   \",\"A1\":\"inspiring\"}\n"), ParseError);
    CHECK_THROWS_AS(load("not json\n"), ParseError);
    CHECK_THROWS_AS(load("{\"id\":\"a\",\"text\":\"x\",\"A1\":\"inspiring\"}\n"
                         "{\"id\":\"a\",\"text\":\"y\",\"A1\":\"inspiring\"}\n"),
                    ValidationError);
    CHECK_THROWS_AS(load("{\"id\":\"a\",\"text\":\"x\",\"A1\":\"inspiring\"}\n"
                         "{\"id\":\"b\",\"text\":\"y\",\"A2\":\"inspiring\"}\n"),
                    ValidationError);
    CHECK_THROWS_AS(load_dataset(dir / "missing.jsonl"), ValidationError);
}

TEST_CASE("stratified split keeps class proportions and partitions the data") {
    Rng rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 20 + rng.index(300);
        Labels y(n);
        for (auto& v : y) v = rng.bernoulli(0.1 + 0.8 * rng.uniform());
        const auto pos = std::count(y.begin(), y.end(), 1);
        if (pos < 2 || static_cast<std::size_t>(pos) > n - 2) continue;
        const double tf = trial % 2 ? 0.2 : 0.25;
        const auto plan = stratified_split(y, tf, rng.next());
        std::set<std::size_t> all(plan.train_indices.begin(), plan.train_indices.end());
        for (auto i : plan.test_indices) CHECK(all.insert(i).second);
        CHECK(all.size() == n);
        long long test_pos = 0;
        for (auto i : plan.test_indices) test_pos += y[i];
        const double expected_pos = tf * static_cast<double>(pos);
        CHECK(std::abs(static_cast<double>(test_pos) - expected_pos) <= 1.0);
        CHECK(std::abs(static_cast<double>(plan.test_indices.size()) - tf * static_cast<double>(n)) <= 2.0);
    }
    CHECK_THROWS_AS(stratified_split(Labels{1, 0, 0, 0}, 0.2, 1), ValidationError);
    CHECK_THROWS_AS(stratified_split(Labels{1, 1, 0, 0}, 1.0, 1), ValidationError);
}

TEST_CASE("kfold partitions indices into balanced disjoint folds") {
    std::vector<std::size_t> idx;
    Labels y;
    for (std::size_t i = 0; i < 53; ++i) {
        idx.push_back(3 * i + 1);
        y.push_back(i % 3 == 0);
    }
    const auto folds = kfold(idx, y, 5, 99);
    REQUIRE(folds.size() == 5);
    std::set<std::size_t> seen;
    std::size_t lo = idx.size(), hi = 0;
    for (const auto& f : folds) {
        lo = std::min(lo, f.size());
        hi = std::max(hi, f.size());
        for (auto i : f) CHECK(seen.insert(i).second);
    }
    CHECK(seen == std::set<std::size_t>(idx.begin(), idx.end()));
    CHECK(hi - lo <= 1);
    CHECK(kfold(idx, y, 5, 99) == folds);
    CHECK_THROWS_AS(kfold(idx, y, 1, 0), ValidationError);
}

TEST_CASE("agreement matrix counts matching labels") {
    TempDir dir("agree");
    write_file(dir / "d.jsonl",
               "{\"id\":\"1\",\"text\":\"a\",\"A\":\"inspiring\",\"B\":\"inspiring\",\"C\":\"not_inspiring\"}\n"
               "{\"id\":\"2\",\"text\":\"b\",\"A\":\"inspiring\",\"B\":\"not_inspiring\",\"C\":\"not_inspiring\"}\n"
               "{\"id\":\"3\",\"text\":\"c\",\"A\":\"not_inspiring\",\"B\":\"not_inspiring\",\"C\":\"inspiring\"}\n"
               "{\"id\":\"4\",\"text\":\"d\",\"A\":\"not_inspiring\",\"B\":\"not_inspiring\",\"C\":\"not_inspiring\"}\n");
    const auto d = load_dataset(dir / "d.jsonl");
    const auto m = pairwise_agreement(d);
    CHECK(m(0, 0) == 100.0);
    CHECK(m(0, 1) == 75.0);
    CHECK(m(1, 0) == 75.0);
    CHECK(m(0, 2) == 25.0);
    CHECK(m(1, 2) == 50.0);
    const auto csv = agreement_csv(d, m);
    CHECK(csv.rfind("annotator,A,B,C\n", 0) == 0);
    CHECK(csv.find("A,100.0,75.0,25.0\n") != std::string::npos);
}
