#pragma once

#include "lyricpref/types.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lyricpref {

struct LyricLine {
    std::string id;
    std::string text;               // lowercase, words joined by single spaces
    std::vector<std::string> words; // whitespace tokens, never empty

    // Builds a line from raw text: lowercases and splits on whitespace.
    static LyricLine from_raw(std::string id, const std::string& raw_text);

    std::size_t size() const { return words.size(); }

    // Text of the first `t` words (1 <= t <= size()).
    std::string prefix(std::size_t t) const;
};

struct Annotation {
    std::string annotator_id;
    std::optional<int> raw_rating; // 1..10 when the annotator gave a rating
    Label label = Label::NotInspiring;
};

struct Dataset {
    std::vector<LyricLine> lines;
    std::vector<std::string> annotators; // first-seen order
    std::map<std::string, std::vector<Annotation>> annotations;

    std::size_t size() const { return lines.size(); }
    bool has_annotator(const std::string& id) const { return annotations.count(id) > 0; }

    // 0/1 labels for one annotator aligned with `lines`.
    Labels labels(const std::string& annotator) const;

    // Throws ValidationError when an invariant is broken.
    void validate() const;
};

enum class DatasetFormat { Jsonl, Csv };

DatasetFormat format_from_path(const std::filesystem::path& path);

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
Dataset load_dataset(const std::filesystem::path& path);

// Canonical JSONL: one record per line, annotator fields carry labels (and
// the raw rating under "<id>_rating" when one was given).
std::string to_canonical_jsonl(const Dataset& dataset);

// Min-max scales ratings onto [0,1]; a scaled value >= threshold is inspiring.
std::vector<Label> normalize_ratings(const std::vector<int>& ratings, double threshold = 0.5);

struct SplitPlan {
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
    std::vector<std::vector<std::size_t>> folds; // optional, over train_indices
    std::uint64_t seed = 0;
};

SplitPlan stratified_split(const Labels& labels, double test_fraction, std::uint64_t seed);
SplitPlan stratified_split(const Dataset& dataset, const std::string& annotator,
                           double test_fraction, std::uint64_t seed);

// Stratified k-fold partition of `indices`; `labels` is aligned to `indices`.
std::vector<std::vector<std::size_t>> kfold(const std::vector<std::size_t>& indices,
                                            const Labels& labels, int k, std::uint64_t seed);

// Percent agreement between every annotator pair, rows/cols in
// dataset.annotators order.
MatrixXd pairwise_agreement(const Dataset& dataset);

std::string agreement_csv(const Dataset& dataset, const MatrixXd& agreement);

} // namespace lyricpref
