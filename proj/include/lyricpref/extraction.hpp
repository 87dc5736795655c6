#pragma once

#include "lyricpref/corpus.hpp"
#include "lyricpref/features.hpp"
#include "lyricpref/providers.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <set>

namespace lyricpref {

enum class FeatureFamily { Imagery, Energy, Abstraction, Surprisal, Entropy, Npmi, Banality, Valence };

// Parses "all" or a comma list such as "imagery,npmi,valence".
std::set<FeatureFamily> parse_feature_families(const std::string& spec);

struct ExtractionProviders {
    std::shared_ptr<RubricScorer> rubric;
    std::shared_ptr<EmotionClassifier> emotions;
    std::shared_ptr<CategoryCounter> categories;
    std::shared_ptr<TokenModel> tokens;
};

struct ExtractionOptions {
    ValenceMode valence_mode = ValenceMode::Binary;
    std::set<FeatureFamily> families = parse_feature_families("all");
    UnseenWordPolicy unseen = UnseenWordPolicy::Error;
    int jobs = 1;
    std::string timestamp; // written into every record
};

struct FeatureRecord {
    FeatureTensor tensor;
    std::string text;
    std::vector<std::string> flags; // e.g. "npmi_unseen_fallback", "approximate_entropy"
};

// Computes tensors for many lines. Lines are independent and processed on
// up to `jobs` threads; output order always follows the input.
class FeatureExtractor {
public:
    FeatureExtractor(ExtractionProviders providers, CorpusStats stats, ExtractionOptions options);

    FeatureRecord extract(const LyricLine& line) const;
    std::vector<FeatureRecord> extract_all(std::span<const LyricLine> lines) const;

    std::map<std::string, std::string> fingerprints() const;

private:
    ExtractionProviders providers_;
    CorpusStats stats_;
    ExtractionOptions options_;
};

std::vector<std::string> column_names(ValenceMode mode, const EmotionTaxonomy& taxonomy);

std::string feature_record_json(const FeatureRecord& record, const std::map<std::string, std::string>& fingerprints,
                                const std::string& timestamp);
FeatureRecord parse_feature_record(const std::string& json_line);

// Feature files hold one JSON record per line.
std::vector<FeatureRecord> load_feature_file(const std::filesystem::path& path);

// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

} // namespace lyricpref
