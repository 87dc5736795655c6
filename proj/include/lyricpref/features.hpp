#pragma once

#include "lyricpref/corpus.hpp"
#include "lyricpref/providers.hpp"
#include "lyricpref/types.hpp"

#include <array>
#include <map>
#include <span>
#include <string>
#include <unordered_map>

namespace lyricpref {

// Fixed column order of a feature tensor. Valence occupies the trailing
// block: one column in binary mode, one per emotion in full mode.
enum Column : int {
    kImagery = 0,
    kEnergy,
    kAbstraction,
    kSurprisal,
    kEntropy,
    kNpmiUni,
    kNpmiBi,
    kBanality,
    kValence,
};

inline constexpr int kScalarColumns = 8;
inline constexpr int kMeanFeatureCount = 9;

inline constexpr std::array<const char*, kMeanFeatureCount> kFeatureNames = {
    "imagery", "energy", "abstraction", "surprisal", "entropy", "npmi_uni", "npmi_bi", "banality", "valence"};

enum class ValenceMode { Full, Binary };

const char* to_string(ValenceMode m);
ValenceMode valence_mode_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Corpus statistics and NPMI

class CorpusStats {
public:
    CorpusStats() = default;

    // Counts the words of one line; bigrams never cross line boundaries.
    void add_line(const std::vector<std::string>& words);

    long long count(const std::string& word) const;
    // Ordered count: `second` immediately follows `first`.
    long long count(const std::string& first, const std::string& second) const;
    long long total_tokens() const { return total_; }

    bool contains(const std::string& word) const { return unigrams_.count(word) > 0; }
    const std::unordered_map<std::string, long long>& unigrams() const { return unigrams_; }
    const std::map<std::pair<std::string, std::string>, long long>& bigrams() const { return bigrams_; }

private:
    std::unordered_map<std::string, long long> unigrams_;
    std::map<std::pair<std::string, std::string>, long long> bigrams_;
    long long total_ = 0;
};

CorpusStats build_corpus_stats(std::span<const LyricLine> lines);

enum class NpmiDirection { Uni, Bi };
enum class UnseenWordPolicy { Error, MinusOne };

// Normalized PMI of `first` followed by `second`. Probabilities share the
// unigram total N as denominator. Bidirectional joint probability is the mean
// of the two ordered estimates, (c(x,y) + c(y,x)) / 2N. A pair that never
// co-occurs scores -1.
double npmi(const CorpusStats& stats, const std::string& first, const std::string& second, NpmiDirection direction);

// Entries 1..T-1 score adjacent pairs; entry T is their mean. A one-word
// line yields [0]. `used_fallback` is set when an unseen word was scored -1.
VectorXd npmi_vector(const LyricLine& line, const CorpusStats& stats, NpmiDirection direction,
                     UnseenWordPolicy policy = UnseenWordPolicy::Error, bool* used_fallback = nullptr);

// ---------------------------------------------------------------------------
// Provider-backed prefix features

// Entry t is the expected rubric rating of the first t words.
VectorXd rubric_prefix_vector(const LyricLine& line, Rubric rubric, RubricScorer& scorer);

// (D + 2I + 3S + 4A) / (D + I + S + A); 0 when nothing is categorized.
double abstraction_score(const CategoryCounts& counts);
VectorXd abstraction_vector(const LyricLine& line, CategoryCounter& counter);

// Expands a top-k prediction over the whole taxonomy: the top-k keep their
// probabilities, every other label gets an equal share of the leftover mass.
VectorXd redistribute(const EmotionPrediction& prediction, const EmotionTaxonomy& taxonomy);
// Polarity-weighted sum of a full distribution, in [-1, 1].
double binary_valence(const VectorXd& full, const EmotionTaxonomy& taxonomy);

// T x m (full) or T x 1 (binary).
MatrixXd valence_vector(const LyricLine& line, EmotionClassifier& classifier, ValenceMode mode);

// Word-level surprisal in bits: a word's token surprisals summed. Entry T+1
// is the mean over words.
VectorXd surprisal_from_steps(const std::vector<TokenStepInfo>& steps, std::size_t word_count);
// Word-level entropy in bits: mean over the word's token positions. Entry
// T+1 is the mean over words.
VectorXd entropy_from_steps(const std::vector<TokenStepInfo>& steps, std::size_t word_count);

VectorXd surprisal_vector(const LyricLine& line, TokenModel& lm);
VectorXd entropy_vector(const LyricLine& line, TokenModel& lm);

// ---------------------------------------------------------------------------
// Tensors

template <typename Scalar>
struct BasicFeatureTensor {
    std::string line_id;
    ValenceMode valence_mode = ValenceMode::Binary;
    // T timestep rows followed by one aggregate row of column means.
    Matrix<Scalar> rows;

    Eigen::Index timesteps() const { return rows.rows() - 1; }
    Eigen::Index width() const { return rows.cols(); }

    auto timestep_rows() const { return rows.topRows(timesteps()); }
    auto aggregate() const { return rows.bottomRows(1); }
};

using FeatureTensor = BasicFeatureTensor<double>;

inline int valence_width(ValenceMode mode, int emotions) { return mode == ValenceMode::Full ? emotions : 1; }

// Per-family vectors for one line, at the lengths the feature definitions give.
struct LineFeatures {
    VectorXd imagery;     // T
    VectorXd energy;      // T
    VectorXd abstraction; // T
    VectorXd surprisal;   // T + 1
    VectorXd entropy;     // T + 1
    VectorXd npmi_uni;    // T
    VectorXd npmi_bi;     // T
    VectorXd banality;    // T
    MatrixXd valence;     // T x (1 | m)
};

FeatureTensor assemble_tensor(const LyricLine& line, const LineFeatures& features, ValenceMode mode);

// Zero-pads the timestep rows to `max_len`, concatenates row-major and
// appends the aggregate row: width (max_len + 1) * F.
template <typename Scalar>
Vector<Scalar> flatten_tensor(const BasicFeatureTensor<Scalar>& tensor, Eigen::Index max_len);

struct MeanFeatures {
    std::array<double, kMeanFeatureCount> values{}; // column order, valence last

    double operator[](int i) const { return values[static_cast<std::size_t>(i)]; }
    double& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
    VectorXd as_vector() const { return Eigen::Map<const VectorXd>(values.data(), kMeanFeatureCount); }
};

// Read from the aggregate row; binary-valence tensors only.
MeanFeatures timestep_means(const FeatureTensor& tensor);

// Checks the documented column bounds; throws FeatureError naming the cell.
void check_tensor_bounds(const FeatureTensor& tensor, double log2_vocab = 0.0);

} // namespace lyricpref

#include "lyricpref/features_impl.hpp"
