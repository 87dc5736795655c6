#include "lyricpref/features.hpp"

#include "lyricpref/errors.hpp"

#include <cmath>
#include <numbers>

namespace lyricpref {

const char* to_string(ValenceMode m) { return m == ValenceMode::Full ? "full" : "binary"; }

ValenceMode valence_mode_from_string(const std::string& s) {
    if (s == "full") return ValenceMode::Full;
    if (s == "binary") return ValenceMode::Binary;
    throw ValidationError("unknown valence mode '" + s + "' (expected full or binary)");
}

// --- corpus statistics -------------------------------------------------------

void CorpusStats::add_line(const std::vector<std::string>& words) {
    for (std::size_t i = 0; i < words.size(); ++i) {
        ++unigrams_[words[i]];
        ++total_;
        if (i + 1 < words.size()) ++bigrams_[{words[i], words[i + 1]}];
    }
}

long long CorpusStats::count(const std::string& word) const {
    auto it = unigrams_.find(word);
    return it == unigrams_.end() ? 0 : it->second;
}

long long CorpusStats::count(const std::string& first, const std::string& second) const {
    auto it = bigrams_.find({first, second});
    return it == bigrams_.end() ? 0 : it->second;
}

CorpusStats build_corpus_stats(std::span<const LyricLine> lines) {
    if (lines.empty()) throw FeatureError("cannot build corpus statistics from an empty corpus");
    CorpusStats stats;
    for (const auto& l : lines) stats.add_line(l.words);
    if (stats.total_tokens() == 0) throw FeatureError("corpus has no words");
    return stats;
}

double npmi(const CorpusStats& stats, const std::string& first, const std::string& second, NpmiDirection direction) {
    const double n = static_cast<double>(stats.total_tokens());
    const double cx = static_cast<double>(stats.count(first));
    const double cy = static_cast<double>(stats.count(second));
    if (cx == 0.0 || cy == 0.0) throw FeatureError("unseen word in pair ('" + first + "', '" + second + "')");
    double joint = static_cast<double>(stats.count(first, second));
    double joint_total = n;
    if (direction == NpmiDirection::Bi) {
        joint += static_cast<double>(stats.count(second, first));
        joint_total = 2.0 * n;
    }
    if (joint == 0.0) return -1.0;
    const double pxy = joint / joint_total;
    const double px = cx / n;
    const double py = cy / n;
    const double denom = -std::log(pxy);
    if (denom <= 0.0) return 1.0;
    return std::clamp(std::log(pxy / (px * py)) / denom, -1.0, 1.0);
}

VectorXd npmi_vector(const LyricLine& line, const CorpusStats& stats, NpmiDirection direction,
                     UnseenWordPolicy policy, bool* used_fallback) {
    const auto t = static_cast<Eigen::Index>(line.size());
    if (t == 0) throw FeatureError("line '" + line.id + "' has no words");
    if (used_fallback) *used_fallback = false;
    VectorXd out = VectorXd::Zero(t);
    if (t == 1) return out;
    for (Eigen::Index i = 0; i + 1 < t; ++i) {
        const auto& x = line.words[i];
        const auto& y = line.words[i + 1];
        if (!stats.contains(x) || !stats.contains(y)) {
            if (policy == UnseenWordPolicy::Error)
                throw FeatureError("line '" + line.id + "': word '" + (stats.contains(x) ? y : x) +
                                   "' is absent from the corpus statistics");
            out(i) = -1.0;
            if (used_fallback) *used_fallback = true;
            continue;
        }
        out(i) = npmi(stats, x, y, direction);
    }
    out(t - 1) = out.head(t - 1).mean();
    return out;
}

// --- provider-backed features -----------------------------------------------

namespace {

[[noreturn]] void rethrow_for_prefix(const LyricLine& line, std::size_t t, const char* feature) {
    const std::string where = std::string(feature) + " extraction failed for line '" + line.id + "' on prefix '" +
                              line.prefix(t) + "': ";
    try {
        throw;
    } catch (const ProviderError& e) {
        throw ProviderError(where + e.what(), e.retriable());
    } catch (const Error& e) {
        throw FeatureError(where + e.what());
    }
}

} // namespace

VectorXd rubric_prefix_vector(const LyricLine& line, Rubric rubric, RubricScorer& scorer) {
    VectorXd out(static_cast<Eigen::Index>(line.size()));
    for (std::size_t t = 1; t <= line.size(); ++t) {
        try {
            out(t - 1) = scorer.score_rubric(line.prefix(t), rubric).expectation();
        } catch (const Error&) {
            rethrow_for_prefix(line, t, to_string(rubric));
        }
    }
    return out;
}

double abstraction_score(const CategoryCounts& c) {
    const int total = c.total();
    if (total == 0) return 0.0;
    return static_cast<double>(c.dav + 2 * c.iav + 3 * c.sv + 4 * c.adj) / total;
}

VectorXd abstraction_vector(const LyricLine& line, CategoryCounter& counter) {
    VectorXd out(static_cast<Eigen::Index>(line.size()));
    for (std::size_t t = 1; t <= line.size(); ++t) {
        try {
            out(t - 1) = abstraction_score(counter.count_categories(line.prefix(t)));
        } catch (const Error&) {
            rethrow_for_prefix(line, t, "abstraction");
        }
    }
    return out;
}

VectorXd redistribute(const EmotionPrediction& prediction, const EmotionTaxonomy& taxonomy) {
    prediction.validate(taxonomy);
    const double mass = prediction.mass();
    if (mass > 1.0 + 1e-9)
        throw FeatureError("emotion probabilities sum to " + std::to_string(mass) + ", more than 1");
    const int m = taxonomy.size();
    const int k = static_cast<int>(prediction.top.size());
    const double remainder = std::max(0.0, 1.0 - mass) / (m - k);
    VectorXd full = VectorXd::Constant(m, remainder);
    for (const auto& [idx, p] : prediction.top) full(idx) = p;
    return full;
}

double binary_valence(const VectorXd& full, const EmotionTaxonomy& taxonomy) {
    double v = 0.0;
    for (int e = 0; e < taxonomy.size(); ++e) v += taxonomy.polarity(e) * full(e);
    return std::clamp(v, -1.0, 1.0);
}

MatrixXd valence_vector(const LyricLine& line, EmotionClassifier& classifier, ValenceMode mode) {
    const auto& taxonomy = classifier.taxonomy();
    const auto t_len = static_cast<Eigen::Index>(line.size());
    MatrixXd out(t_len, valence_width(mode, taxonomy.size()));
    for (std::size_t t = 1; t <= line.size(); ++t) {
        VectorXd full;
        try {
            full = redistribute(classifier.classify_emotions(line.prefix(t)), taxonomy);
        } catch (const Error&) {
            rethrow_for_prefix(line, t, "valence");
        }
        if (mode == ValenceMode::Full) out.row(t - 1) = full.transpose();
        else out(t - 1, 0) = binary_valence(full, taxonomy);
    }
    return out;
}

namespace {

struct WordTokens {
    std::vector<double> surprisal_bits;
    std::vector<double> entropy_bits;
};

std::vector<WordTokens> group_by_word(const std::vector<TokenStepInfo>& steps, std::size_t word_count) {
    std::vector<WordTokens> words(word_count);
    for (const auto& s : steps) {
        if (s.word_index >= word_count)
            throw FeatureError("token '" + s.token_text + "' aligned to word " + std::to_string(s.word_index) +
                               " of a " + std::to_string(word_count) + "-word line");
        words[s.word_index].surprisal_bits.push_back(-s.logprob_nats / std::numbers::ln2);
        words[s.word_index].entropy_bits.push_back(s.entropy_nats / std::numbers::ln2);
    }
    for (std::size_t w = 0; w < word_count; ++w) {
        if (words[w].surprisal_bits.empty())
            throw FeatureError("no tokens aligned to word " + std::to_string(w));
    }
    return words;
}

VectorXd with_mean(VectorXd per_word) {
    const auto t = per_word.size();
    VectorXd out(t + 1);
    out.head(t) = per_word;
    out(t) = per_word.mean();
    return out;
}

} // namespace

VectorXd surprisal_from_steps(const std::vector<TokenStepInfo>& steps, std::size_t word_count) {
    const auto words = group_by_word(steps, word_count);
    VectorXd per_word(static_cast<Eigen::Index>(word_count));
    for (std::size_t w = 0; w < word_count; ++w) {
        double s = 0.0;
        for (double v : words[w].surprisal_bits) s += v;
        per_word(w) = std::max(0.0, s);
    }
    return with_mean(std::move(per_word));
}

VectorXd entropy_from_steps(const std::vector<TokenStepInfo>& steps, std::size_t word_count) {
    const auto words = group_by_word(steps, word_count);
    VectorXd per_word(static_cast<Eigen::Index>(word_count));
    for (std::size_t w = 0; w < word_count; ++w) {
        double s = 0.0;
        for (double v : words[w].entropy_bits) s += v;
        per_word(w) = std::max(0.0, s / static_cast<double>(words[w].entropy_bits.size()));
    }
    return with_mean(std::move(per_word));
}

VectorXd surprisal_vector(const LyricLine& line, TokenModel& lm) {
    try {
        return surprisal_from_steps(lm.token_logprobs(line.text), line.size());
    } catch (const Error&) {
        rethrow_for_prefix(line, line.size(), "surprisal");
    }
}

VectorXd entropy_vector(const LyricLine& line, TokenModel& lm) {
    try {
        return entropy_from_steps(lm.token_logprobs(line.text), line.size());
    } catch (const Error&) {
        rethrow_for_prefix(line, line.size(), "entropy");
    }
}

// --- tensors -----------------------------------------------------------------

FeatureTensor assemble_tensor(const LyricLine& line, const LineFeatures& f, ValenceMode mode) {
    const auto t = static_cast<Eigen::Index>(line.size());
    auto expect = [&](const VectorXd& v, Eigen::Index len, const char* name) {
        if (v.size() != len)
            throw FeatureError(std::string("assembly: ") + name + " has length " + std::to_string(v.size()) +
                               ", expected " + std::to_string(len) + " for line '" + line.id + "'");
    };
    expect(f.imagery, t, "imagery");
    expect(f.energy, t, "energy");
    expect(f.abstraction, t, "abstraction");
    expect(f.surprisal, t + 1, "surprisal");
    expect(f.entropy, t + 1, "entropy");
    expect(f.npmi_uni, t, "npmi_uni");
    expect(f.npmi_bi, t, "npmi_bi");
    expect(f.banality, t, "banality");
    if (f.valence.rows() != t) throw FeatureError("assembly: valence rows do not match the line length");
    if (mode == ValenceMode::Binary && f.valence.cols() != 1)
        throw FeatureError("assembly: binary valence must have one column");
    if (mode == ValenceMode::Full && f.valence.cols() < 2)
        throw FeatureError("assembly: full valence needs one column per emotion");

    FeatureTensor tensor;
    tensor.line_id = line.id;
    tensor.valence_mode = mode;
    tensor.rows.resize(t + 1, kScalarColumns + f.valence.cols());
    auto body = tensor.rows.topRows(t);
    body.col(kImagery) = f.imagery;
    body.col(kEnergy) = f.energy;
    body.col(kAbstraction) = f.abstraction;
    body.col(kSurprisal) = f.surprisal.head(t);
    body.col(kEntropy) = f.entropy.head(t);
    body.col(kNpmiUni) = f.npmi_uni;
    body.col(kNpmiBi) = f.npmi_bi;
    body.col(kBanality) = f.banality;
    body.rightCols(f.valence.cols()) = f.valence;
    // The sentence-level surprisal/entropy entries and the npmi entry at row T
    // are all column means already, so the aggregate row is uniformly the
    // per-column mean.
    tensor.rows.row(t) = body.colwise().mean();
    return tensor;
}

MeanFeatures timestep_means(const FeatureTensor& tensor) {
    if (tensor.valence_mode != ValenceMode::Binary || tensor.width() != kScalarColumns + 1)
        throw FeatureError("timestep means need a binary-valence tensor");
    MeanFeatures m;
    const auto agg = tensor.aggregate();
    for (int c = 0; c < kMeanFeatureCount; ++c) m[c] = agg(0, c);
    return m;
}

void check_tensor_bounds(const FeatureTensor& tensor, double log2_vocab) {
    constexpr double tol = 1e-9;
    auto fail = [&](Eigen::Index r, int c, const char* why) {
        throw FeatureError("line '" + tensor.line_id + "' row " + std::to_string(r) + " column " +
                           std::to_string(c) + ": " + why + " (value " + std::to_string(tensor.rows(r, c)) + ")");
    };
    for (Eigen::Index r = 0; r < tensor.rows.rows(); ++r) {
        const bool timestep = r < tensor.timesteps();
        for (int c : {kImagery, kEnergy, kBanality}) {
            const double v = tensor.rows(r, c);
            if (timestep && v != 0.0 && (v < 1.0 - tol || v > 5.0 + tol)) fail(r, c, "rubric outside [1,5]");
        }
        const double a = tensor.rows(r, kAbstraction);
        if (timestep && a != 0.0 && (a < 1.0 - tol || a > 4.0 + tol)) fail(r, kAbstraction, "abstraction outside [1,4]");
        for (int c : {kNpmiUni, kNpmiBi}) {
            const double v = tensor.rows(r, c);
            if (v < -1.0 - tol || v > 1.0 + tol) fail(r, c, "npmi outside [-1,1]");
        }
        for (int c : {kSurprisal, kEntropy}) {
            if (tensor.rows(r, c) < -tol) fail(r, c, "negative information value");
        }
        if (log2_vocab > 0.0 && tensor.rows(r, kEntropy) > log2_vocab + tol) fail(r, kEntropy, "entropy above log2|V|");
        if (tensor.valence_mode == ValenceMode::Binary) {
            const double v = tensor.rows(r, kValence);
            if (v < -1.0 - tol || v > 1.0 + tol) fail(r, kValence, "binary valence outside [-1,1]");
        } else {
            const double s = tensor.rows.row(r).tail(tensor.width() - kScalarColumns).sum();
            if (std::abs(s - 1.0) > 1e-9) fail(r, kValence, "full valence row does not sum to 1");
        }
    }
}

} // namespace lyricpref
