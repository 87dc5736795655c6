#pragma once

// Value types and abstract interfaces for every external model the feature
// pipeline consults. Providers speak nats; conversion to bits happens in the
// feature layer.

#include "lyricpref/taxonomy.hpp"
#include "lyricpref/types.hpp"

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace lyricpref {

enum class Rubric { Imagery, Energy, Banality };

const char* to_string(Rubric r);

// Probability mass over the ratings 1..5, renormalized on construction.
class RatingDistribution {
public:
    // `mass[i]` is the (unnormalized, non-negative) mass of rating i+1.
    explicit RatingDistribution(const std::array<double, 5>& mass);

    double prob(int rating) const { return probs_.at(rating - 1); }
    const std::array<double, 5>& probs() const { return probs_; }

    // Sum over ratings of p(r) * r; always within [1,5].
    double expectation() const;

private:
    std::array<double, 5> probs_{};
};

struct EmotionPrediction {
    std::vector<std::pair<int, double>> top; // (taxonomy index, probability), k = 5
    bool renormalized = false;               // mass exceeded 1 and was rescaled

    double mass() const;
    // Throws ProviderError when size/distinctness/bounds are violated.
    void validate(const EmotionTaxonomy& taxonomy) const;
};

struct CategoryCounts {
    int dav = 0; // descriptive action verbs
    int iav = 0; // interpretative action verbs
    int sv = 0;  // state verbs
    int adj = 0; // adjectives

    int total() const { return dav + iav + sv + adj; }
};

struct TokenStepInfo {
    std::string token_text;
    std::size_t word_index = 0;
    double logprob_nats = 0.0; // log P(token | preceding tokens), <= 0
    // Entropy of the distribution this token was drawn from, i.e. the
    // next-token distribution given the preceding tokens, >= 0.
    double entropy_nats = 0.0;
    bool entropy_approximate = false; // estimated from top-k alternatives only
};

class EmbeddingVector {
public:
    // Normalizes to unit length; throws ProviderError on a zero vector.
    explicit EmbeddingVector(VectorXd values);

    const VectorXd& values() const { return values_; }
    Eigen::Index dimension() const { return values_.size(); }

private:
    VectorXd values_;
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class RubricScorer {
public:
    virtual ~RubricScorer() = default;
    virtual RatingDistribution score_rubric(const std::string& text, Rubric rubric) = 0;
    virtual std::string fingerprint() const = 0;
};

class EmotionClassifier {
public:
    virtual ~EmotionClassifier() = default;
    virtual EmotionPrediction classify_emotions(const std::string& text) = 0;
    virtual const EmotionTaxonomy& taxonomy() const = 0;
    virtual std::string fingerprint() const = 0;
};

class CategoryCounter {
public:
    virtual ~CategoryCounter() = default;
    virtual CategoryCounts count_categories(const std::string& text) = 0;
    virtual std::string fingerprint() const = 0;
};

class TokenModel {
public:
    virtual ~TokenModel() = default;
    virtual std::vector<TokenStepInfo> token_logprobs(const std::string& text) = 0;
    virtual std::string fingerprint() const = 0;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual EmbeddingVector embed(const std::string& text) = 0;
    virtual std::string fingerprint() const = 0;
};

class ChatModel {
public:
    virtual ~ChatModel() = default;
    virtual std::string complete(const std::string& prompt) = 0;
    // Approximate context window in tokens; 0 = unlimited.
    virtual std::size_t context_limit() const { return 0; }
    virtual std::string fingerprint() const = 0;
};

} // namespace lyricpref
