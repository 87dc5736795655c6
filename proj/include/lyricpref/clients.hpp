#pragma once

// Provider implementations that speak the chat-completions / completions /
// embeddings JSON protocol over a Transport (HTTP or the offline mock).

#include "lyricpref/prompts.hpp"
#include "lyricpref/providers.hpp"
#include "lyricpref/transport.hpp"

#include <atomic>
#include <memory>

namespace lyricpref {

struct ChatSettings {
    std::string model;
    int top_logprobs = 20;
    std::size_t context_limit = 0; // tokens, 0 = unlimited
};

class LlmRubricScorer : public RubricScorer {
public:
    LlmRubricScorer(std::shared_ptr<Transport> transport, ChatSettings settings, PromptSet prompts);

    RatingDistribution score_rubric(const std::string& text, Rubric rubric) override;
    std::string fingerprint() const override;

    // Reads the rating distribution out of a chat-completions response.
    static RatingDistribution parse_response(const std::string& body);

private:
    std::shared_ptr<Transport> transport_;
    ChatSettings settings_;
    PromptSet prompts_;
};

class LlmEmotionClassifier : public EmotionClassifier {
public:
    LlmEmotionClassifier(std::shared_ptr<Transport> transport, ChatSettings settings, PromptSet prompts,
                         EmotionTaxonomy taxonomy);

    EmotionPrediction classify_emotions(const std::string& text) override;
    const EmotionTaxonomy& taxonomy() const override { return taxonomy_; }
    std::string fingerprint() const override;

    static EmotionPrediction parse_response(const std::string& body, const EmotionTaxonomy& taxonomy);

private:
    std::shared_ptr<Transport> transport_;
    ChatSettings settings_;
    PromptSet prompts_;
    EmotionTaxonomy taxonomy_;
};

class LlmCategoryCounter : public CategoryCounter {
public:
    LlmCategoryCounter(std::shared_ptr<Transport> transport, ChatSettings settings, PromptSet prompts);

    CategoryCounts count_categories(const std::string& text) override;
    std::string fingerprint() const override;

    static CategoryCounts parse_response(const std::string& body, std::size_t word_count);

private:
    std::shared_ptr<Transport> transport_;
    ChatSettings settings_;
    PromptSet prompts_;
};

struct CompletionSettings {
    std::string model;
    int top_logprobs = 5;
    // Prepended to every text so the first real token has a logprob.
    std::string bos = "<|endoftext|>";
    // Without an exact "entropies" field in the response, estimate entropy
    // from the top-k alternatives (flagged) instead of failing.
    bool allow_topk_entropy = false;
};

// Token surprisal/entropy via an echoing completions endpoint.
class CompletionsTokenModel : public TokenModel {
public:
    CompletionsTokenModel(std::shared_ptr<Transport> transport, CompletionSettings settings);

    std::vector<TokenStepInfo> token_logprobs(const std::string& text) override;
    std::string fingerprint() const override;

    static std::vector<TokenStepInfo> parse_response(const std::string& body, const std::string& text,
                                                     const CompletionSettings& settings);

private:
    std::shared_ptr<Transport> transport_;
    CompletionSettings settings_;
};

struct EmbeddingSettings {
    std::string model;
    Eigen::Index dimension = 0; // 0 = fixed by the first response
};

class EmbeddingsClient : public Embedder {
public:
    EmbeddingsClient(std::shared_ptr<Transport> transport, EmbeddingSettings settings);

    EmbeddingVector embed(const std::string& text) override;
    std::string fingerprint() const override;

private:
    std::shared_ptr<Transport> transport_;
    EmbeddingSettings settings_;
    std::atomic<Eigen::Index> locked_dimension_;
};

class ChatClient : public ChatModel {
public:
    ChatClient(std::shared_ptr<Transport> transport, ChatSettings settings);

    std::string complete(const std::string& prompt) override;
    std::size_t context_limit() const override { return settings_.context_limit; }
    std::string fingerprint() const override;

private:
    std::shared_ptr<Transport> transport_;
    ChatSettings settings_;
};

// Maps each token (by character offset into `text`) to the whitespace word
// it belongs to. Returns nullopt for tokens that cannot be aligned.
std::optional<std::size_t> word_for_offset(const std::string& text, std::size_t offset, const std::string& token);

} // namespace lyricpref
