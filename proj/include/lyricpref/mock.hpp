#pragma once

#include "lyricpref/prompts.hpp"
#include "lyricpref/providers.hpp"
#include "lyricpref/transport.hpp"

#include <atomic>
#include <cstdint>
#include <map>

namespace lyricpref {

// Language-model behaviour of the mock's /completions route.
enum class MockLm {
    Hashed,        // token-specific pseudo-random logprobs and entropies
    Uniform,       // every next-token distribution uniform over the vocabulary
    Deterministic, // realized token always has probability 1
};

struct MockOptions {
    std::uint64_t seed = 0;
    MockLm lm = MockLm::Hashed;
    int vocab_size = 50257;
    int chunk_chars = 5;     // words longer than this split into several tokens
    int embedding_dim = 64;
    bool exact_entropy = true; // include the "entropies" extension field
};

// Offline stand-in for a provider server. Answers the same JSON protocol as
// the HTTP endpoints; every response is a pure function of (options, request),
// so a full extraction run against it is bit-reproducible.
class MockTransport : public Transport {
public:
    explicit MockTransport(MockOptions options = {}, PromptSet prompts = PromptSet::shipped(),
                           const EmotionTaxonomy& taxonomy = EmotionTaxonomy::shipped());

    std::string post(const std::string& route, const nlohmann::json& payload) override;
    std::string provider_id() const override;

    std::size_t calls() const { return calls_.load(); }

    // The mock tokenizer: GPT-2 style pieces with a leading space on
    // word-initial tokens after the first word.
    std::vector<std::string> tokenize(const std::string& text) const;

private:
    std::string chat(const nlohmann::json& payload) const;
    std::string completions(const nlohmann::json& payload) const;
    std::string embeddings(const nlohmann::json& payload) const;

    std::string rubric_answer(const std::string& text, const std::string& rubric) const;
    std::string emotion_answer(const std::string& text) const;
    std::string category_answer(const std::string& text) const;
    std::string fewshot_answer(const std::string& text) const;

    std::uint64_t hash(const std::string& a, const std::string& b = {}) const;

    MockOptions options_;
    PromptSet prompts_;
    EmotionTaxonomy taxonomy_;
    std::atomic<std::size_t> calls_{0};
};

// Word-category lexicon used by the mock counter; unknown words fall back to
// a hashed assignment.
int mock_word_category(const std::string& word, std::uint64_t seed);

} // namespace lyricpref
