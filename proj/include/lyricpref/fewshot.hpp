#pragma once

#include "lyricpref/errors.hpp"
#include "lyricpref/prompts.hpp"
#include "lyricpref/providers.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lyricpref {

// A labelled pool line. `labels` holds one 0/1 label per configured label
// source (annotator); a single-annotator pool has one entry.
struct FewshotExample {
    std::string text;
    EmbeddingVector embedding;
    std::vector<int> labels;
};

struct FewshotOptions {
    int k = 5;
    std::uint64_t seed = 0;
};

struct FewshotResult {
    int label = 0;
    int k_used = 0;
    std::size_t label_source = 0;
    std::vector<std::size_t> positives; // pool indices, nearest first
    std::vector<std::size_t> negatives;
    std::vector<std::string> warnings;
};

// Thrown when the chat answer is neither "inspiring" nor "not inspiring".
class ClassificationError : public ProviderError {
public:
    explicit ClassificationError(const std::string& what) : ProviderError(what, false) {}
};

// Parses a free-text answer; nullopt when it says neither label.
std::optional<int> parse_fewshot_answer(const std::string& answer);

// Rough prompt length in tokens (four characters per token).
std::size_t estimate_tokens(const std::string& text);

FewshotResult fewshot_llm_classify(const std::string& text, std::span<const FewshotExample> pool,
                                   const FewshotOptions& options, ChatModel& chat, Embedder& embedder,
                                   const PromptTemplate& prompt = PromptSet::shipped().fewshot);

} // namespace lyricpref
