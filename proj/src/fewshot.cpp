#include "lyricpref/fewshot.hpp"

#include "lyricpref/errors.hpp"
#include "lyricpref/rng.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

namespace lyricpref {

std::optional<int> parse_fewshot_answer(const std::string& answer) {
    std::string s;
    for (unsigned char c : answer) s += static_cast<char>(std::tolower(c));
    std::replace_if(s.begin(), s.end(), [](unsigned char c) { return !std::isalpha(c); }, ' ');
    if (s.find("not inspiring") != std::string::npos || s.find("uninspiring") != std::string::npos) return 0;
    if (s.find("inspiring") != std::string::npos) return 1;
    return std::nullopt;
}

std::size_t estimate_tokens(const std::string& text) { return (text.size() + 3) / 4; }

namespace {

std::string render_examples(std::span<const FewshotExample> pool, const std::vector<std::size_t>& pos,
                            const std::vector<std::size_t>& neg, std::size_t k) {
    // Alternate positives and negatives so neither class sits at the end.
    std::string out;
    for (std::size_t r = 0; r < k; ++r) {
        out += "\"" + pool[pos[r]].text + "\" -> inspiring\n";
        out += "\"" + pool[neg[r]].text + "\" -> not inspiring\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

} // namespace

FewshotResult fewshot_llm_classify(const std::string& text, std::span<const FewshotExample> pool,
                                   const FewshotOptions& options, ChatModel& chat, Embedder& embedder,
                                   const PromptTemplate& prompt) {
    if (options.k < 1) throw ConfigError("few-shot k must be >= 1");
    if (pool.empty()) throw ValidationError("few-shot pool is empty");
    const std::size_t sources = pool.front().labels.size();
    if (sources == 0) throw ValidationError("few-shot pool carries no labels");
    for (const auto& ex : pool) {
        if (ex.labels.size() != sources) throw ValidationError("few-shot pool entries disagree on label sources");
    }

    FewshotResult result;
    result.label_source = sources == 1 ? 0 : static_cast<std::size_t>(derive_seed(options.seed, stable_hash(text)) % sources);

    const EmbeddingVector query = embedder.embed(text);
    std::vector<double> sim(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) sim[i] = cosine(query, pool[i].embedding);

    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < pool.size(); ++i) (pool[i].labels[result.label_source] ? pos : neg).push_back(i);
    const auto k = static_cast<std::size_t>(options.k);
    if (pos.size() < k || neg.size() < k)
        throw ValidationError("few-shot pool needs at least " + std::to_string(k) + " lines of each class (has " +
                              std::to_string(pos.size()) + " inspiring, " + std::to_string(neg.size()) + " not)");
    auto nearest_first = [&](std::size_t a, std::size_t b) { return sim[a] != sim[b] ? sim[a] > sim[b] : a < b; };
    std::partial_sort(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(k), pos.end(), nearest_first);
    std::partial_sort(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(k), neg.end(), nearest_first);

    std::size_t used = k;
    std::string rendered = prompt.render({{"examples", render_examples(pool, pos, neg, used)}, {"text", text}});
    const std::size_t limit = chat.context_limit();
    if (limit > 0) {
        while (used > 1 && estimate_tokens(rendered) > limit) {
            --used;
            rendered = prompt.render({{"examples", render_examples(pool, pos, neg, used)}, {"text", text}});
        }
        if (used < k)
            result.warnings.push_back("prompt exceeded the context limit of " + std::to_string(limit) +
                                      " tokens; k reduced from " + std::to_string(k) + " to " + std::to_string(used));
    }
    result.k_used = static_cast<int>(used);
    result.positives.assign(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(used));
    result.negatives.assign(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(used));

    const std::string answer = chat.complete(rendered);
    const auto label = parse_fewshot_answer(answer);
    if (!label) throw ClassificationError("unparseable few-shot answer: \"" + answer.substr(0, 80) + "\"");
    result.label = *label;
    return result;
}

} // namespace lyricpref
