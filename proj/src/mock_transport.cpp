#include "lyricpref/mock.hpp"

#include "lyricpref/errors.hpp"
#include "lyricpref/rng.hpp"

#include <cmath>
#include <sstream>

namespace lyricpref {

using nlohmann::json;

namespace {

double unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

json chat_reply(const std::string& content, json logprob_content = nullptr) {
    json choice = {{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}, {"finish_reason", "stop"}};
    if (!logprob_content.is_null()) choice["logprobs"] = {{"content", std::move(logprob_content)}};
    return {{"object", "chat.completion"}, {"choices", json::array({choice})}};
}

std::string word_list(const std::string& text, std::vector<std::string>& out) {
    std::istringstream in(text);
    for (std::string w; in >> w;) out.push_back(w);
    return text;
}

} // namespace

int mock_word_category(const std::string& word, std::uint64_t seed) {
    static const std::map<std::string, int> lexicon = {
        {"eating", 1},  {"walking", 1}, {"running", 1}, {"hit", 1},     {"kiss", 1},    {"drown", 1},
        {"helping", 2}, {"playing", 2}, {"deny", 2},    {"cheat", 2},   {"help", 2},    {"hurt", 2},
        {"love", 3},    {"admire", 3},  {"hate", 3},    {"know", 3},    {"remember", 3}, {"believe", 3},
        {"ethical", 4}, {"uneven", 4},  {"red", 4},     {"lost", 4},    {"pure", 4},    {"greatest", 4},
        {"the", 0},     {"a", 0},       {"of", 0},      {"to", 0},      {"and", 0},     {"in", 0},
        {"is", 0},      {"you", 0},     {"i", 0},       {"all", 0},     {"this", 0},    {"world", 0},
    };
    if (auto it = lexicon.find(word); it != lexicon.end()) return it->second;
    const auto h = derive_seed(seed, stable_hash(word));
    // Roughly half of unknown words are uncategorized.
    const auto bucket = h % 10;
    return bucket < 5 ? 0 : static_cast<int>(1 + (bucket - 5) % 4);
}

MockTransport::MockTransport(MockOptions options, PromptSet prompts, const EmotionTaxonomy& taxonomy)
    : options_(options), prompts_(std::move(prompts)), taxonomy_(taxonomy) {
    if (options_.vocab_size < 2) throw ConfigError("mock vocabulary needs at least two entries");
    if (options_.chunk_chars < 1) throw ConfigError("mock chunk size must be positive");
}

std::string MockTransport::provider_id() const {
    std::ostringstream id;
    id << "mock:seed=" << options_.seed << ":lm=" << static_cast<int>(options_.lm) << ":vocab=" << options_.vocab_size
       << ":chunk=" << options_.chunk_chars << ":dim=" << options_.embedding_dim
       << ":exact=" << options_.exact_entropy;
    return id.str();
}

std::uint64_t MockTransport::hash(const std::string& a, const std::string& b) const {
    return derive_seed(options_.seed, stable_hash(b, stable_hash(a) ^ 0x5bd1e995ULL));
}

std::string MockTransport::post(const std::string& route, const json& payload) {
    ++calls_;
    if (route == "/chat/completions") return chat(payload);
    if (route == "/completions") return completions(payload);
    if (route == "/embeddings") return embeddings(payload);
    throw ProviderError("mock: unknown route " + route);
}

std::string MockTransport::chat(const json& payload) const {
    std::string content;
    try {
        content = payload.at("messages").back().at("content").get<std::string>();
    } catch (const json::exception&) {
        throw ProviderError("mock: malformed chat request");
    }
    if (auto t = prompts_.imagery.extract(content, "text")) return rubric_answer(*t, "imagery");
    if (auto t = prompts_.energy.extract(content, "text")) return rubric_answer(*t, "energy");
    if (auto t = prompts_.banality.extract(content, "text")) return rubric_answer(*t, "banality");
    if (auto t = prompts_.emotions.extract(content, "text")) return emotion_answer(*t);
    if (auto t = prompts_.categories.extract(content, "text")) return category_answer(*t);
    if (auto t = prompts_.fewshot.extract(content, "text")) return fewshot_answer(*t);
    throw ProviderError("mock: prompt does not match any known template");
}

std::string MockTransport::rubric_answer(const std::string& text, const std::string& rubric) const {
    // Center of mass drifts with the text; a softmax around it gives the
    // five rating logprobs.
    const double center = 1.0 + 4.0 * unit(hash(rubric, text));
    const double sharp = 0.8 + 1.5 * unit(hash(rubric + "/sharp", text));
    std::array<double, 5> logit{};
    double z = 0.0;
    for (int r = 1; r <= 5; ++r) {
        logit[r - 1] = -sharp * (r - center) * (r - center);
        z += std::exp(logit[r - 1]);
    }
    // 2% of the mass goes to a non-rating token so parsers must filter.
    const double scale = 0.98 / z;
    json top = json::array();
    int best = 1;
    for (int r = 1; r <= 5; ++r) {
        if (logit[r - 1] > logit[best - 1]) best = r;
        top.push_back({{"token", std::to_string(r)}, {"logprob", std::log(scale * std::exp(logit[r - 1]))}});
    }
    top.push_back({{"token", "Rating"}, {"logprob", std::log(0.02)}});
    json position = {{"token", std::to_string(best)},
                     {"logprob", top[best - 1]["logprob"]},
                     {"top_logprobs", top}};
    return chat_reply(std::to_string(best), json::array({position})).dump();
}

std::string MockTransport::emotion_answer(const std::string& text) const {
    const int m = taxonomy_.size();
    std::vector<int> chosen;
    Rng rng(hash("emotions", text));
    while (static_cast<int>(chosen.size()) < EmotionTaxonomy::kTopK) {
        const int idx = static_cast<int>(rng.index(m));
        if (std::find(chosen.begin(), chosen.end(), idx) == chosen.end()) chosen.push_back(idx);
    }
    const double total = 0.7 + 0.3 * rng.uniform();
    std::vector<double> w(chosen.size());
    double ws = 0.0;
    for (auto& v : w) {
        v = -std::log(1.0 - rng.uniform()); // exponential weights: flat Dirichlet
        ws += v;
    }
    json list = json::array();
    for (std::size_t i = 0; i < chosen.size(); ++i) {
        // Quantize so the JSON text is short and stable.
        const double p = std::floor(1e6 * total * w[i] / ws) / 1e6;
        list.push_back({{"label", taxonomy_.label(chosen[i])}, {"probability", p}});
    }
    return chat_reply(json{{"emotions", list}}.dump()).dump();
}

std::string MockTransport::category_answer(const std::string& text) const {
    std::vector<std::string> words;
    word_list(text, words);
    int counts[5] = {0, 0, 0, 0, 0};
    for (const auto& w : words) ++counts[mock_word_category(w, options_.seed)];
    json answer = {{"dav", counts[1]}, {"iav", counts[2]}, {"sv", counts[3]}, {"adj", counts[4]}};
    return chat_reply(answer.dump()).dump();
}

std::string MockTransport::fewshot_answer(const std::string& text) const {
    return chat_reply(unit(hash("fewshot", text)) < 0.5 ? "inspiring" : "not inspiring").dump();
}

std::vector<std::string> MockTransport::tokenize(const std::string& text) const {
    std::vector<std::string> words;
    word_list(text, words);
    std::vector<std::string> tokens;
    const auto chunk = static_cast<std::size_t>(options_.chunk_chars);
    for (std::size_t w = 0; w < words.size(); ++w) {
        const auto& word = words[w];
        for (std::size_t pos = 0; pos < word.size(); pos += chunk) {
            std::string piece = word.substr(pos, chunk);
            if (pos == 0 && w > 0) piece = " " + piece;
            tokens.push_back(std::move(piece));
        }
    }
    return tokens;
}

std::string MockTransport::completions(const json& payload) const {
    std::string prompt;
    try {
        prompt = payload.at("prompt").get<std::string>();
    } catch (const json::exception&) {
        throw ProviderError("mock: malformed completions request");
    }
    const std::string bos = "<|endoftext|>";
    std::string text = prompt;
    std::vector<std::string> tokens;
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    if (prompt.rfind(bos, 0) == 0) {
        tokens.push_back(bos);
        offsets.push_back(0);
        text = prompt.substr(bos.size());
        offset = bos.size();
    }
    // Mock text is single-spaced, so token texts concatenate back to it.
    for (auto& t : tokenize(text)) {
        offsets.push_back(offset);
        offset += t.size();
        tokens.push_back(std::move(t));
    }

    const double log_v = std::log(static_cast<double>(options_.vocab_size));
    json lps = json::array();
    json ents = json::array();
    json tops = json::array();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i == 0 && tokens[0] == bos) {
            lps.push_back(nullptr);
            ents.push_back(nullptr);
            tops.push_back(nullptr);
            continue;
        }
        const std::string& prev = i == 0 ? std::string{} : tokens[i - 1];
        double lp = 0.0;
        double h = 0.0;
        json top = json::object();
        switch (options_.lm) {
        case MockLm::Uniform:
            lp = -log_v;
            h = log_v;
            top[tokens[i]] = lp;
            for (int k = 1; k < 5; ++k) top["<alt" + std::to_string(k) + ">"] = lp;
            break;
        case MockLm::Deterministic:
            lp = 0.0;
            h = 0.0;
            top[tokens[i]] = 0.0;
            break;
        case MockLm::Hashed: {
            const double u = unit(hash(prev, tokens[i]));
            lp = -(0.5 + 11.0 * u);
            h = std::min(log_v, 0.5 + 7.0 * unit(hash("H" + prev, tokens[i])));
            top[tokens[i]] = lp;
            // Alternatives share no more than the mass the realized token left.
            const double rest = std::max(1e-12, 1.0 - std::exp(lp));
            for (int k = 1; k < 5; ++k) top["<alt" + std::to_string(k) + ">"] = std::log(rest / (k + 2.5));
            break;
        }
        }
        lps.push_back(lp);
        ents.push_back(h);
        tops.push_back(top);
    }
    json logprobs = {{"tokens", tokens}, {"token_logprobs", lps}, {"top_logprobs", tops}, {"text_offset", offsets}};
    if (options_.exact_entropy) logprobs["entropies"] = ents;
    json reply = {{"object", "text_completion"},
                  {"choices", json::array({{{"index", 0}, {"text", prompt}, {"logprobs", logprobs}}})}};
    return reply.dump();
}

std::string MockTransport::embeddings(const json& payload) const {
    std::string input;
    try {
        input = payload.at("input").get<std::string>();
    } catch (const json::exception&) {
        throw ProviderError("mock: malformed embeddings request");
    }
    Rng rng(hash("embed", input));
    std::vector<double> v(options_.embedding_dim);
    for (auto& x : v) x = rng.normal();
    json reply = {{"object", "list"}, {"data", json::array({{{"index", 0}, {"embedding", v}}})}};
    return reply.dump();
}

} // namespace lyricpref
