#include "lyricpref/clients.hpp"

#include "lyricpref/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace lyricpref {

using nlohmann::json;

const char* to_string(Rubric r) {
    switch (r) {
    case Rubric::Imagery: return "imagery";
    case Rubric::Energy: return "energy";
    case Rubric::Banality: return "banality";
    }
    return "?";
}

RatingDistribution::RatingDistribution(const std::array<double, 5>& mass) {
    double total = 0.0;
    for (double m : mass) {
        if (!(m >= 0.0) || !std::isfinite(m)) throw UnparseableResponseError("rating mass must be finite and >= 0");
        total += m;
    }
    if (total <= 0.0) throw UnparseableResponseError("rating distribution has no mass");
    for (std::size_t i = 0; i < 5; ++i) probs_[i] = mass[i] / total;
}

double RatingDistribution::expectation() const {
    double e = 0.0;
    for (int r = 1; r <= 5; ++r) e += probs_[r - 1] * r;
    return std::clamp(e, 1.0, 5.0);
}

double EmotionPrediction::mass() const {
    double m = 0.0;
    for (const auto& [_, p] : top) m += p;
    return m;
}

void EmotionPrediction::validate(const EmotionTaxonomy& taxonomy) const {
    if (top.size() != static_cast<std::size_t>(EmotionTaxonomy::kTopK))
        throw UnparseableResponseError("expected " + std::to_string(EmotionTaxonomy::kTopK) + " emotions, got " +
                                       std::to_string(top.size()));
    std::set<int> seen;
    for (const auto& [idx, p] : top) {
        if (idx < 0 || idx >= taxonomy.size()) throw TaxonomyError("#" + std::to_string(idx));
        if (!seen.insert(idx).second) throw UnparseableResponseError("duplicate emotion " + taxonomy.label(idx));
        if (!(p >= 0.0) || !std::isfinite(p)) throw UnparseableResponseError("emotion probability must be >= 0");
    }
}

EmbeddingVector::EmbeddingVector(VectorXd values) : values_(std::move(values)) {
    const double n = values_.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw ProviderError("cannot normalize a zero or non-finite embedding");
    values_ /= n;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) throw ConfigError("embedding dimensions differ");
    return a.values().dot(b.values());
}

namespace {

json parse_body(const std::string& body) {
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw UnparseableResponseError(std::string("response is not JSON: ") + e.what());
    }
}

std::string message_content(const std::string& body) {
    const auto j = parse_body(body);
    try {
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw UnparseableResponseError("chat response has no message content");
    }
}

// Pulls the outermost JSON object out of free text (models like to wrap
// answers in prose or code fences).
json embedded_object(const std::string& content) {
    const auto open = content.find('{');
    const auto close = content.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open)
        throw UnparseableResponseError("no JSON object in model answer");
    try {
        return json::parse(content.substr(open, close - open + 1));
    } catch (const json::parse_error& e) {
        throw UnparseableResponseError(std::string("malformed JSON in model answer: ") + e.what());
    }
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\n\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\n\r");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

json chat_payload(const ChatSettings& s, const std::string& prompt, bool with_logprobs, int max_tokens) {
    json p = {{"model", s.model},
              {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
              {"temperature", 0},
              {"max_tokens", max_tokens}};
    if (with_logprobs) {
        p["logprobs"] = true;
        p["top_logprobs"] = s.top_logprobs;
    }
    return p;
}

std::string prompt_digest(const PromptTemplate& t) { return sha256_hex(t.body()).substr(0, 12); }

} // namespace

// --- rubric ------------------------------------------------------------------

LlmRubricScorer::LlmRubricScorer(std::shared_ptr<Transport> transport, ChatSettings settings, PromptSet prompts)
    : transport_(std::move(transport)), settings_(std::move(settings)), prompts_(std::move(prompts)) {}

RatingDistribution LlmRubricScorer::score_rubric(const std::string& text, Rubric rubric) {
    if (text.empty()) throw ValidationError("cannot score empty text");
    const PromptTemplate& tpl = rubric == Rubric::Imagery  ? prompts_.imagery
                                : rubric == Rubric::Energy ? prompts_.energy
                                                           : prompts_.banality;
    const auto body = transport_->post("/chat/completions",
                                       chat_payload(settings_, tpl.render({{"text", text}}), true, 1));
    return parse_response(body);
}

RatingDistribution LlmRubricScorer::parse_response(const std::string& body) {
    const auto j = parse_body(body);
    const json* content = nullptr;
    try {
        content = &j.at("choices").at(0).at("logprobs").at("content");
    } catch (const json::exception&) {
        throw UnparseableResponseError("chat response carries no token logprobs");
    }
    // The first generated position that offers any rating token decides.
    for (const auto& position : *content) {
        std::array<double, 5> mass{};
        bool any = false;
        for (const auto& alt : position.value("top_logprobs", json::array())) {
            const auto tok = trim(alt.at("token").get<std::string>());
            if (tok.size() == 1 && tok[0] >= '1' && tok[0] <= '5') {
                mass[tok[0] - '1'] += std::exp(alt.at("logprob").get<double>());
                any = true;
            }
        }
        if (any) return RatingDistribution(mass);
    }
    throw UnparseableResponseError("no rating token among the returned top logprobs");
}

std::string LlmRubricScorer::fingerprint() const {
    return transport_->provider_id() + "|" + settings_.model + "|rubric:" + prompt_digest(prompts_.imagery) + "," +
           prompt_digest(prompts_.energy) + "," + prompt_digest(prompts_.banality);
}

// --- emotions ----------------------------------------------------------------

LlmEmotionClassifier::LlmEmotionClassifier(std::shared_ptr<Transport> transport, ChatSettings settings,
                                           PromptSet prompts, EmotionTaxonomy taxonomy)
    : transport_(std::move(transport)), settings_(std::move(settings)), prompts_(std::move(prompts)),
      taxonomy_(std::move(taxonomy)) {}

EmotionPrediction LlmEmotionClassifier::classify_emotions(const std::string& text) {
    if (text.empty()) throw ValidationError("cannot classify empty text");
    std::string labels;
    for (const auto& l : taxonomy_.labels()) labels += (labels.empty() ? "" : ", ") + l;
    const auto prompt = prompts_.emotions.render({{"text", text}, {"labels", labels}});
    return parse_response(transport_->post("/chat/completions", chat_payload(settings_, prompt, false, 200)),
                          taxonomy_);
}

EmotionPrediction LlmEmotionClassifier::parse_response(const std::string& body, const EmotionTaxonomy& taxonomy) {
    const auto obj = embedded_object(message_content(body));
    EmotionPrediction pred;
    try {
        for (const auto& e : obj.at("emotions")) {
            const auto label = lower(trim(e.at("label").get<std::string>()));
            const int idx = taxonomy.index_of(label);
            if (idx < 0) throw TaxonomyError(label);
            pred.top.emplace_back(idx, e.at("probability").get<double>());
        }
    } catch (const json::exception& e) {
        throw UnparseableResponseError(std::string("emotion answer has the wrong shape: ") + e.what());
    }
    pred.validate(taxonomy);
    const double mass = pred.mass();
    if (mass > 1.0 + 1e-9) {
        for (auto& [_, p] : pred.top) p /= mass;
        pred.renormalized = true;
    }
    return pred;
}

std::string LlmEmotionClassifier::fingerprint() const {
    return transport_->provider_id() + "|" + settings_.model + "|emotions:" + prompt_digest(prompts_.emotions) +
           "|taxonomy:" + taxonomy_.version();
}

// --- categories --------------------------------------------------------------

LlmCategoryCounter::LlmCategoryCounter(std::shared_ptr<Transport> transport, ChatSettings settings,
                                       PromptSet prompts)
    : transport_(std::move(transport)), settings_(std::move(settings)), prompts_(std::move(prompts)) {}

CategoryCounts LlmCategoryCounter::count_categories(const std::string& text) {
    if (text.empty()) throw ValidationError("cannot count categories of empty text");
    const auto prompt = prompts_.categories.render({{"text", text}});
    std::istringstream in(text);
    std::size_t words = 0;
    for (std::string w; in >> w;) ++words;
    return parse_response(transport_->post("/chat/completions", chat_payload(settings_, prompt, false, 60)), words);
}

CategoryCounts LlmCategoryCounter::parse_response(const std::string& body, std::size_t word_count) {
    const auto obj = embedded_object(message_content(body));
    auto field = [&](const char* name) {
        const auto it = obj.find(name);
        if (it == obj.end() || !it->is_number_integer())
            throw UnparseableResponseError(std::string("category count '") + name + "' missing or not an integer");
        const auto v = it->get<long long>();
        if (v < 0) throw UnparseableResponseError(std::string("negative category count '") + name + "'");
        if (static_cast<std::size_t>(v) > word_count)
            throw UnparseableResponseError(std::string("category count '") + name + "' exceeds the word count");
        return static_cast<int>(v);
    };
    return CategoryCounts{field("dav"), field("iav"), field("sv"), field("adj")};
}

std::string LlmCategoryCounter::fingerprint() const {
    return transport_->provider_id() + "|" + settings_.model + "|categories:" + prompt_digest(prompts_.categories);
}

// --- token logprobs ----------------------------------------------------------

std::optional<std::size_t> word_for_offset(const std::string& text, std::size_t offset, const std::string& token) {
    // First non-space character of the token locates it.
    std::size_t lead = 0;
    while (lead < token.size() && std::isspace(static_cast<unsigned char>(token[lead]))) ++lead;
    std::size_t pos = offset + lead;
    if (lead == token.size()) pos = offset + token.size(); // pure whitespace: attach to the next word
    if (pos >= text.size()) return std::nullopt;
    if (std::isspace(static_cast<unsigned char>(text[pos]))) return std::nullopt;
    std::size_t word = 0;
    for (std::size_t i = 0; i < pos; ++i) {
        if (!std::isspace(static_cast<unsigned char>(text[i])) &&
            (i + 1 < text.size() && std::isspace(static_cast<unsigned char>(text[i + 1]))))
            ++word;
    }
    return word;
}

CompletionsTokenModel::CompletionsTokenModel(std::shared_ptr<Transport> transport, CompletionSettings settings)
    : transport_(std::move(transport)), settings_(std::move(settings)) {}

std::vector<TokenStepInfo> CompletionsTokenModel::token_logprobs(const std::string& text) {
    if (text.empty()) throw ValidationError("cannot score empty text");
    json payload = {{"model", settings_.model},  {"prompt", settings_.bos + text}, {"max_tokens", 0},
                    {"echo", true},              {"logprobs", settings_.top_logprobs}, {"temperature", 0}};
    return parse_response(transport_->post("/completions", payload), text, settings_);
}

std::vector<TokenStepInfo> CompletionsTokenModel::parse_response(const std::string& body, const std::string& text,
                                                                 const CompletionSettings& settings) {
    const auto j = parse_body(body);
    const json* lp = nullptr;
    try {
        lp = &j.at("choices").at(0).at("logprobs");
    } catch (const json::exception&) {
        throw UnparseableResponseError("completions response carries no logprobs");
    }
    std::vector<TokenStepInfo> steps;
    try {
        const auto& tokens = lp->at("tokens");
        const auto& logprobs = lp->at("token_logprobs");
        const auto& offsets = lp->at("text_offset");
        const json* entropies = lp->contains("entropies") ? &lp->at("entropies") : nullptr;
        const json* top = lp->contains("top_logprobs") ? &lp->at("top_logprobs") : nullptr;
        if (!entropies && !settings.allow_topk_entropy)
            throw CapabilityError("provider returns no full-distribution entropies; enable the top-k approximation "
                                  "to proceed with estimated entropy");
        const std::size_t bos = settings.bos.size();
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            const auto off = offsets.at(i).get<std::size_t>();
            if (off < bos) continue; // BOS / prompt prefix
            TokenStepInfo step;
            step.token_text = tokens.at(i).get<std::string>();
            const auto word = word_for_offset(text, off - bos, step.token_text);
            if (!word) throw UnparseableResponseError("cannot align token '" + step.token_text + "' to a word");
            step.word_index = *word;
            if (logprobs.at(i).is_null())
                throw UnparseableResponseError("token '" + step.token_text +
                                               "' has no logprob; configure a BOS prefix");
            step.logprob_nats = std::min(0.0, logprobs.at(i).get<double>());
            if (entropies) {
                step.entropy_nats = std::max(0.0, entropies->at(i).get<double>());
            } else {
                if (!top || top->at(i).is_null()) throw CapabilityError("no top-k alternatives to estimate entropy");
                std::vector<double> p;
                for (const auto& [tok, l] : top->at(i).items()) p.push_back(std::exp(l.get<double>()));
                double z = 0.0;
                for (double v : p) z += v;
                double h = 0.0;
                for (double v : p) {
                    if (v > 0.0) h -= (v / z) * std::log(v / z);
                }
                step.entropy_nats = h;
                step.entropy_approximate = true;
            }
            if (!steps.empty() && step.word_index < steps.back().word_index)
                throw UnparseableResponseError("token alignment is not monotone");
            steps.push_back(std::move(step));
        }
    } catch (const json::exception& e) {
        throw UnparseableResponseError(std::string("completions logprobs have the wrong shape: ") + e.what());
    }
    if (steps.empty()) throw UnparseableResponseError("no tokens returned for the text");
    return steps;
}

std::string CompletionsTokenModel::fingerprint() const {
    return transport_->provider_id() + "|" + settings_.model + (settings_.allow_topk_entropy ? "|topk-entropy" : "");
}

// --- embeddings --------------------------------------------------------------

EmbeddingsClient::EmbeddingsClient(std::shared_ptr<Transport> transport, EmbeddingSettings settings)
    : transport_(std::move(transport)), settings_(std::move(settings)), locked_dimension_(settings_.dimension) {}

EmbeddingVector EmbeddingsClient::embed(const std::string& text) {
    if (text.empty()) throw ValidationError("cannot embed empty text");
    const auto body = transport_->post("/embeddings", {{"model", settings_.model}, {"input", text}});
    const auto j = parse_body(body);
    std::vector<double> raw;
    try {
        raw = j.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception&) {
        throw UnparseableResponseError("embeddings response has no vector");
    }
    const auto dim = static_cast<Eigen::Index>(raw.size());
    Eigen::Index expected = 0;
    if (!locked_dimension_.compare_exchange_strong(expected, dim) && expected != dim)
        throw ConfigError("embedding dimension " + std::to_string(dim) + " does not match configured " +
                          std::to_string(expected));
    return EmbeddingVector(Eigen::Map<const VectorXd>(raw.data(), dim));
}

std::string EmbeddingsClient::fingerprint() const { return transport_->provider_id() + "|" + settings_.model; }

// --- chat --------------------------------------------------------------------

ChatClient::ChatClient(std::shared_ptr<Transport> transport, ChatSettings settings)
    : transport_(std::move(transport)), settings_(std::move(settings)) {}

std::string ChatClient::complete(const std::string& prompt) {
    return message_content(transport_->post("/chat/completions", chat_payload(settings_, prompt, false, 8)));
}

std::string ChatClient::fingerprint() const { return transport_->provider_id() + "|" + settings_.model; }

} // namespace lyricpref
