#include "lyricpref/config.hpp"

#include "lyricpref/errors.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace lyricpref {

using nlohmann::json;

nlohmann::json default_config_json() {
    const WorkspaceConfig d;
    const auto& p = d.providers;
    const auto& m = d.mock;
    return {{"providers",
             {{"endpoint", p.endpoint},
              {"api_key_env", p.api_key_env},
              {"chat_model", p.chat_model},
              {"completion_model", p.completion_model},
              {"embedding_model", p.embedding_model},
              {"chat_top_logprobs", p.chat_top_logprobs},
              {"completion_top_logprobs", p.completion_top_logprobs},
              {"max_in_flight", p.max_in_flight},
              {"timeout_seconds", p.timeout_seconds},
              {"max_retries", p.max_retries},
              {"allow_topk_entropy", p.allow_topk_entropy},
              {"context_limit", p.context_limit}}},
            {"mock",
             {{"seed", m.seed},
              {"lm", m.lm},
              {"vocab_size", m.vocab_size},
              {"chunk_chars", m.chunk_chars},
              {"embedding_dim", m.embedding_dim}}},
            {"offline", d.offline},
            {"cache_dir", d.cache_dir.string()},
            {"dataset", d.dataset.string()},
            {"features", d.features.string()},
            {"max_len", d.max_len},
            {"valence_mode", to_string(d.valence_mode)},
            {"taxonomy_file", d.taxonomy_file.string()},
            {"partition_file", d.partition_file.string()},
            {"prompt_dir", d.prompt_dir.string()},
            {"models", d.models.to_json()},
            {"seed", d.seed},
            {"n_seeds", d.n_seeds},
            {"test_fraction", d.test_fraction},
            {"k_folds", d.k_folds},
            {"jobs", d.jobs}};
}

namespace {

// Environment variables and the config keys they set.
constexpr std::pair<const char*, const char*> kEnvKeys[] = {
    {"LYRICPREF_ENDPOINT", "providers.endpoint"},
    {"LYRICPREF_CHAT_MODEL", "providers.chat_model"},
    {"LYRICPREF_COMPLETION_MODEL", "providers.completion_model"},
    {"LYRICPREF_EMBEDDING_MODEL", "providers.embedding_model"},
    {"LYRICPREF_CACHE_DIR", "cache_dir"},
    {"LYRICPREF_OFFLINE", "offline"},
    {"LYRICPREF_JOBS", "jobs"},
};

json::json_pointer pointer_for(const std::string& dotted) {
    std::string p;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted.find('.', start);
        p += "/" + dotted.substr(start, dot - start);
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return json::json_pointer(p);
}

// Coerces a textual override onto the type of the default value it replaces.
json coerce(const std::string& key, const std::string& text, const json& like) {
    try {
        if (like.is_string()) return text;
        if (like.is_boolean()) {
            if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
            if (text == "0" || text == "false" || text == "no" || text == "off" || text.empty()) return false;
            throw ConfigError("");
        }
        if (like.is_number_unsigned()) return std::stoull(text);
        if (like.is_number_integer()) return std::stoll(text);
        if (like.is_number_float()) return std::stod(text);
    } catch (const std::exception&) {
    }
    throw ConfigError("bad value for " + key + ": \"" + text + "\"");
}

void merge_layer(json& target, const json& layer, const json& schema, const std::string& prefix,
                 const std::string& source, std::map<std::string, std::string>& origin) {
    if (!layer.is_object()) throw ConfigError("config section " + (prefix.empty() ? "<root>" : prefix) + " must be an object");
    for (const auto& [key, value] : layer.items()) {
        const std::string dotted = prefix.empty() ? key : prefix + "." + key;
        if (!schema.contains(key)) throw ConfigError("unknown config key: " + dotted);
        const auto& like = schema.at(key);
        if (like.is_object()) {
            merge_layer(target[key], value, like, dotted, source, origin);
            continue;
        }
        const bool compatible = (like.is_string() && value.is_string()) || (like.is_boolean() && value.is_boolean()) ||
                                (like.is_number() && value.is_number());
        if (!compatible) throw ConfigError("config key " + dotted + " has the wrong type");
        target[key] = value;
        origin[dotted] = source;
    }
}

template <typename T>
T get(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value for ") + key + ": " + e.what());
    }
}

} // namespace

WorkspaceConfig resolve_config(const ConfigSources& sources) {
    const json schema = default_config_json();
    json merged = schema;
    std::map<std::string, std::string> origin;

    if (sources.file) {
        std::ifstream in(*sources.file);
        if (!in) throw ConfigError("cannot open config file " + sources.file->string());
        json file;
        try {
            file = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("config file " + sources.file->string() + " is not valid JSON: " + e.what());
        }
        merge_layer(merged, file, schema, "", "file " + sources.file->string(), origin);
    }

    auto getenv = sources.getenv ? sources.getenv : [](const char* name) -> const char* { return std::getenv(name); };
    for (const auto& [var, key] : kEnvKeys) {
        if (const char* v = getenv(var)) {
            const auto ptr = pointer_for(key);
            merged[ptr] = coerce(key, v, schema.at(ptr));
            origin[key] = std::string("env ") + var;
        }
    }

    for (const auto& [key, text] : sources.flags) {
        const auto ptr = pointer_for(key);
        if (!schema.contains(ptr) || schema.at(ptr).is_object()) throw ConfigError("unknown config key: " + key);
        merged[ptr] = coerce(key, text, schema.at(ptr));
        origin[key] = "flag";
    }

    WorkspaceConfig c;
    const auto& p = merged.at("providers");
    c.providers.endpoint = get<std::string>(p, "endpoint");
    c.providers.api_key_env = get<std::string>(p, "api_key_env");
    c.providers.chat_model = get<std::string>(p, "chat_model");
    c.providers.completion_model = get<std::string>(p, "completion_model");
    c.providers.embedding_model = get<std::string>(p, "embedding_model");
    c.providers.chat_top_logprobs = get<int>(p, "chat_top_logprobs");
    c.providers.completion_top_logprobs = get<int>(p, "completion_top_logprobs");
    c.providers.max_in_flight = get<int>(p, "max_in_flight");
    c.providers.timeout_seconds = get<int>(p, "timeout_seconds");
    c.providers.max_retries = get<int>(p, "max_retries");
    c.providers.allow_topk_entropy = get<bool>(p, "allow_topk_entropy");
    c.providers.context_limit = get<int>(p, "context_limit");
    const auto& m = merged.at("mock");
    c.mock.seed = get<std::uint64_t>(m, "seed");
    c.mock.lm = get<std::string>(m, "lm");
    c.mock.vocab_size = get<int>(m, "vocab_size");
    c.mock.chunk_chars = get<int>(m, "chunk_chars");
    c.mock.embedding_dim = get<int>(m, "embedding_dim");
    c.offline = get<bool>(merged, "offline");
    c.cache_dir = get<std::string>(merged, "cache_dir");
    c.dataset = get<std::string>(merged, "dataset");
    c.features = get<std::string>(merged, "features");
    c.max_len = get<int>(merged, "max_len");
    c.valence_mode = valence_mode_from_string(get<std::string>(merged, "valence_mode"));
    c.taxonomy_file = get<std::string>(merged, "taxonomy_file");
    c.partition_file = get<std::string>(merged, "partition_file");
    c.prompt_dir = get<std::string>(merged, "prompt_dir");
    c.models = TrainConfig::from_json(merged.at("models"));
    c.seed = get<std::uint64_t>(merged, "seed");
    c.n_seeds = get<int>(merged, "n_seeds");
    c.test_fraction = get<double>(merged, "test_fraction");
    c.k_folds = get<int>(merged, "k_folds");
    c.jobs = get<int>(merged, "jobs");

    if (c.max_len < 1) throw ConfigError("max_len must be >= 1");
    if (c.jobs < 1) throw ConfigError("jobs must be >= 1");
    if (c.n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
    if (!(c.test_fraction > 0 && c.test_fraction < 1)) throw ConfigError("test_fraction must lie in (0, 1)");
    if (c.providers.max_in_flight < 1) throw ConfigError("providers.max_in_flight must be >= 1");
    if (c.mock.lm != "hashed" && c.mock.lm != "uniform" && c.mock.lm != "deterministic")
        throw ConfigError("mock.lm must be hashed, uniform or deterministic");
    c.models.max_len = c.max_len;
    for (const auto& f : {c.taxonomy_file, c.partition_file, c.prompt_dir}) {
        if (!f.empty() && !std::filesystem::exists(f)) throw ConfigError("configured path does not exist: " + f.string());
    }

    for (const auto& [key, source] : origin) {
        c.resolution_log.push_back(key + " = " + merged.at(pointer_for(key)).dump() + " (" + source + ")");
    }
    return c;
}

nlohmann::json config_to_json(const WorkspaceConfig& c) {
    json j = default_config_json();
    j["providers"] = {{"endpoint", c.providers.endpoint},
                      {"api_key_env", c.providers.api_key_env},
                      {"chat_model", c.providers.chat_model},
                      {"completion_model", c.providers.completion_model},
                      {"embedding_model", c.providers.embedding_model},
                      {"chat_top_logprobs", c.providers.chat_top_logprobs},
                      {"completion_top_logprobs", c.providers.completion_top_logprobs},
                      {"max_in_flight", c.providers.max_in_flight},
                      {"timeout_seconds", c.providers.timeout_seconds},
                      {"max_retries", c.providers.max_retries},
                      {"allow_topk_entropy", c.providers.allow_topk_entropy},
                      {"context_limit", c.providers.context_limit}};
    j["mock"] = {{"seed", c.mock.seed},
                 {"lm", c.mock.lm},
                 {"vocab_size", c.mock.vocab_size},
                 {"chunk_chars", c.mock.chunk_chars},
                 {"embedding_dim", c.mock.embedding_dim}};
    j["offline"] = c.offline;
    j["cache_dir"] = c.cache_dir.string();
    j["dataset"] = c.dataset.string();
    j["features"] = c.features.string();
    j["max_len"] = c.max_len;
    j["valence_mode"] = to_string(c.valence_mode);
    j["taxonomy_file"] = c.taxonomy_file.string();
    j["partition_file"] = c.partition_file.string();
    j["prompt_dir"] = c.prompt_dir.string();
    j["models"] = c.models.to_json();
    j["seed"] = c.seed;
    j["n_seeds"] = c.n_seeds;
    j["test_fraction"] = c.test_fraction;
    j["k_folds"] = c.k_folds;
    j["jobs"] = c.jobs;
    return j;
}

EmotionTaxonomy apply_partition(const EmotionTaxonomy& taxonomy, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open sentiment partition " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("malformed sentiment partition " + path.string() + ": " + e.what());
    }
    std::vector<int> polarity(static_cast<std::size_t>(taxonomy.size()), 2);
    for (const auto& [key, value] : j.items()) {
        int pol;
        if (key == "positive") pol = 1;
        else if (key == "neutral") pol = 0;
        else if (key == "negative") pol = -1;
        else throw ConfigError("sentiment partition: unknown group " + key);
        for (const auto& label : value) {
            const int idx = taxonomy.index_of(label.get<std::string>());
            if (idx < 0) throw ConfigError("sentiment partition: label outside taxonomy: " + label.get<std::string>());
            if (polarity[static_cast<std::size_t>(idx)] != 2)
                throw ConfigError("sentiment partition: label listed twice: " + label.get<std::string>());
            polarity[static_cast<std::size_t>(idx)] = pol;
        }
    }
    for (int i = 0; i < taxonomy.size(); ++i) {
        if (polarity[static_cast<std::size_t>(i)] == 2)
            throw ConfigError("sentiment partition does not place label " + taxonomy.label(i));
    }
    return EmotionTaxonomy(taxonomy.version(), taxonomy.labels(), polarity);
}

EmotionTaxonomy WorkspaceConfig::taxonomy() const {
    EmotionTaxonomy t = taxonomy_file.empty() ? EmotionTaxonomy::shipped() : EmotionTaxonomy::load(taxonomy_file);
    if (!partition_file.empty()) t = apply_partition(t, partition_file);
    return t;
}

PromptSet WorkspaceConfig::prompts() const {
    return prompt_dir.empty() ? PromptSet::shipped() : PromptSet::load(prompt_dir);
}

} // namespace lyricpref
