#pragma once

#include "lyricpref/features.hpp"
#include "lyricpref/model.hpp"
#include "lyricpref/prompts.hpp"
#include "lyricpref/taxonomy.hpp"

#include "json.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lyricpref {

struct ProviderConfig {
    std::string endpoint; // OpenAI-compatible base URL
    std::string api_key_env = "LYRICPREF_API_KEY";
    std::string chat_model = "llama-3-70b-instruct";
    std::string completion_model = "gpt2-large";
    std::string embedding_model = "all-MiniLM-L6-v2";
    int chat_top_logprobs = 20;
    int completion_top_logprobs = 5;
    int max_in_flight = 4;
    int timeout_seconds = 60;
    int max_retries = 4;
    bool allow_topk_entropy = false;
    int context_limit = 8192;
};

struct MockConfig {
    std::uint64_t seed = 0;
    std::string lm = "hashed"; // hashed | uniform | deterministic
    int vocab_size = 50257;
    int chunk_chars = 5;
    int embedding_dim = 64;
};

struct WorkspaceConfig {
    ProviderConfig providers;
    MockConfig mock;
    bool offline = false;
    std::filesystem::path cache_dir = ".lyricpref-cache";
    std::filesystem::path dataset;   // default for subcommands that read a dataset
    std::filesystem::path features;  // default feature file
    int max_len = 12;
    ValenceMode valence_mode = ValenceMode::Binary;
    std::filesystem::path taxonomy_file;  // empty: the shipped roster
    std::filesystem::path partition_file; // optional polarity override
    std::filesystem::path prompt_dir;     // empty: the shipped prompts
    TrainConfig models;
    std::uint64_t seed = 0;
    int n_seeds = 5;
    double test_fraction = 0.2;
    int k_folds = 5;
    int jobs = 1;

    // One entry per setting that did not come from the defaults:
    // "key = value (source)".
    std::vector<std::string> resolution_log;

    EmotionTaxonomy taxonomy() const;
    PromptSet prompts() const;
};

// Layers, lowest priority first. Flag overrides use dotted keys
// ("providers.chat_model", "models.max_depth") with JSON or bare string
// values. `getenv` is injectable for tests.
struct ConfigSources {
    std::optional<std::filesystem::path> file;
    std::map<std::string, std::string> flags;
    std::function<const char*(const char*)> getenv;
};

WorkspaceConfig resolve_config(const ConfigSources& sources);
nlohmann::json default_config_json();
nlohmann::json config_to_json(const WorkspaceConfig& config);

// Polarity override: {"positive": [...], "neutral": [...], "negative": [...]}
// covering every label exactly once.
EmotionTaxonomy apply_partition(const EmotionTaxonomy& taxonomy, const std::filesystem::path& path);

} // namespace lyricpref
