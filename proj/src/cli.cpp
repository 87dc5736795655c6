#include "lyricpref/cli.hpp"

#include "lyricpref/analysis.hpp"
#include "lyricpref/corpus.hpp"
#include "lyricpref/errors.hpp"
#include "lyricpref/evaluation.hpp"
#include "lyricpref/model.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>

namespace lyricpref {

namespace fs = std::filesystem;

ProviderBundle make_providers(const WorkspaceConfig& config) {
    ProviderBundle b;
    const auto prompts = config.prompts();
    const auto taxonomy = config.taxonomy();
    if (config.offline) {
        MockOptions mo;
        mo.seed = config.mock.seed;
        mo.lm = config.mock.lm == "uniform" ? MockLm::Uniform
                : config.mock.lm == "deterministic" ? MockLm::Deterministic
                                                    : MockLm::Hashed;
        mo.vocab_size = config.mock.vocab_size;
        mo.chunk_chars = config.mock.chunk_chars;
        mo.embedding_dim = config.mock.embedding_dim;
        b.mock = std::make_shared<MockTransport>(mo, prompts, taxonomy);
        b.upstream = b.mock;
    } else {
        if (config.providers.endpoint.empty())
            throw ConfigError("no provider endpoint configured; set providers.endpoint, LYRICPREF_ENDPOINT or use --offline");
        HttpConfig hc;
        hc.base_url = config.providers.endpoint;
        if (const char* key = std::getenv(config.providers.api_key_env.c_str())) hc.api_key = key;
        hc.timeout_seconds = config.providers.timeout_seconds;
        hc.max_retries = config.providers.max_retries;
        hc.max_in_flight = config.providers.max_in_flight;
        b.upstream = std::make_shared<HttpTransport>(hc);
    }
    b.cached = std::make_shared<CachedTransport>(b.upstream, std::make_shared<ResponseCache>(config.cache_dir));

    ChatSettings chat{config.providers.chat_model, config.providers.chat_top_logprobs,
                      static_cast<std::size_t>(config.providers.context_limit)};
    CompletionSettings completion;
    completion.model = config.providers.completion_model;
    completion.top_logprobs = config.providers.completion_top_logprobs;
    completion.allow_topk_entropy = config.providers.allow_topk_entropy;

    b.extraction.rubric = std::make_shared<LlmRubricScorer>(b.cached, chat, prompts);
    b.extraction.emotions = std::make_shared<LlmEmotionClassifier>(b.cached, chat, prompts, taxonomy);
    b.extraction.categories = std::make_shared<LlmCategoryCounter>(b.cached, chat, prompts);
    b.extraction.tokens = std::make_shared<CompletionsTokenModel>(b.cached, completion);
    b.embedder = std::make_shared<EmbeddingsClient>(b.cached, EmbeddingSettings{config.providers.embedding_model, 0});
    b.chat = std::make_shared<ChatClient>(b.cached, chat);
    return b;
}

std::string resolve_timestamp(const std::string& explicit_value, bool offline) {
    if (!explicit_value.empty()) return explicit_value;
    std::time_t t;
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) {
        try {
            t = static_cast<std::time_t>(std::stoll(sde));
        } catch (const std::exception&) {
            throw ConfigError(std::string("SOURCE_DATE_EPOCH is not an integer: ") + sde);
        }
    } else if (offline) {
        t = 0;
    } else {
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

struct GlobalOptions {
    std::string config_file;
    bool offline = false;
    int jobs = 0;
    long long seed = -1;
    std::string cache_dir;
    std::string timestamp;
    bool quiet = false;
    std::vector<std::string> set;
};

WorkspaceConfig load_workspace(const GlobalOptions& g, std::ostream& err) {
    ConfigSources src;
    if (!g.config_file.empty()) {
        src.file = g.config_file;
    } else if (fs::exists("lyricpref.json")) {
        src.file = "lyricpref.json";
    }
    if (g.offline) src.flags["offline"] = "true";
    if (g.jobs > 0) src.flags["jobs"] = std::to_string(g.jobs);
    if (g.seed >= 0) src.flags["seed"] = std::to_string(g.seed);
    if (!g.cache_dir.empty()) src.flags["cache_dir"] = g.cache_dir;
    for (const auto& kv : g.set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + kv);
        src.flags[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    auto config = resolve_config(src);
    if (!g.quiet) {
        for (const auto& line : config.resolution_log) err << "config: " << line << "\n";
    }
    return config;
}

fs::path require_path(const std::string& flag_value, const fs::path& configured, const char* what) {
    if (!flag_value.empty()) return flag_value;
    if (!configured.empty()) return configured;
    throw ConfigError(std::string("no ") + what + " given (flag or config)");
}

std::map<std::string, FeatureRecord> load_features(const fs::path& path) {
    std::map<std::string, FeatureRecord> out;
    for (auto& rec : load_feature_file(path)) {
        const auto id = rec.tensor.line_id;
        if (!out.emplace(id, std::move(rec)).second) throw ValidationError("duplicate feature record for line " + id);
    }
    return out;
}

CorpusStats corpus_stats_for(const Dataset& dataset, const std::string& corpus_file) {
    if (corpus_file.empty()) return build_corpus_stats(dataset.lines);
    std::ifstream in(corpus_file);
    if (!in) throw ValidationError("cannot open corpus file " + corpus_file);
    std::vector<LyricLine> lines;
    std::string text;
    for (std::size_t n = 1; std::getline(in, text); ++n) {
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        lines.push_back(LyricLine::from_raw("corpus-" + std::to_string(n), text));
    }
    return build_corpus_stats(lines);
}

std::vector<MeanFeatures> means_for(const ExperimentData& data) {
    std::vector<MeanFeatures> means;
    for (const auto& t : data.tensors) means.push_back(timestep_means(t));
    return means;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Per-annotator lyric preference modelling: features, calibration models, evaluation."};
    app.name("lyricpref");
    app.require_subcommand(1);
    // Global flags are accepted before or after the subcommand.
    app.fallthrough();
    GlobalOptions g;
    app.add_option("--config", g.config_file, "Workspace config file (default ./lyricpref.json when present)");
    app.add_flag("--offline", g.offline, "Use the deterministic mock providers");
    app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", g.seed, "Master seed")->check(CLI::NonNegativeNumber);
    app.add_option("--cache-dir", g.cache_dir, "Provider response cache directory");
    app.add_option("--timestamp", g.timestamp, "Timestamp written into feature records");
    app.add_option("--set", g.set, "Config override key=value (repeatable)")->allow_extra_args(false);
    app.add_flag("--quiet", g.quiet, "Do not log config resolution");

    std::string dataset_path, out_path, format = "auto";
    auto* ingest = app.add_subcommand("ingest", "Validate and normalize a dataset into canonical JSONL");
    ingest->add_option("--dataset", dataset_path, "Input dataset (.jsonl or .csv)")->required();
    ingest->add_option("--out", out_path, "Canonical JSONL output")->required();
    ingest->add_option("--format", format, "auto, jsonl or csv")->check(CLI::IsMember({"auto", "jsonl", "csv"}));

    std::string families = "all", valence, corpus_file, unseen = "error";
    auto* extract = app.add_subcommand("extract", "Compute feature tensors for every line");
    extract->add_option("--dataset", dataset_path, "Dataset file");
    extract->add_option("--features", families, "all, or a comma list of feature families");
    extract->add_option("--valence", valence, "binary or full")->check(CLI::IsMember({"binary", "full"}));
    extract->add_option("--corpus", corpus_file, "Text file (one line per lyric) for NPMI statistics");
    extract->add_option("--unseen", unseen, "Unseen NPMI words: error or minus-one")
        ->check(CLI::IsMember({"error", "minus-one"}));
    extract->add_option("--out", out_path, "Feature JSONL output")->required();

    std::string feature_file, annotator, model_name = "gbdt", mode_name;
    auto* train = app.add_subcommand("train", "Fit one model for one annotator");
    train->add_option("--dataset", dataset_path, "Dataset file");
    train->add_option("--feature-file", feature_file, "Feature JSONL from extract");
    train->add_option("--annotator", annotator, "Annotator id")->required();
    train->add_option("--model", model_name, "logistic, linear_svm, tree, forest, gbdt, recurrent_attention, embedding_baseline");
    train->add_option("--mode", mode_name, "tensor, flat, means or embedding (default per model)");
    train->add_option("--out", out_path, "Model file output")->required();

    int seeds = 0, folds = 0, k_shot = 5;
    double test_fraction = 0.0;
    bool tune = false;
    std::string label_source;
    auto* evaluate = app.add_subcommand("evaluate", "Seeded split/train/test protocol for one model and annotator");
    evaluate->add_option("--dataset", dataset_path, "Dataset file");
    evaluate->add_option("--feature-file", feature_file, "Feature JSONL from extract");
    evaluate->add_option("--annotator", annotator, "Annotator id")->required();
    evaluate->add_option("--model", model_name, "Model kind (also fewshot_llm)");
    evaluate->add_option("--mode", mode_name, "Feature mode (default per model)");
    evaluate->add_option("--seeds", seeds, "Number of seeds")->check(CLI::PositiveNumber);
    evaluate->add_option("--test-fraction", test_fraction, "Held-out fraction per seed")->check(CLI::Range(0.0, 1.0));
    evaluate->add_option("--folds", folds, "Cross-validation folds")->check(CLI::Range(2, 100));
    evaluate->add_flag("--tune", tune, "Pick hyperparameters on the folds");
    evaluate->add_option("--k", k_shot, "Examples per class for fewshot_llm")->check(CLI::PositiveNumber);
    evaluate->add_option("--label-source", label_source, "Second annotator whose labels fewshot_llm may draw on");
    evaluate->add_option("--out", out_path, "Report output (.csv or .json)")->required();
    evaluate->add_option("--format", format, "auto, csv or json")->check(CLI::IsMember({"auto", "csv", "json"}));

    auto* analyze = app.add_subcommand("analyze", "Logistic interaction significance test");
    analyze->add_option("--dataset", dataset_path, "Dataset file");
    analyze->add_option("--feature-file", feature_file, "Feature JSONL (binary valence)");
    analyze->add_option("--annotator", annotator, "Annotator id")->required();
    analyze->add_option("--out", out_path, "CSV output")->required();

    std::string out_dir;
    auto* profile = app.add_subcommand("profile", "Preference profiles and radar charts");
    profile->add_option("--dataset", dataset_path, "Dataset file");
    profile->add_option("--feature-file", feature_file, "Feature JSONL (binary valence)");
    profile->add_option("--annotator", annotator, "Annotator id, or all")->default_val("all");
    profile->add_option("--out-dir", out_dir, "Directory for profiles.csv and one SVG per annotator")->required();

    auto* agreement = app.add_subcommand("agreement", "Pairwise annotator agreement matrix");
    agreement->add_option("--dataset", dataset_path, "Dataset file");
    agreement->add_option("--out", out_path, "CSV output")->required();

    auto* cache = app.add_subcommand("cache", "Inspect or clear the provider response cache");
    cache->require_subcommand(1);
    auto* cache_stats = cache->add_subcommand("stats", "Entry count and size");
    auto* cache_purge = cache->add_subcommand("purge", "Delete every entry");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        if (code == 0) return kExitOk;
        err << app.help();
        return kExitValidation;
    }

    try {
        const auto config = load_workspace(g, err);

        if (*ingest) {
            const auto fmt = format == "auto" ? format_from_path(dataset_path)
                             : format == "csv" ? DatasetFormat::Csv
                                               : DatasetFormat::Jsonl;
            const auto dataset = load_dataset(dataset_path, fmt);
            write_file_atomic(out_path, to_canonical_jsonl(dataset));
            out << "ingested " << dataset.size() << " lines, " << dataset.annotators.size() << " annotators -> "
                << out_path << "\n";
            return kExitOk;
        }

        if (*agreement) {
            const auto dataset = load_dataset(require_path(dataset_path, config.dataset, "dataset"));
            write_file_atomic(out_path, agreement_csv(dataset, pairwise_agreement(dataset)));
            out << "wrote agreement matrix for " << dataset.annotators.size() << " annotators -> " << out_path << "\n";
            return kExitOk;
        }

        if (*cache) {
            ResponseCache rc(config.cache_dir);
            if (*cache_stats) {
                const auto s = rc.stats();
                out << "cache " << config.cache_dir.string() << ": " << s.entries << " entries, " << s.bytes << " bytes\n";
            } else if (*cache_purge) {
                out << "purged " << rc.purge() << " entries from " << config.cache_dir.string() << "\n";
            }
            return kExitOk;
        }

        if (*extract) {
            const auto dataset = load_dataset(require_path(dataset_path, config.dataset, "dataset"));
            auto providers = make_providers(config);
            ExtractionOptions opts;
            opts.valence_mode = valence.empty() ? config.valence_mode : valence_mode_from_string(valence);
            opts.families = parse_feature_families(families);
            opts.unseen = unseen == "minus-one" ? UnseenWordPolicy::MinusOne : UnseenWordPolicy::Error;
            opts.jobs = config.jobs;
            opts.timestamp = resolve_timestamp(g.timestamp, config.offline);
            FeatureExtractor extractor(providers.extraction, corpus_stats_for(dataset, corpus_file), opts);
            const auto records = extractor.extract_all(dataset.lines);
            const auto fingerprints = extractor.fingerprints();
            std::string body;
            for (const auto& r : records) body += feature_record_json(r, fingerprints, opts.timestamp) + "\n";
            write_file_atomic(out_path, body);
            out << "extracted " << records.size() << " lines -> " << out_path << " (provider calls "
                << providers.cached->upstream_calls() << ", cache hits " << providers.cached->hits() << ")\n";
            return kExitOk;
        }

        const auto dataset = load_dataset(require_path(dataset_path, config.dataset, "dataset"));
        const auto features = load_features(require_path(feature_file, config.features, "feature file"));

        if (*train) {
            const auto kind = model_kind_from_string(model_name);
            const auto mode = mode_name.empty() ? default_feature_mode(kind) : feature_mode_from_string(mode_name);
            auto data = gather_experiment_data(dataset, annotator, features);
            std::optional<ProviderBundle> providers;
            if (mode == FeatureMode::Embedding) {
                providers = make_providers(config);
                attach_embeddings(data, *providers->embedder);
            }
            TrainConfig tc = config.models;
            tc.seed = config.seed;
            tc.max_len = config.max_len;
            TrainingSet set;
            set.mode = mode;
            std::vector<std::size_t> all(data.labels.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
            std::vector<std::size_t> fit = all, val;
            const bool sequence = kind == ModelKind::RecurrentAttention || kind == ModelKind::EmbeddingBaseline;
            if (sequence) {
                const auto parts = kfold(all, data.labels, config.k_folds, derive_seed(config.seed, 1));
                val = parts.back();
                fit.clear();
                for (std::size_t f = 0; f + 1 < parts.size(); ++f) fit.insert(fit.end(), parts[f].begin(), parts[f].end());
                std::sort(fit.begin(), fit.end());
            }
            auto row_of = [&](std::size_t i) {
                return mode == FeatureMode::Embedding ? model_input(data.embeddings[i])
                                                      : model_input(data.tensors[i], mode, tc.max_len);
            };
            for (std::size_t i : fit) {
                MatrixXd in = row_of(i);
                if (sequence) {
                    set.sequences.push_back(in);
                } else {
                    if (set.x.size() == 0) set.x.resize(static_cast<Eigen::Index>(fit.size()), in.cols());
                    set.x.row(static_cast<Eigen::Index>(set.y.size())) = in.row(0);
                }
                set.y.push_back(data.labels[i]);
            }
            for (std::size_t i : val) {
                set.val_sequences.push_back(row_of(i));
                set.val_y.push_back(data.labels[i]);
            }
            const auto model = fit_model(kind, set, tc);
            for (const auto& w : model.warnings()) err << "warning: " << w << "\n";
            save_model(model, out_path);
            out << "trained " << to_string(kind) << " (" << to_string(mode) << ", fingerprint " << model.fingerprint()
                << ") on " << set.y.size() << " lines -> " << out_path << "\n";
            return kExitOk;
        }

        if (*evaluate) {
            const auto kind = model_kind_from_string(model_name);
            const auto mode = mode_name.empty() ? default_feature_mode(kind) : feature_mode_from_string(mode_name);
            auto data = gather_experiment_data(dataset, annotator, features);
            SplitConfig split;
            split.test_fraction = test_fraction > 0 ? test_fraction : config.test_fraction;
            split.k_folds = folds > 0 ? folds : config.k_folds;
            split.n_seeds = seeds > 0 ? seeds : config.n_seeds;
            split.base_seed = config.seed;
            split.tune = tune;
            split.fewshot_k = k_shot;
            std::optional<ProviderBundle> providers;
            FewshotProviders fp;
            if (mode == FeatureMode::Embedding || kind == ModelKind::FewshotLlm) {
                providers = make_providers(config);
                attach_embeddings(data, *providers->embedder);
                fp.chat = providers->chat.get();
                fp.embedder = providers->embedder.get();
                if (!label_source.empty()) fp.extra_label_sources.push_back(dataset.labels(label_source));
            }
            TrainConfig tc = config.models;
            tc.max_len = config.max_len;
            const auto report = run_experiment(data, annotator, kind, mode, split, tc, &fp, config.jobs);
            const bool json = format == "json" || (format == "auto" && fs::path(out_path).extension() == ".json");
            write_file_atomic(out_path, export_report(report, json ? ReportFormat::Json : ReportFormat::Csv));
            for (const auto& w : report.warnings) err << "warning: " << w << "\n";
            out << export_report(report, ReportFormat::Csv);
            return kExitOk;
        }

        if (*analyze) {
            const auto data = gather_experiment_data(dataset, annotator, features);
            const auto report = fit_interactions(means_for(data), data.labels, annotator);
            for (const auto& w : report.warnings) err << "warning: " << w << "\n";
            write_file_atomic(out_path, interactions_csv(report));
            out << "interaction fit for " << annotator << " (n=" << report.n
                << (report.converged ? ", converged" : ", NOT converged") << ") -> " << out_path << "\n";
            return kExitOk;
        }

        if (*profile) {
            std::vector<std::string> who = annotator == "all" ? dataset.annotators : std::vector<std::string>{annotator};
            fs::create_directories(out_dir);
            std::vector<ProfileData> profiles;
            for (const auto& a : who) {
                const auto data = gather_experiment_data(dataset, a, features);
                const auto means = means_for(data);
                profiles.push_back(preference_profile(std::span<const MeanFeatures>(means), data.labels, a));
                write_file_atomic(fs::path(out_dir) / (a + ".svg"), render_radar(profiles.back()));
            }
            write_file_atomic(fs::path(out_dir) / "profiles.csv", profile_csv(profiles));
            out << "wrote " << profiles.size() << " profile(s) -> " << out_dir << "\n";
            return kExitOk;
        }
        throw Error("no subcommand handled");
    } catch (const ProviderError& e) {
        err << "provider error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const FeatureError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ModelError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

} // namespace lyricpref
