#pragma once

#include "lyricpref/corpus.hpp"
#include "lyricpref/extraction.hpp"
#include "lyricpref/fewshot.hpp"
#include "lyricpref/model.hpp"

#include "json.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lyricpref {

// Fractions in [0, 1]. `auc` is empty when only one class is present.
struct Metrics {
    double accuracy = 0.0;
    std::optional<double> auc;

    double require_auc() const; // throws ValidationError when undefined
};

// Mann-Whitney statistic from average ranks; ties count one half.
double rank_auc(std::span<const double> scores, std::span<const int> labels);
Metrics compute_metrics(std::span<const double> scores, std::span<const int> labels);

// Percent, as in the paper's tables.
struct BaselineMetrics {
    double accuracy = 0.0;
    double auc = 50.0;
};
BaselineMetrics majority_baseline(std::span<const int> labels);

struct SplitConfig {
    double test_fraction = 0.2;
    int k_folds = 5;
    int n_seeds = 5;
    std::uint64_t base_seed = 0;
    bool tune = false; // pick hyperparameters by cross-validation on the training split
    int fewshot_k = 5;

    bool operator==(const SplitConfig&) const = default;
};

struct EvalRow {
    std::string method;
    std::string annotator;
    double accuracy_mean = 0.0; // percent
    double accuracy_std = 0.0;
    double auc_mean = 0.0;
    double auc_std = 0.0;
    std::vector<double> accuracies; // one per seed, percent
    std::vector<double> aucs;
    int abstentions = 0;
    bool below_majority = false;

    bool operator==(const EvalRow&) const = default;
};

struct EvalReport {
    std::vector<EvalRow> rows; // model rows, then the majority row
    std::vector<std::uint64_t> seeds;
    SplitConfig split;
    std::string feature_fingerprint;
    std::string feature_mode;
    std::vector<std::string> warnings;

    bool operator==(const EvalReport&) const = default;
};

// Everything run_experiment needs, aligned by line index.
struct ExperimentData {
    std::vector<std::string> ids;
    std::vector<std::string> texts;
    Labels labels;
    std::vector<FeatureTensor> tensors;      // tensor, flat and means modes
    std::vector<EmbeddingVector> embeddings; // embedding mode and the few-shot pool
    std::string feature_fingerprint;
};

// Aligns feature records with the dataset; throws ValidationError listing
// every line id without a record.
ExperimentData gather_experiment_data(const Dataset& dataset, const std::string& annotator,
                                      const std::map<std::string, FeatureRecord>& features);
void attach_embeddings(ExperimentData& data, Embedder& embedder);
std::string features_fingerprint(const std::map<std::string, FeatureRecord>& features);

struct FewshotProviders {
    ChatModel* chat = nullptr;
    Embedder* embedder = nullptr;
    std::vector<Labels> extra_label_sources; // a second annotator's labels, aligned by index
};

// Per seed: stratified split, optional tuning on k folds, fit on the training
// split (recurrent models hold out the last fold for early stopping), score
// the test split. Seeds run on up to `jobs` threads; results are ordered by
// seed so the report does not depend on scheduling.
EvalReport run_experiment(const ExperimentData& data, const std::string& annotator, ModelKind kind, FeatureMode mode,
                          const SplitConfig& split, const TrainConfig& config,
                          const FewshotProviders* fewshot = nullptr, int jobs = 1);

// Small per-kind grids searched in tune mode.
std::vector<TrainConfig> tuning_grid(ModelKind kind, const TrainConfig& base);

enum class ReportFormat { Csv, Json };
std::string export_report(const EvalReport& report, ReportFormat format);
EvalReport report_from_json(const std::string& text);

} // namespace lyricpref
