#include "lyricpref/evaluation.hpp"

#include "lyricpref/errors.hpp"
#include "lyricpref/rng.hpp"
#include "lyricpref/transport.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <sstream>
#include <thread>

namespace lyricpref {

using nlohmann::json;

double Metrics::require_auc() const {
    if (!auc) throw ValidationError("AUC is undefined when only one class is present");
    return *auc;
}

double rank_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
    const std::size_t n = scores.size();
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(scores[i])) throw ValidationError("non-finite score at index " + std::to_string(i));
        pos += labels[i] != 0;
    }
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) throw ValidationError("AUC is undefined when only one class is present");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Ranks are 1-based; tied runs share their average rank.
    double pos_rank_sum = 0.0;
    for (std::size_t start = 0; start < n;) {
        std::size_t end = start + 1;
        while (end < n && scores[order[end]] == scores[order[start]]) ++end;
        const double avg = 0.5 * static_cast<double>(start + 1 + end);
        for (std::size_t k = start; k < end; ++k) {
            if (labels[order[k]]) pos_rank_sum += avg;
        }
        start = end;
    }
    const double p = static_cast<double>(pos);
    return (pos_rank_sum - p * (p + 1) / 2) / (p * static_cast<double>(neg));
}

Metrics compute_metrics(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
    if (scores.empty()) throw ValidationError("no scores to evaluate");
    Metrics m;
    std::size_t correct = 0, pos = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        correct += (scores[i] >= 0.5 ? 1 : 0) == (labels[i] ? 1 : 0);
        pos += labels[i] != 0;
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(scores.size());
    if (pos > 0 && pos < scores.size()) m.auc = rank_auc(scores, labels);
    return m;
}

BaselineMetrics majority_baseline(std::span<const int> labels) {
    if (labels.empty()) throw ValidationError("majority baseline needs at least one label");
    const auto pos = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int v) { return v != 0; }));
    const auto majority = std::max(pos, labels.size() - pos);
    // Multiply first so counts like 141/200 land exactly on 70.5.
    return {100.0 * static_cast<double>(majority) / static_cast<double>(labels.size()), 50.0};
}

std::string features_fingerprint(const std::map<std::string, FeatureRecord>& features) {
    std::string blob;
    char buf[32];
    for (const auto& [id, rec] : features) {
        blob += id;
        blob += '\n';
        const auto& r = rec.tensor.rows;
        for (Eigen::Index i = 0; i < r.rows(); ++i) {
            for (Eigen::Index j = 0; j < r.cols(); ++j) {
                std::snprintf(buf, sizeof buf, "%.17g,", r(i, j));
                blob += buf;
            }
            blob += ';';
        }
        blob += '\n';
    }
    return sha256_hex(blob).substr(0, 16);
}

ExperimentData gather_experiment_data(const Dataset& dataset, const std::string& annotator,
                                      const std::map<std::string, FeatureRecord>& features) {
    if (!dataset.has_annotator(annotator)) throw ValidationError("dataset has no annotator " + annotator);
    ExperimentData data;
    data.labels = dataset.labels(annotator);
    std::vector<std::string> missing;
    for (const auto& line : dataset.lines) {
        data.ids.push_back(line.id);
        data.texts.push_back(line.text);
        const auto it = features.find(line.id);
        if (it == features.end()) {
            missing.push_back(line.id);
            continue;
        }
        data.tensors.push_back(it->second.tensor);
    }
    if (!missing.empty()) {
        std::string list;
        for (std::size_t i = 0; i < missing.size(); ++i) list += (i ? ", " : "") + missing[i];
        throw ValidationError("missing feature records for " + std::to_string(missing.size()) + " line(s): " + list);
    }
    data.feature_fingerprint = features_fingerprint(features);
    return data;
}

void attach_embeddings(ExperimentData& data, Embedder& embedder) {
    data.embeddings.clear();
    for (const auto& t : data.texts) data.embeddings.push_back(embedder.embed(t));
}

std::vector<TrainConfig> tuning_grid(ModelKind kind, const TrainConfig& base) {
    std::vector<TrainConfig> grid;
    auto add = [&](auto mutate) {
        TrainConfig c = base;
        mutate(c);
        grid.push_back(c);
    };
    switch (kind) {
    case ModelKind::Logistic:
        for (double l2 : {0.0, 1e-2, 1.0, 10.0}) add([&](TrainConfig& c) { c.l2 = l2; });
        break;
    case ModelKind::LinearSvm:
        for (double cc : {0.1, 1.0, 10.0}) add([&](TrainConfig& c) { c.svm_c = cc; });
        break;
    case ModelKind::Tree:
        for (int d : {3, 6, 10}) add([&](TrainConfig& c) { c.max_depth = d; });
        break;
    case ModelKind::Forest:
        for (int d : {3, 6, 10}) add([&](TrainConfig& c) { c.max_depth = d; });
        break;
    case ModelKind::Gbdt:
        for (int d : {3, 6})
            for (double s : {0.1, 0.3}) add([&](TrainConfig& c) {
                c.max_depth = d;
                c.shrinkage = s;
            });
        break;
    case ModelKind::RecurrentAttention:
    case ModelKind::EmbeddingBaseline:
        for (double lr : {1e-3, 1e-4})
            for (bool bi : {true, false}) add([&](TrainConfig& c) {
                c.learning_rate = lr;
                c.bidirectional = bi;
            });
        break;
    case ModelKind::FewshotLlm:
        grid.push_back(base);
        break;
    }
    return grid;
}

namespace {

bool is_sequence_kind(ModelKind kind) {
    return kind == ModelKind::RecurrentAttention || kind == ModelKind::EmbeddingBaseline;
}

MatrixXd input_for(const ExperimentData& data, std::size_t i, FeatureMode mode, const TrainConfig& config) {
    if (mode == FeatureMode::Embedding) {
        if (i >= data.embeddings.size()) throw ValidationError("embedding mode needs embeddings for every line");
        return model_input(data.embeddings[i]);
    }
    return model_input(data.tensors[i], mode, config.max_len);
}

TrainingSet make_set(const ExperimentData& data, FeatureMode mode, const std::vector<std::size_t>& train,
                     const std::vector<std::size_t>& val, const TrainConfig& config, bool sequences) {
    TrainingSet s;
    s.mode = mode;
    auto fill = [&](const std::vector<std::size_t>& idx, MatrixXd& x, std::vector<MatrixXd>& seqs, Labels& y) {
        for (std::size_t k = 0; k < idx.size(); ++k) {
            MatrixXd in = input_for(data, idx[k], mode, config);
            if (sequences) {
                seqs.push_back(std::move(in));
            } else {
                if (k == 0) x.resize(static_cast<Eigen::Index>(idx.size()), in.cols());
                if (in.cols() != x.cols()) throw ValidationError("feature widths differ across lines");
                x.row(static_cast<Eigen::Index>(k)) = in.row(0);
            }
            y.push_back(data.labels[idx[k]]);
        }
    };
    fill(train, s.x, s.sequences, s.y);
    fill(val, s.val_x, s.val_sequences, s.val_y);
    return s;
}

struct SeedOutcome {
    double accuracy = 0.0;
    double auc = 0.0;
    int abstentions = 0;
    std::vector<std::string> warnings;
};

void check_disjoint(const SplitPlan& plan, std::size_t n) {
    std::vector<std::size_t> train = plan.train_indices, test = plan.test_indices;
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    std::vector<std::size_t> both;
    std::set_intersection(train.begin(), train.end(), test.begin(), test.end(), std::back_inserter(both));
    if (!both.empty()) throw Error("train/test leakage: " + std::to_string(both.size()) + " line(s) in both splits");
    if (train.size() + test.size() != n) throw Error("split does not cover the dataset");
}

// Fits on `train` (the recurrent models early-stop on `val`) and scores `test`.
std::vector<double> fit_and_score(const ExperimentData& data, ModelKind kind, FeatureMode mode,
                                  const std::vector<std::size_t>& train, const std::vector<std::size_t>& val,
                                  const std::vector<std::size_t>& test, const TrainConfig& config,
                                  std::vector<std::string>& warnings) {
    const bool seq = is_sequence_kind(kind);
    const auto model = fit_model(kind, make_set(data, mode, train, seq ? val : std::vector<std::size_t>{}, config, seq), config);
    warnings.insert(warnings.end(), model.warnings().begin(), model.warnings().end());
    std::vector<double> scores;
    scores.reserve(test.size());
    for (std::size_t i : test) scores.push_back(model.predict(input_for(data, i, mode, config)));
    return scores;
}

// Splits `train` into (fit, validation) with the last fold held out.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> hold_out_last(const std::vector<std::vector<std::size_t>>& folds) {
    std::vector<std::size_t> fit, val = folds.back();
    for (std::size_t f = 0; f + 1 < folds.size(); ++f) fit.insert(fit.end(), folds[f].begin(), folds[f].end());
    std::sort(fit.begin(), fit.end());
    return {fit, val};
}

SeedOutcome evaluate_seed(const ExperimentData& data, ModelKind kind, FeatureMode mode, const SplitConfig& split,
                          const TrainConfig& base_config, const FewshotProviders* fewshot, std::uint64_t seed) {
    SeedOutcome out;
    const auto plan = stratified_split(data.labels, split.test_fraction, seed);
    check_disjoint(plan, data.labels.size());
    std::vector<int> test_labels;
    for (std::size_t i : plan.test_indices) test_labels.push_back(data.labels[i]);

    if (kind == ModelKind::FewshotLlm) {
        if (!fewshot || !fewshot->chat || !fewshot->embedder)
            throw ConfigError("the few-shot classifier needs chat and embedding providers");
        if (data.embeddings.size() != data.labels.size()) throw ValidationError("few-shot evaluation needs embeddings");
        std::vector<FewshotExample> pool;
        for (std::size_t i : plan.train_indices) {
            FewshotExample ex{data.texts[i], data.embeddings[i], {data.labels[i]}};
            for (const auto& extra : fewshot->extra_label_sources) ex.labels.push_back(extra.at(i));
            pool.push_back(std::move(ex));
        }
        FewshotOptions fo{split.fewshot_k, derive_seed(seed, 3)};
        std::vector<double> scores;
        std::size_t correct = 0;
        for (std::size_t k = 0; k < plan.test_indices.size(); ++k) {
            const std::size_t i = plan.test_indices[k];
            try {
                auto r = fewshot_llm_classify(data.texts[i], pool, fo, *fewshot->chat, *fewshot->embedder);
                scores.push_back(r.label);
                correct += r.label == test_labels[k];
                for (auto& w : r.warnings) out.warnings.push_back(data.ids[i] + ": " + w);
            } catch (const ClassificationError&) {
                scores.push_back(0.5);
                ++out.abstentions;
            }
        }
        out.accuracy = static_cast<double>(correct) / static_cast<double>(test_labels.size());
        out.auc = rank_auc(scores, test_labels);
        return out;
    }

    std::vector<int> train_labels;
    for (std::size_t i : plan.train_indices) train_labels.push_back(data.labels[i]);
    const bool need_folds = split.tune || is_sequence_kind(kind);
    std::vector<std::vector<std::size_t>> folds;
    if (need_folds) folds = kfold(plan.train_indices, train_labels, split.k_folds, derive_seed(seed, 1));

    TrainConfig config = base_config;
    config.seed = derive_seed(seed, 2);
    if (split.tune) {
        double best = -1.0;
        TrainConfig chosen = config;
        for (const auto& candidate : tuning_grid(kind, config)) {
            double acc = 0.0;
            for (std::size_t f = 0; f < folds.size(); ++f) {
                std::vector<std::size_t> fit;
                for (std::size_t g = 0; g < folds.size(); ++g) {
                    if (g != f) fit.insert(fit.end(), folds[g].begin(), folds[g].end());
                }
                std::sort(fit.begin(), fit.end());
                std::vector<std::string> ignored;
                const auto scores = fit_and_score(data, kind, mode, fit, folds[f], folds[f], candidate, ignored);
                std::vector<int> fold_labels;
                for (std::size_t i : folds[f]) fold_labels.push_back(data.labels[i]);
                acc += compute_metrics(scores, fold_labels).accuracy;
            }
            if (acc > best) {
                best = acc;
                chosen = candidate;
            }
        }
        config = chosen;
    }

    std::vector<std::size_t> fit = plan.train_indices, val;
    if (is_sequence_kind(kind)) std::tie(fit, val) = hold_out_last(folds);
    const auto scores = fit_and_score(data, kind, mode, fit, val, plan.test_indices, config, out.warnings);
    const auto m = compute_metrics(scores, test_labels);
    out.accuracy = m.accuracy;
    out.auc = m.require_auc();
    return out;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

} // namespace

EvalReport run_experiment(const ExperimentData& data, const std::string& annotator, ModelKind kind, FeatureMode mode,
                          const SplitConfig& split, const TrainConfig& config, const FewshotProviders* fewshot,
                          int jobs) {
    if (split.n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
    if (!(split.test_fraction > 0 && split.test_fraction < 1)) throw ConfigError("test_fraction must lie in (0, 1)");
    if ((split.tune || is_sequence_kind(kind)) && split.k_folds < 2) throw ConfigError("k_folds must be >= 2");
    if (kind != ModelKind::FewshotLlm && mode != FeatureMode::Embedding && data.tensors.size() != data.labels.size())
        throw ValidationError("feature tensors and labels differ in length");
    config.validate();

    EvalReport report;
    report.split = split;
    report.feature_fingerprint = data.feature_fingerprint;
    report.feature_mode = to_string(mode);
    for (int s = 0; s < split.n_seeds; ++s) report.seeds.push_back(derive_seed(split.base_seed, static_cast<std::uint64_t>(s)));

    std::vector<SeedOutcome> outcomes(report.seeds.size());
    std::vector<std::exception_ptr> errors(report.seeds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t s; (s = next.fetch_add(1)) < report.seeds.size();) {
            try {
                outcomes[s] = evaluate_seed(data, kind, mode, split, config, fewshot, report.seeds[s]);
            } catch (...) {
                errors[s] = std::current_exception();
            }
        }
    };
    const auto threads = static_cast<std::size_t>(std::clamp(jobs, 1, split.n_seeds));
    // Provider clients are shared; keep the few-shot path on one thread.
    if (threads == 1 || kind == ModelKind::FewshotLlm) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    EvalRow row;
    row.method = to_string(kind);
    row.annotator = annotator;
    for (std::size_t s = 0; s < outcomes.size(); ++s) {
        row.accuracies.push_back(100.0 * outcomes[s].accuracy);
        row.aucs.push_back(100.0 * outcomes[s].auc);
        row.abstentions += outcomes[s].abstentions;
        for (const auto& w : outcomes[s].warnings)
            report.warnings.push_back("seed " + std::to_string(s) + ": " + w);
    }
    std::tie(row.accuracy_mean, row.accuracy_std) = mean_std(row.accuracies);
    std::tie(row.auc_mean, row.auc_std) = mean_std(row.aucs);

    const auto base = majority_baseline(data.labels);
    EvalRow majority;
    majority.method = "majority";
    majority.annotator = annotator;
    majority.accuracy_mean = base.accuracy;
    majority.auc_mean = base.auc;
    row.below_majority = row.accuracy_mean < majority.accuracy_mean;
    if (row.below_majority)
        report.warnings.push_back(row.method + " accuracy is below the majority baseline");
    report.rows = {row, majority};
    return report;
}

std::string export_report(const EvalReport& report, ReportFormat format) {
    if (format == ReportFormat::Csv) {
        std::string out = "method,annotator,accuracy_mean,accuracy_std,auc_mean,auc_std\n";
        char buf[128];
        for (const auto& r : report.rows) {
            std::snprintf(buf, sizeof buf, ",%.1f,%.1f,%.1f,%.1f\n", r.accuracy_mean, r.accuracy_std, r.auc_mean,
                          r.auc_std);
            out += r.method + "," + r.annotator + buf;
        }
        return out;
    }
    json rows = json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"method", r.method},
                        {"annotator", r.annotator},
                        {"accuracy_mean", r.accuracy_mean},
                        {"accuracy_std", r.accuracy_std},
                        {"auc_mean", r.auc_mean},
                        {"auc_std", r.auc_std},
                        {"accuracies", r.accuracies},
                        {"aucs", r.aucs},
                        {"abstentions", r.abstentions},
                        {"below_majority", r.below_majority}});
    }
    const json j = {{"rows", rows},
                    {"seeds", report.seeds},
                    {"split",
                     {{"test_fraction", report.split.test_fraction},
                      {"k_folds", report.split.k_folds},
                      {"n_seeds", report.split.n_seeds},
                      {"base_seed", report.split.base_seed},
                      {"tune", report.split.tune},
                      {"fewshot_k", report.split.fewshot_k}}},
                    {"feature_fingerprint", report.feature_fingerprint},
                    {"feature_mode", report.feature_mode},
                    {"warnings", report.warnings}};
    return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        EvalReport r;
        for (const auto& x : j.at("rows")) {
            EvalRow row;
            row.method = x.at("method").get<std::string>();
            row.annotator = x.at("annotator").get<std::string>();
            row.accuracy_mean = x.at("accuracy_mean").get<double>();
            row.accuracy_std = x.at("accuracy_std").get<double>();
            row.auc_mean = x.at("auc_mean").get<double>();
            row.auc_std = x.at("auc_std").get<double>();
            row.accuracies = x.at("accuracies").get<std::vector<double>>();
            row.aucs = x.at("aucs").get<std::vector<double>>();
            row.abstentions = x.at("abstentions").get<int>();
            row.below_majority = x.at("below_majority").get<bool>();
            r.rows.push_back(std::move(row));
        }
        r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        const auto& s = j.at("split");
        r.split.test_fraction = s.at("test_fraction").get<double>();
        r.split.k_folds = s.at("k_folds").get<int>();
        r.split.n_seeds = s.at("n_seeds").get<int>();
        r.split.base_seed = s.at("base_seed").get<std::uint64_t>();
        r.split.tune = s.at("tune").get<bool>();
        r.split.fewshot_k = s.at("fewshot_k").get<int>();
        r.feature_fingerprint = j.at("feature_fingerprint").get<std::string>();
        r.feature_mode = j.at("feature_mode").get<std::string>();
        r.warnings = j.at("warnings").get<std::vector<std::string>>();
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed report JSON: ") + e.what());
    }
}

} // namespace lyricpref
