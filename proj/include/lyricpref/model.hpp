#pragma once

#include "lyricpref/features.hpp"
#include "lyricpref/logistic.hpp"
#include "lyricpref/recurrent.hpp"
#include "lyricpref/svm.hpp"
#include "lyricpref/tree.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace lyricpref {

enum class ModelKind { Logistic, LinearSvm, Tree, Forest, Gbdt, RecurrentAttention, FewshotLlm, EmbeddingBaseline };
enum class FeatureMode { Tensor, Flat, Means, Embedding };

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);
const char* to_string(FeatureMode mode);
FeatureMode feature_mode_from_string(const std::string& s);
// Recurrent models read tensors, the embedding baseline embeddings, the
// rest flattened tensors.
FeatureMode default_feature_mode(ModelKind kind);

struct TrainConfig {
    std::uint64_t seed = 0;
    // recurrent
    double learning_rate = 1e-4;
    int max_epochs = 500;
    int patience = 10;
    int batch_size = 32;
    int hidden = 0; // 0: input width
    bool bidirectional = true;
    std::string attention = "global";
    bool early_stopping = true;
    // trees
    int max_depth = 6;
    int min_leaf = 1;
    int n_trees = 100;
    int rounds = 100;
    double shrinkage = 0.1;
    // linear
    double l2 = 0.0;
    double svm_c = 1.0;
    int svm_epochs = 200;
    // flat mode
    int max_len = 12;

    void validate() const;
    nlohmann::json to_json() const;
    // Missing keys keep their defaults; unknown keys are a ConfigError.
    static TrainConfig from_json(const nlohmann::json& j);
    bool operator==(const TrainConfig&) const = default;
};

// Hash of everything that determines a fitted model besides the data.
std::string model_fingerprint(ModelKind kind, FeatureMode mode, Eigen::Index input_width, const TrainConfig& config);

// Training inputs. Vector modes fill `x` (one row per sample); tensor and
// embedding modes fill `sequences`. Validation data is only read by the
// recurrent models.
struct TrainingSet {
    FeatureMode mode = FeatureMode::Flat;
    MatrixXd x;
    std::vector<MatrixXd> sequences;
    Labels y;
    MatrixXd val_x;
    std::vector<MatrixXd> val_sequences;
    Labels val_y;

    std::size_t size() const { return y.size(); }
};

// Model input for one line in the given mode. Tensor mode returns the full
// row matrix (aggregate row last); flat and means return one row.
MatrixXd model_input(const FeatureTensor& tensor, FeatureMode mode, Eigen::Index max_len);
MatrixXd model_input(const EmbeddingVector& embedding);

class TrainedModel {
public:
    using State = std::variant<LogisticModel, LinearSvmModel, DecisionTree, RandomForest, GbdtModel, RecurrentModel<double>>;

    TrainedModel(ModelKind kind, FeatureMode mode, Eigen::Index input_width, TrainConfig config, State state,
                 std::vector<std::string> warnings = {});

    ModelKind kind() const { return kind_; }
    FeatureMode feature_mode() const { return mode_; }
    Eigen::Index input_width() const { return input_width_; }
    const TrainConfig& config() const { return config_; }
    const std::string& fingerprint() const { return fingerprint_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    const State& state() const { return state_; }

    // Probability of "inspiring" in [0, 1]. Vector modes take a single row.
    double predict(const MatrixXd& input) const;
    double predict(const FeatureTensor& tensor) const;
    static int decide(double p) { return p >= 0.5 ? 1 : 0; }

    nlohmann::json to_json() const;
    // Refuses a model whose fingerprint differs from `expected` unless
    // `allow_mismatch`; the stored fingerprint is also checked against the
    // stored configuration.
    static TrainedModel from_json(const nlohmann::json& j, const std::optional<std::string>& expected = std::nullopt,
                                  bool allow_mismatch = false);

private:
    ModelKind kind_;
    FeatureMode mode_;
    Eigen::Index input_width_;
    TrainConfig config_;
    std::string fingerprint_;
    State state_;
    std::vector<std::string> warnings_;
};

TrainedModel fit_model(ModelKind kind, const TrainingSet& data, const TrainConfig& config);

// Thin entry points per kind over fit_model.
TrainedModel train_logistic(const MatrixXd& x, const Labels& y, const TrainConfig& config);
TrainedModel train_linear_svm(const MatrixXd& x, const Labels& y, const TrainConfig& config);
TrainedModel train_tree(const MatrixXd& x, const Labels& y, const TrainConfig& config);
TrainedModel train_forest(const MatrixXd& x, const Labels& y, const TrainConfig& config);
TrainedModel train_gbdt(const MatrixXd& x, const Labels& y, const TrainConfig& config);
TrainedModel train_recurrent_attention(const std::vector<FeatureTensor>& tensors, const Labels& y,
                                       const std::vector<FeatureTensor>& validation, const Labels& val_y,
                                       const TrainConfig& config);
TrainedModel train_embedding_baseline(const std::vector<EmbeddingVector>& embeddings, const Labels& y,
                                      const std::vector<EmbeddingVector>& validation, const Labels& val_y,
                                      const TrainConfig& config);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path, const std::optional<std::string>& expected = std::nullopt,
                        bool allow_mismatch = false);

} // namespace lyricpref
