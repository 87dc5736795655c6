#include "lyricpref/model.hpp"

#include "lyricpref/errors.hpp"
#include "lyricpref/extraction.hpp"
#include "lyricpref/transport.hpp"

#include <fstream>
#include <sstream>

namespace lyricpref {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "lyricpref-model";
constexpr int kFormatVersion = 1;

constexpr std::pair<ModelKind, const char*> kKindNames[] = {
    {ModelKind::Logistic, "logistic"},
    {ModelKind::LinearSvm, "linear_svm"},
    {ModelKind::Tree, "tree"},
    {ModelKind::Forest, "forest"},
    {ModelKind::Gbdt, "gbdt"},
    {ModelKind::RecurrentAttention, "recurrent_attention"},
    {ModelKind::FewshotLlm, "fewshot_llm"},
    {ModelKind::EmbeddingBaseline, "embedding_baseline"},
};

constexpr std::pair<FeatureMode, const char*> kModeNames[] = {
    {FeatureMode::Tensor, "tensor"},
    {FeatureMode::Flat, "flat"},
    {FeatureMode::Means, "means"},
    {FeatureMode::Embedding, "embedding"},
};

json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd vec_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_json(const MatrixXd& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

MatrixXd mat_from(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ValidationError("matrix data has the wrong length");
    return Eigen::Map<const MatrixXd>(data.data(), rows, cols);
}

json standardizer_json(const Standardizer& s) {
    return {{"mean", vec_json(s.mean)}, {"scale", vec_json(s.scale)}, {"active", s.active}};
}

Standardizer standardizer_from(const json& j) {
    Standardizer s;
    s.mean = vec_from(j.at("mean"));
    s.scale = vec_from(j.at("scale"));
    s.active = j.at("active").get<std::vector<bool>>();
    return s;
}

json tree_json(const DecisionTree& t) {
    json nodes = json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    return nodes;
}

DecisionTree tree_from(const json& j) {
    DecisionTree t;
    for (const auto& n : j) {
        TreeNode node;
        node.feature = n.at(0).get<int>();
        node.threshold = n.at(1).get<double>();
        node.left = n.at(2).get<int>();
        node.right = n.at(3).get<int>();
        node.value = n.at(4).get<double>();
        t.nodes.push_back(node);
    }
    const auto size = static_cast<int>(t.nodes.size());
    for (const auto& n : t.nodes) {
        if (!n.leaf() && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size))
            throw ValidationError("tree node points outside the node array");
    }
    return t;
}

json state_json(const TrainedModel::State& state) {
    return std::visit(
        [](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LogisticModel>) {
                return {{"standardizer", standardizer_json(m.standardizer)},
                        {"intercept", m.intercept},
                        {"weights", vec_json(m.weights)},
                        {"l2", m.l2},
                        {"converged", m.converged}};
            } else if constexpr (std::is_same_v<T, LinearSvmModel>) {
                return {{"standardizer", standardizer_json(m.standardizer)},
                        {"weights", vec_json(m.weights)},
                        {"bias", m.bias}};
            } else if constexpr (std::is_same_v<T, DecisionTree>) {
                return {{"nodes", tree_json(m)}};
            } else if constexpr (std::is_same_v<T, RandomForest>) {
                json trees = json::array();
                for (const auto& t : m.trees) trees.push_back(tree_json(t));
                return {{"trees", trees}};
            } else if constexpr (std::is_same_v<T, GbdtModel>) {
                json trees = json::array();
                for (const auto& t : m.trees) trees.push_back(tree_json(t));
                return {{"base_score", m.base_score},
                        {"shrinkage", m.shrinkage},
                        {"trees", trees},
                        {"train_log_loss", m.train_log_loss}};
            } else {
                json blocks = json::object();
                m.net.params().visit([&](const char* name, const auto& block) { blocks[name] = mat_json(block); });
                return {{"input_mean", vec_json(m.input_mean)},
                        {"input_scale", vec_json(m.input_scale)},
                        {"hidden", m.net.hidden()},
                        {"bidirectional", m.net.bidirectional()},
                        {"blocks", blocks},
                        {"history",
                         {{"train_loss", m.history.train_loss},
                          {"validation_loss", m.history.validation_loss},
                          {"best_epoch", m.history.best_epoch},
                          {"stopped_early", m.history.stopped_early}}}};
            }
        },
        state);
}

TrainedModel::State state_from(ModelKind kind, const json& p, Eigen::Index width) {
    switch (kind) {
    case ModelKind::Logistic: {
        LogisticModel m;
        m.standardizer = standardizer_from(p.at("standardizer"));
        m.intercept = p.at("intercept").get<double>();
        m.weights = vec_from(p.at("weights"));
        m.l2 = p.at("l2").get<double>();
        m.converged = p.at("converged").get<bool>();
        return m;
    }
    case ModelKind::LinearSvm: {
        LinearSvmModel m;
        m.standardizer = standardizer_from(p.at("standardizer"));
        m.weights = vec_from(p.at("weights"));
        m.bias = p.at("bias").get<double>();
        return m;
    }
    case ModelKind::Tree:
        return tree_from(p.at("nodes"));
    case ModelKind::Forest: {
        RandomForest f;
        for (const auto& t : p.at("trees")) f.trees.push_back(tree_from(t));
        return f;
    }
    case ModelKind::Gbdt: {
        GbdtModel g;
        g.base_score = p.at("base_score").get<double>();
        g.shrinkage = p.at("shrinkage").get<double>();
        for (const auto& t : p.at("trees")) g.trees.push_back(tree_from(t));
        g.train_log_loss = p.at("train_log_loss").get<std::vector<double>>();
        return g;
    }
    case ModelKind::RecurrentAttention:
    case ModelKind::EmbeddingBaseline: {
        RecurrentModel<double> m;
        m.input_mean = vec_from(p.at("input_mean"));
        m.input_scale = vec_from(p.at("input_scale"));
        m.net = BiLstmAttention<double>(width, p.at("hidden").get<Eigen::Index>(), p.at("bidirectional").get<bool>(), 0);
        const auto& blocks = p.at("blocks");
        m.net.params().visit([&](const char* name, auto& block) {
            const MatrixXd v = mat_from(blocks.at(name));
            if (v.rows() != block.rows() || v.cols() != block.cols())
                throw ValidationError(std::string("parameter block ") + name + " has the wrong shape");
            block = v;
        });
        const auto& h = p.at("history");
        m.history.train_loss = h.at("train_loss").get<std::vector<double>>();
        m.history.validation_loss = h.at("validation_loss").get<std::vector<double>>();
        m.history.best_epoch = h.at("best_epoch").get<int>();
        m.history.stopped_early = h.at("stopped_early").get<bool>();
        return m;
    }
    case ModelKind::FewshotLlm:
        break;
    }
    throw ValidationError("model kind fewshot_llm has no stored parameters");
}

} // namespace

const char* to_string(ModelKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

ModelKind model_kind_from_string(const std::string& s) {
    for (const auto& [k, name] : kKindNames) {
        if (s == name) return k;
    }
    if (s == "lr") return ModelKind::Logistic;
    if (s == "svm") return ModelKind::LinearSvm;
    if (s == "dt") return ModelKind::Tree;
    if (s == "rf") return ModelKind::Forest;
    if (s == "xgboost") return ModelKind::Gbdt;
    if (s == "lstm" || s == "recurrent") return ModelKind::RecurrentAttention;
    if (s == "fewshot") return ModelKind::FewshotLlm;
    throw ConfigError("unknown model kind: " + s);
}

const char* to_string(FeatureMode mode) {
    for (const auto& [m, name] : kModeNames) {
        if (m == mode) return name;
    }
    return "unknown";
}

FeatureMode feature_mode_from_string(const std::string& s) {
    for (const auto& [m, name] : kModeNames) {
        if (s == name) return m;
    }
    throw ConfigError("unknown feature mode: " + s);
}

FeatureMode default_feature_mode(ModelKind kind) {
    switch (kind) {
    case ModelKind::RecurrentAttention:
        return FeatureMode::Tensor;
    case ModelKind::EmbeddingBaseline:
    case ModelKind::FewshotLlm:
        return FeatureMode::Embedding;
    default:
        return FeatureMode::Flat;
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1 || patience >= max_epochs) throw ConfigError("patience must lie in [1, max_epochs)");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (hidden < 0) throw ConfigError("hidden must be >= 0");
    if (attention != "global") throw ConfigError("unsupported attention kind: " + attention);
    if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
    if (min_leaf < 1) throw ConfigError("min_leaf must be >= 1");
    if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
    if (rounds < 0) throw ConfigError("rounds must be >= 0");
    if (!(shrinkage > 0 && shrinkage <= 1)) throw ConfigError("shrinkage must lie in (0, 1]");
    if (l2 < 0) throw ConfigError("l2 must be >= 0");
    if (!(svm_c > 0)) throw ConfigError("svm_c must be positive");
    if (svm_epochs < 1) throw ConfigError("svm_epochs must be >= 1");
    if (max_len < 1) throw ConfigError("max_len must be >= 1");
}

json TrainConfig::to_json() const {
    return {{"seed", seed},           {"learning_rate", learning_rate},
            {"max_epochs", max_epochs}, {"patience", patience},
            {"batch_size", batch_size}, {"hidden", hidden},
            {"bidirectional", bidirectional}, {"attention", attention},
            {"early_stopping", early_stopping}, {"max_depth", max_depth},
            {"min_leaf", min_leaf},     {"n_trees", n_trees},
            {"rounds", rounds},         {"shrinkage", shrinkage},
            {"l2", l2},                 {"svm_c", svm_c},
            {"svm_epochs", svm_epochs}, {"max_len", max_len}};
}

TrainConfig TrainConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("model configuration must be an object");
    TrainConfig c;
    const json known = c.to_json();
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw ConfigError("unknown model configuration key: " + key);
    }
    try {
        auto read = [&](const char* key, auto& field) {
            if (j.contains(key)) j.at(key).get_to(field);
        };
        read("seed", c.seed);
        read("learning_rate", c.learning_rate);
        read("max_epochs", c.max_epochs);
        read("patience", c.patience);
        read("batch_size", c.batch_size);
        read("hidden", c.hidden);
        read("bidirectional", c.bidirectional);
        read("attention", c.attention);
        read("early_stopping", c.early_stopping);
        read("max_depth", c.max_depth);
        read("min_leaf", c.min_leaf);
        read("n_trees", c.n_trees);
        read("rounds", c.rounds);
        read("shrinkage", c.shrinkage);
        read("l2", c.l2);
        read("svm_c", c.svm_c);
        read("svm_epochs", c.svm_epochs);
        read("max_len", c.max_len);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad model configuration value: ") + e.what());
    }
    c.validate();
    return c;
}

std::string model_fingerprint(ModelKind kind, FeatureMode mode, Eigen::Index input_width, const TrainConfig& config) {
    const json j = {{"kind", to_string(kind)}, {"feature_mode", to_string(mode)}, {"input_width", input_width},
                    {"config", config.to_json()}};
    return sha256_hex(j.dump()).substr(0, 16);
}

MatrixXd model_input(const FeatureTensor& tensor, FeatureMode mode, Eigen::Index max_len) {
    switch (mode) {
    case FeatureMode::Tensor:
        return tensor.rows;
    case FeatureMode::Flat:
        return flatten_tensor(tensor, max_len).transpose();
    case FeatureMode::Means:
        return timestep_means(tensor).as_vector().transpose();
    case FeatureMode::Embedding:
        break;
    }
    throw ModelError("embedding-mode models take embeddings, not feature tensors");
}

MatrixXd model_input(const EmbeddingVector& embedding) { return embedding.values().transpose(); }

TrainedModel::TrainedModel(ModelKind kind, FeatureMode mode, Eigen::Index input_width, TrainConfig config, State state,
                           std::vector<std::string> warnings)
    : kind_(kind), mode_(mode), input_width_(input_width), config_(std::move(config)),
      fingerprint_(model_fingerprint(kind, mode, input_width, config_)), state_(std::move(state)),
      warnings_(std::move(warnings)) {}

double TrainedModel::predict(const MatrixXd& input) const {
    if (input.cols() != input_width_)
        throw ModelError("input width " + std::to_string(input.cols()) + " does not match model width " +
                         std::to_string(input_width_));
    const bool sequence = mode_ == FeatureMode::Tensor || kind_ == ModelKind::EmbeddingBaseline;
    if (!sequence && input.rows() != 1) throw ModelError(std::string(to_string(mode_)) + " input must be a single row");
    if (!input.allFinite()) throw ModelError("input contains non-finite values");
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, RecurrentModel<double>>) {
                return m.predict(input);
            } else if constexpr (std::is_same_v<T, DecisionTree>) {
                return m.evaluate(input.row(0).transpose());
            } else {
                return m.predict(input.row(0).transpose());
            }
        },
        state_);
}

double TrainedModel::predict(const FeatureTensor& tensor) const {
    return predict(model_input(tensor, mode_, config_.max_len));
}

json TrainedModel::to_json() const {
    return {{"format", kFormat},
            {"version", kFormatVersion},
            {"kind", to_string(kind_)},
            {"feature_mode", to_string(mode_)},
            {"input_width", input_width_},
            {"fingerprint", fingerprint_},
            {"config", config_.to_json()},
            {"warnings", warnings_},
            {"parameters", state_json(state_)}};
}

TrainedModel TrainedModel::from_json(const json& j, const std::optional<std::string>& expected, bool allow_mismatch) {
    try {
        if (j.at("format").get<std::string>() != kFormat) throw ValidationError("not a lyricpref model file");
        if (j.at("version").get<int>() != kFormatVersion)
            throw ValidationError("unsupported model file version " + j.at("version").dump());
        const auto kind = model_kind_from_string(j.at("kind").get<std::string>());
        const auto mode = feature_mode_from_string(j.at("feature_mode").get<std::string>());
        const auto width = j.at("input_width").get<Eigen::Index>();
        const auto config = TrainConfig::from_json(j.at("config"));
        const auto stored = j.at("fingerprint").get<std::string>();
        if (!allow_mismatch) {
            if (stored != model_fingerprint(kind, mode, width, config))
                throw ValidationError("model fingerprint does not match its stored configuration");
            if (expected && stored != *expected)
                throw ValidationError("model fingerprint " + stored + " differs from expected " + *expected);
        }
        TrainedModel model(kind, mode, width, config, state_from(kind, j.at("parameters"), width),
                           j.value("warnings", std::vector<std::string>{}));
        model.fingerprint_ = stored;
        return model;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed model file: ") + e.what());
    }
}

TrainedModel fit_model(ModelKind kind, const TrainingSet& data, const TrainConfig& config) {
    config.validate();
    const bool sequence = kind == ModelKind::RecurrentAttention || kind == ModelKind::EmbeddingBaseline;
    if (kind == ModelKind::FewshotLlm)
        throw ConfigError("the few-shot classifier is not trained; use fewshot_llm_classify");
    if (sequence) {
        if (kind == ModelKind::RecurrentAttention && data.mode != FeatureMode::Tensor)
            throw ConfigError("recurrent_attention needs tensor features");
        if (kind == ModelKind::EmbeddingBaseline && data.mode != FeatureMode::Embedding)
            throw ConfigError("embedding_baseline needs embedding features");
        if (data.sequences.empty()) throw ValidationError("no training sequences");
        RecurrentOptions ro;
        ro.hidden = config.hidden;
        ro.bidirectional = config.bidirectional;
        ro.learning_rate = config.learning_rate;
        ro.max_epochs = config.max_epochs;
        ro.patience = config.patience;
        ro.batch_size = config.batch_size;
        ro.early_stopping = config.early_stopping;
        ro.seed = config.seed;
        check_binary_training_set(MatrixXd::Zero(static_cast<Eigen::Index>(data.y.size()), 1), data.y);
        auto m = train_recurrent<double>(data.sequences, data.y, data.val_sequences, data.val_y, ro);
        const auto width = data.sequences.front().cols();
        return TrainedModel(kind, data.mode, width, config, std::move(m));
    }

    if (data.mode == FeatureMode::Tensor || data.mode == FeatureMode::Embedding)
        throw ConfigError(std::string(to_string(kind)) + " needs flat or means features");
    const MatrixXd& x = data.x;
    switch (kind) {
    case ModelKind::Logistic: {
        auto m = train_logistic(x, data.y, config.l2);
        auto warnings = m.warnings;
        return TrainedModel(kind, data.mode, x.cols(), config, std::move(m), std::move(warnings));
    }
    case ModelKind::LinearSvm:
        return TrainedModel(kind, data.mode, x.cols(), config,
                            train_linear_svm(x, data.y, SvmOptions{config.svm_c, config.svm_epochs, config.seed}));
    case ModelKind::Tree: {
        TreeOptions to;
        to.max_depth = config.max_depth;
        to.min_leaf = config.min_leaf;
        check_binary_training_set(x, data.y);
        return TrainedModel(kind, data.mode, x.cols(), config, train_tree(x, data.y, to));
    }
    case ModelKind::Forest: {
        ForestOptions fo;
        fo.n_trees = config.n_trees;
        fo.tree.max_depth = config.max_depth;
        fo.tree.min_leaf = config.min_leaf;
        fo.seed = config.seed;
        check_binary_training_set(x, data.y);
        return TrainedModel(kind, data.mode, x.cols(), config, train_forest(x, data.y, fo));
    }
    case ModelKind::Gbdt: {
        GbdtOptions go;
        go.rounds = config.rounds;
        go.shrinkage = config.shrinkage;
        go.max_depth = config.max_depth;
        check_binary_training_set(x, data.y);
        return TrainedModel(kind, data.mode, x.cols(), config, train_gbdt(x, data.y, go));
    }
    default:
        break;
    }
    throw ConfigError(std::string("cannot fit model kind ") + to_string(kind));
}

namespace {

TrainingSet vector_set(const MatrixXd& x, const Labels& y) {
    TrainingSet s;
    s.mode = FeatureMode::Flat;
    s.x = x;
    s.y = y;
    return s;
}

} // namespace

TrainedModel train_logistic(const MatrixXd& x, const Labels& y, const TrainConfig& config) {
    return fit_model(ModelKind::Logistic, vector_set(x, y), config);
}
TrainedModel train_linear_svm(const MatrixXd& x, const Labels& y, const TrainConfig& config) {
    return fit_model(ModelKind::LinearSvm, vector_set(x, y), config);
}
TrainedModel train_tree(const MatrixXd& x, const Labels& y, const TrainConfig& config) {
    return fit_model(ModelKind::Tree, vector_set(x, y), config);
}
TrainedModel train_forest(const MatrixXd& x, const Labels& y, const TrainConfig& config) {
    return fit_model(ModelKind::Forest, vector_set(x, y), config);
}
TrainedModel train_gbdt(const MatrixXd& x, const Labels& y, const TrainConfig& config) {
    return fit_model(ModelKind::Gbdt, vector_set(x, y), config);
}

TrainedModel train_recurrent_attention(const std::vector<FeatureTensor>& tensors, const Labels& y,
                                       const std::vector<FeatureTensor>& validation, const Labels& val_y,
                                       const TrainConfig& config) {
    TrainingSet s;
    s.mode = FeatureMode::Tensor;
    s.y = y;
    s.val_y = val_y;
    for (const auto& t : tensors) s.sequences.push_back(t.rows);
    for (const auto& t : validation) s.val_sequences.push_back(t.rows);
    return fit_model(ModelKind::RecurrentAttention, s, config);
}

TrainedModel train_embedding_baseline(const std::vector<EmbeddingVector>& embeddings, const Labels& y,
                                      const std::vector<EmbeddingVector>& validation, const Labels& val_y,
                                      const TrainConfig& config) {
    TrainingSet s;
    s.mode = FeatureMode::Embedding;
    s.y = y;
    s.val_y = val_y;
    for (const auto& e : embeddings) s.sequences.push_back(model_input(e));
    for (const auto& e : validation) s.val_sequences.push_back(model_input(e));
    return fit_model(ModelKind::EmbeddingBaseline, s, config);
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    write_file_atomic(path, model.to_json().dump(1) + "\n");
}

TrainedModel load_model(const std::filesystem::path& path, const std::optional<std::string>& expected,
                        bool allow_mismatch) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open model file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("model file " + path.string() + " is not JSON: " + e.what());
    }
    return TrainedModel::from_json(j, expected, allow_mismatch);
}

} // namespace lyricpref
