#include "lyricpref/errors.hpp"
#include "lyricpref/logistic.hpp"
#include "lyricpref/tree.hpp"

#include <cmath>

namespace lyricpref {

double GbdtModel::decision(const VectorXd& x) const {
    double f = base_score;
    for (const auto& t : trees) f += shrinkage * t.evaluate(x);
    return f;
}

double GbdtModel::predict(const VectorXd& x) const { return sigmoid(decision(x)); }

namespace {

double mean_log_loss(const VectorXd& f, const Labels& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double z = f(static_cast<Eigen::Index>(i));
        // -log sigmoid(z) or -log(1 - sigmoid(z)), stably
        const double m = y[i] ? -z : z;
        s += m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
    }
    return s / static_cast<double>(y.size());
}

} // namespace

GbdtModel train_gbdt(const MatrixXd& x, const Labels& y, const GbdtOptions& options) {
    if (x.rows() == 0 || static_cast<std::size_t>(x.rows()) != y.size())
        throw ValidationError("feature rows and labels differ in length or are empty");
    if (!x.allFinite()) throw ValidationError("training features contain non-finite values");
    if (!(options.shrinkage > 0.0 && options.shrinkage <= 1.0)) throw ConfigError("gbdt shrinkage must lie in (0, 1]");
    if (options.rounds < 0) throw ConfigError("gbdt rounds must be >= 0");
    if (options.max_depth < 1) throw ConfigError("gbdt max_depth must be >= 1");
    const auto n = static_cast<Eigen::Index>(y.size());
    double pos = 0;
    for (int v : y) pos += v != 0;
    if (pos == 0 || pos == static_cast<double>(y.size()))
        throw ValidationError("training needs both classes present");

    GbdtModel model;
    model.shrinkage = options.shrinkage;
    const double rate = pos / static_cast<double>(y.size());
    model.base_score = std::log(rate / (1.0 - rate));

    VectorXd f = VectorXd::Constant(n, model.base_score);
    VectorXd grad(n), hess(n);
    model.train_log_loss.push_back(mean_log_loss(f, y));
    for (int r = 0; r < options.rounds; ++r) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double p = sigmoid(f(i));
            grad(i) = p - (y[static_cast<std::size_t>(i)] ? 1.0 : 0.0);
            hess(i) = std::max(p * (1.0 - p), 1e-16);
        }
        auto tree = fit_gradient_tree(x, grad, hess, options.max_depth, options.lambda, options.min_child_weight);
        for (Eigen::Index i = 0; i < n; ++i) f(i) += options.shrinkage * tree.evaluate(x.row(i).transpose());
        model.trees.push_back(std::move(tree));
        model.train_log_loss.push_back(mean_log_loss(f, y));
    }
    return model;
}

} // namespace lyricpref
