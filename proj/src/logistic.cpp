#include "lyricpref/logistic.hpp"

#include "lyricpref/errors.hpp"

#include <cmath>
#include <limits>

namespace lyricpref {

namespace {

double log_likelihood(const VectorXd& eta, const VectorXd& y) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        // log(1 + e^eta) computed stably
        const double e = eta(i);
        const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        ll += y(i) * e - softplus;
    }
    return ll;
}

} // namespace

IrlsResult fit_logistic_irls(const MatrixXd& design, const VectorXd& y, const IrlsOptions& options) {
    const auto n = design.rows();
    const auto p = design.cols();
    VectorXd penalty = VectorXd::Constant(p, options.ridge);
    penalty(0) = 0.0;

    IrlsResult res;
    res.coefficients = VectorXd::Zero(p);
    VectorXd eta = VectorXd::Zero(n);
    double objective = log_likelihood(eta, y);
    MatrixXd info(p, p);

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        VectorXd mu(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            mu(i) = sigmoid(eta(i));
            w(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-12);
        }
        const VectorXd score = design.transpose() * (y - mu) - penalty.cwiseProduct(res.coefficients);
        res.iterations = iter;
        if (score.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
            res.converged = true;
            break;
        }
        info.noalias() = design.transpose() * w.asDiagonal() * design;
        info.diagonal() += penalty;
        const VectorXd step = info.ldlt().solve(score);
        if (!step.allFinite()) break;

        // Step halving keeps the penalized likelihood monotone.
        double t = 1.0;
        VectorXd next;
        double next_objective = -std::numeric_limits<double>::infinity();
        for (int half = 0; half < 30; ++half, t *= 0.5) {
            next = res.coefficients + t * step;
            eta = design * next;
            next_objective = log_likelihood(eta, y) - 0.5 * next.dot(penalty.cwiseProduct(next));
            if (next_objective >= objective - 1e-12 * std::abs(objective)) break;
        }
        res.coefficients = next;
        objective = next_objective;
        res.iterations = iter + 1;
    }

    VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = sigmoid(eta(i));
        w(i) = std::max(mu * (1.0 - mu), 1e-300);
    }
    info.noalias() = design.transpose() * w.asDiagonal() * design;
    info.diagonal() += penalty;
    res.covariance = info.ldlt().solve(MatrixXd::Identity(p, p));
    res.log_likelihood = log_likelihood(eta, y);
    return res;
}

Standardizer Standardizer::fit(const MatrixXd& x) {
    Standardizer s;
    const auto n = static_cast<double>(x.rows());
    s.mean = x.colwise().mean().transpose();
    s.scale = VectorXd::Ones(x.cols());
    s.active.assign(static_cast<std::size_t>(x.cols()), false);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double var = (x.col(c).array() - s.mean(c)).square().sum() / n;
        if (var > 1e-24) {
            s.scale(c) = std::sqrt(var);
            s.active[static_cast<std::size_t>(c)] = true;
        }
    }
    return s;
}

VectorXd Standardizer::apply(const VectorXd& row) const {
    VectorXd out = (row - mean).cwiseQuotient(scale);
    for (Eigen::Index c = 0; c < out.size(); ++c) {
        if (!active[static_cast<std::size_t>(c)]) out(c) = 0.0;
    }
    return out;
}

MatrixXd Standardizer::apply(const MatrixXd& x) const {
    MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) out.row(r) = apply(VectorXd(x.row(r).transpose())).transpose();
    return out;
}

double LogisticModel::decision(const VectorXd& x) const {
    if (x.size() != weights.size())
        throw ModelError("input width " + std::to_string(x.size()) + " does not match model width " +
                         std::to_string(weights.size()));
    return intercept + weights.dot(standardizer.apply(x));
}

VectorXd LogisticModel::raw_weights() const { return weights.cwiseQuotient(standardizer.scale); }

void check_binary_training_set(const MatrixXd& x, const Labels& y) {
    if (static_cast<std::size_t>(x.rows()) != y.size())
        throw ValidationError("feature rows and labels differ in length");
    std::size_t pos = 0;
    for (int v : y) pos += v != 0;
    if (pos < 2 || y.size() - pos < 2)
        throw ValidationError("training needs at least two samples of each class (got " + std::to_string(pos) +
                              " positive, " + std::to_string(y.size() - pos) + " negative)");
}

LogisticModel train_logistic(const MatrixXd& x, const Labels& y, double l2) {
    check_binary_training_set(x, y);
    if (l2 < 0.0) throw ValidationError("l2 must be non-negative");
    LogisticModel model;
    model.standardizer = Standardizer::fit(x);
    const MatrixXd z = model.standardizer.apply(x);

    std::vector<Eigen::Index> cols;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (model.standardizer.active[static_cast<std::size_t>(c)]) cols.push_back(c);
    }
    MatrixXd design(x.rows(), static_cast<Eigen::Index>(cols.size()) + 1);
    design.col(0).setOnes();
    for (std::size_t k = 0; k < cols.size(); ++k) design.col(static_cast<Eigen::Index>(k) + 1) = z.col(cols[k]);
    VectorXd target(x.rows());
    for (std::size_t i = 0; i < y.size(); ++i) target(static_cast<Eigen::Index>(i)) = y[i] ? 1.0 : 0.0;

    IrlsOptions opts;
    opts.ridge = l2;
    auto fit = fit_logistic_irls(design, target, opts);
    // Without a penalty, separable data drives the coefficients off to
    // infinity; refit with the minimum penalty instead. IRLS can also stop
    // "converged" on separable data once the score underflows the tolerance,
    // which shows as every training probability sitting on its label.
    const VectorXd fitted = (design * fit.coefficients).unaryExpr([](double v) { return sigmoid(v); });
    const bool separated = (fitted - target).cwiseAbs().maxCoeff() < 1e-6;
    const bool diverging = !fit.converged || separated ||
                           fit.coefficients.tail(fit.coefficients.size() - 1).cwiseAbs().maxCoeff() > 1e3;
    if (l2 == 0.0 && cols.size() > 0 && diverging) {
        model.warnings.push_back("unpenalized fit did not converge (separable data?); refit with l2 = 1e-6");
        opts.ridge = 1e-6;
        fit = fit_logistic_irls(design, target, opts);
    }
    model.l2 = opts.ridge;
    model.converged = fit.converged;
    if (!fit.converged) model.warnings.push_back("IRLS stopped at the iteration limit");
    model.intercept = fit.coefficients(0);
    model.weights = VectorXd::Zero(x.cols());
    for (std::size_t k = 0; k < cols.size(); ++k) model.weights(cols[k]) = fit.coefficients(static_cast<Eigen::Index>(k) + 1);
    return model;
}

} // namespace lyricpref
