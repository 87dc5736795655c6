#include "lyricpref/svm.hpp"

#include "lyricpref/errors.hpp"
#include "lyricpref/rng.hpp"

#include <numeric>

namespace lyricpref {

double LinearSvmModel::decision(const VectorXd& x) const {
    if (x.size() != weights.size())
        throw ModelError("input width " + std::to_string(x.size()) + " does not match model width " +
                         std::to_string(weights.size()));
    return weights.dot(standardizer.apply(x)) + bias;
}

LinearSvmModel train_linear_svm(const MatrixXd& x, const Labels& y, const SvmOptions& options) {
    check_binary_training_set(x, y);
    if (!(options.c > 0.0)) throw ConfigError("svm regularization C must be positive");
    if (options.epochs < 1) throw ConfigError("svm epochs must be >= 1");

    LinearSvmModel model;
    model.standardizer = Standardizer::fit(x);
    const MatrixXd z = model.standardizer.apply(x);
    const auto n = y.size();
    const auto d = z.cols();
    // Pegasos objective: lambda/2 |w|^2 + mean hinge, lambda = 1 / (C n).
    const double lambda = 1.0 / (options.c * static_cast<double>(n));

    // The bias rides along as an extra, unit-valued input.
    VectorXd w = VectorXd::Zero(d + 1);
    VectorXd avg = VectorXd::Zero(d + 1);
    long long averaged = 0;
    const long long total_steps = static_cast<long long>(options.epochs) * static_cast<long long>(n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(options.seed);
    long long t = 0;
    VectorXd xi(d + 1);
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t i : order) {
            ++t;
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            xi.head(d) = z.row(static_cast<Eigen::Index>(i)).transpose();
            xi(d) = 1.0;
            const double yi = y[i] ? 1.0 : -1.0;
            const bool violated = yi * w.dot(xi) < 1.0;
            w *= 1.0 - eta * lambda;
            if (violated) w += eta * yi * xi;
            // Projection onto the ball of radius 1/sqrt(lambda).
            const double norm = w.norm();
            const double radius = 1.0 / std::sqrt(lambda);
            if (norm > radius) w *= radius / norm;
            if (2 * t > total_steps) {
                avg += w;
                ++averaged;
            }
        }
    }
    avg /= static_cast<double>(averaged);
    model.weights = avg.head(d);
    model.bias = avg(d);
    return model;
}

} // namespace lyricpref
