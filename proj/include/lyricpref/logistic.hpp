#pragma once

#include "lyricpref/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace lyricpref {

struct IrlsOptions {
    double ridge = 0.0;          // L2 penalty on every coefficient except column 0
    int max_iterations = 100;
    double gradient_tolerance = 1e-8; // infinity norm of the penalized score
};

struct IrlsResult {
    VectorXd coefficients;
    MatrixXd covariance; // inverse of the penalized observed information
    bool converged = false;
    int iterations = 0;
    double log_likelihood = 0.0;
};

// Newton-Raphson / IRLS for logistic regression. `design` must already
// contain the intercept column (column 0, unpenalized). Starts from zero.
IrlsResult fit_logistic_irls(const MatrixXd& design, const VectorXd& y, const IrlsOptions& options);

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Column standardization fitted on training data. Constant columns keep
// scale 1 and are flagged inactive.
struct Standardizer {
    VectorXd mean;
    VectorXd scale;
    std::vector<bool> active;

    static Standardizer fit(const MatrixXd& x);
    VectorXd apply(const VectorXd& row) const;
    MatrixXd apply(const MatrixXd& x) const;
};

struct LogisticModel {
    Standardizer standardizer;
    double intercept = 0.0;
    VectorXd weights; // on standardized inputs; zero for inactive columns
    double l2 = 0.0;  // penalty actually used
    bool converged = false;
    std::vector<std::string> warnings;

    double decision(const VectorXd& x) const;
    double predict(const VectorXd& x) const { return sigmoid(decision(x)); }
    // Coefficients mapped back onto the raw input scale.
    VectorXd raw_weights() const;
};

// Throws ValidationError unless both classes have at least two samples.
void check_binary_training_set(const MatrixXd& x, const Labels& y);

LogisticModel train_logistic(const MatrixXd& x, const Labels& y, double l2);

} // namespace lyricpref
