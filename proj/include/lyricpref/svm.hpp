#pragma once

#include "lyricpref/logistic.hpp"
#include "lyricpref/types.hpp"

#include <cstdint>

namespace lyricpref {

struct SvmOptions {
    double c = 1.0; // hinge-loss weight; larger means weaker regularization
    int epochs = 200;
    std::uint64_t seed = 0;
};

// Linear SVM on standardized inputs. `decision` is the margin; `predict`
// squashes it through a sigmoid so it shares the probability interface and
// keeps the sign (p >= 0.5 iff margin >= 0) and the ranking.
struct LinearSvmModel {
    Standardizer standardizer;
    VectorXd weights;
    double bias = 0.0;

    double decision(const VectorXd& x) const;
    double predict(const VectorXd& x) const { return sigmoid(decision(x)); }
};

// Minimizes 0.5 |w|^2 + C * sum hinge with Pegasos-style stochastic
// subgradient steps over a seeded permutation per epoch; returns the average
// of the second-half iterates.
LinearSvmModel train_linear_svm(const MatrixXd& x, const Labels& y, const SvmOptions& options);

} // namespace lyricpref
