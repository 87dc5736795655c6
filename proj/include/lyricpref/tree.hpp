#pragma once

#include "lyricpref/types.hpp"

#include <cstdint>
#include <vector>

namespace lyricpref {

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;  // x[feature] <= threshold
    int right = -1;
    double value = 0.0;

    bool leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

// Binary tree stored as a flat node array; node 0 is the root. Leaf values
// are class-1 fractions for classification trees and additive scores for
// boosted trees.
struct DecisionTree {
    std::vector<TreeNode> nodes;

    double evaluate(const VectorXd& x) const;
    int depth() const;
    int leaves() const;
    bool operator==(const DecisionTree&) const = default;
};

struct TreeOptions {
    int max_depth = 6;
    int min_leaf = 1;
    // Features considered per split; 0 means all of them.
    int max_features = 0;
    std::uint64_t seed = 0; // only used when max_features subsamples
};

// CART with Gini impurity. Split gains are compared feature by feature in
// ascending order and thresholds in ascending order, so the first of several
// equal-gain candidates wins. Impure nodes are split even at zero gain.
DecisionTree train_tree(const MatrixXd& x, const Labels& y, const TreeOptions& options);
// Same, with per-sample integer weights (bootstrap multiplicities).
DecisionTree train_tree_weighted(const MatrixXd& x, const Labels& y, const std::vector<int>& weights,
                                 const TreeOptions& options);

struct ForestOptions {
    int n_trees = 100;
    TreeOptions tree;        // max_features 0 here means sqrt(F)
    bool bootstrap = true;
    bool subsample_features = true;
    std::uint64_t seed = 0;
};

struct RandomForest {
    std::vector<DecisionTree> trees;

    double predict(const VectorXd& x) const;
    bool operator==(const RandomForest&) const = default;
};

RandomForest train_forest(const MatrixXd& x, const Labels& y, const ForestOptions& options);

struct GbdtOptions {
    int rounds = 100;
    double shrinkage = 0.1;
    int max_depth = 6;
    double lambda = 1.0;           // L2 on leaf weights
    double min_child_weight = 1.0; // minimum hessian sum per child
};

struct GbdtModel {
    double base_score = 0.0; // log-odds of the training base rate
    double shrinkage = 0.1;
    std::vector<DecisionTree> trees;
    std::vector<double> train_log_loss; // entry r is the loss after r rounds

    double decision(const VectorXd& x) const;
    double predict(const VectorXd& x) const;
};

GbdtModel train_gbdt(const MatrixXd& x, const Labels& y, const GbdtOptions& options);

// Regression tree on per-sample gradient / hessian statistics with the
// second-order gain and leaf weight -G / (H + lambda).
DecisionTree fit_gradient_tree(const MatrixXd& x, const VectorXd& grad, const VectorXd& hess, int max_depth,
                               double lambda, double min_child_weight);

} // namespace lyricpref
