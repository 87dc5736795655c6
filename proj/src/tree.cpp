#include "lyricpref/tree.hpp"

#include "lyricpref/errors.hpp"
#include "lyricpref/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lyricpref {

double DecisionTree::evaluate(const VectorXd& x) const {
    if (nodes.empty()) throw ModelError("empty tree");
    std::size_t i = 0;
    while (!nodes[i].leaf()) {
        const auto& n = nodes[i];
        if (n.feature >= x.size()) throw ModelError("input narrower than the tree's split features");
        i = static_cast<std::size_t>(x(n.feature) <= n.threshold ? n.left : n.right);
    }
    return nodes[i].value;
}

int DecisionTree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (!nodes[i].leaf()) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return best;
}

int DecisionTree::leaves() const {
    return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.leaf(); }));
}

namespace detail {

// Sample statistics for the two criteria. `a` is the weighted positive count
// (Gini) or gradient sum (boosting); `b` the weight or hessian sum.
struct Stats {
    double a = 0.0;
    double b = 0.0;
    int count = 0;

    void add(double da, double db) {
        a += da;
        b += db;
        ++count;
    }
};

struct GiniCriterion {
    int min_leaf = 1;

    double score(const Stats& s) const { return s.b > 0 ? (s.a * s.a + (s.b - s.a) * (s.b - s.a)) / s.b : 0.0; }
    bool admissible(const Stats& s) const { return s.count >= min_leaf; }
    bool splittable(const Stats& s) const { return s.count >= 2 && s.a > 1e-12 && s.b - s.a > 1e-12; }
    double gain(const Stats& l, const Stats& r, const Stats& p) const { return score(l) + score(r) - score(p); }
    double min_gain() const { return -1e-9; }
    double leaf(const Stats& s) const { return s.b > 0 ? s.a / s.b : 0.0; }
};

struct SecondOrderCriterion {
    double lambda = 1.0;
    double min_child_weight = 1.0;

    double score(const Stats& s) const { return s.a * s.a / (s.b + lambda); }
    bool admissible(const Stats& s) const { return s.count >= 1 && s.b >= min_child_weight; }
    bool splittable(const Stats& s) const { return s.count >= 2; }
    double gain(const Stats& l, const Stats& r, const Stats& p) const {
        return 0.5 * (score(l) + score(r) - score(p));
    }
    double min_gain() const { return 1e-12; }
    double leaf(const Stats& s) const { return -s.a / (s.b + lambda); }
};

struct Candidate {
    double gain = -std::numeric_limits<double>::infinity();
    int feature = -1;
    double threshold = 0.0;
};

// Grows a tree one level at a time. For each feature a single pass over the
// presorted samples evaluates every open node, so a level costs O(N F).
template <typename Criterion>
DecisionTree grow(const MatrixXd& x, const std::vector<double>& sa, const std::vector<double>& sb,
                  const std::vector<bool>& included, int max_depth, int max_features, std::uint64_t seed,
                  const Criterion& crit) {
    const auto n = static_cast<std::size_t>(x.rows());
    const auto f_count = static_cast<int>(x.cols());

    std::vector<std::vector<std::uint32_t>> order(static_cast<std::size_t>(f_count));
    for (int f = 0; f < f_count; ++f) {
        auto& o = order[static_cast<std::size_t>(f)];
        for (std::size_t i = 0; i < n; ++i) {
            if (included[i]) o.push_back(static_cast<std::uint32_t>(i));
        }
        std::stable_sort(o.begin(), o.end(), [&](std::uint32_t p, std::uint32_t q) { return x(p, f) < x(q, f); });
    }

    DecisionTree tree;
    tree.nodes.emplace_back();
    std::vector<int> node_of(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        if (included[i]) node_of[i] = 0;
    }
    std::vector<int> open = {0};
    Rng rng(seed);
    const bool subsample = max_features > 0 && max_features < f_count;

    for (int depth = 0; !open.empty(); ++depth) {
        // Map node id -> slot in this level.
        std::vector<int> slot(tree.nodes.size(), -1);
        for (std::size_t k = 0; k < open.size(); ++k) slot[static_cast<std::size_t>(open[k])] = static_cast<int>(k);

        std::vector<Stats> total(open.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (node_of[i] >= 0 && slot[static_cast<std::size_t>(node_of[i])] >= 0)
                total[static_cast<std::size_t>(slot[static_cast<std::size_t>(node_of[i])])].add(sa[i], sb[i]);
        }
        for (std::size_t k = 0; k < open.size(); ++k) tree.nodes[static_cast<std::size_t>(open[k])].value = crit.leaf(total[k]);
        if (depth >= max_depth) break;

        std::vector<bool> try_split(open.size());
        for (std::size_t k = 0; k < open.size(); ++k) try_split[k] = crit.splittable(total[k]);

        std::vector<std::vector<bool>> allowed;
        if (subsample) {
            allowed.assign(open.size(), std::vector<bool>(static_cast<std::size_t>(f_count), false));
            std::vector<int> features(static_cast<std::size_t>(f_count));
            for (std::size_t k = 0; k < open.size(); ++k) {
                std::iota(features.begin(), features.end(), 0);
                for (int j = 0; j < max_features; ++j) {
                    const auto pick = static_cast<std::size_t>(j) + rng.index(static_cast<std::uint64_t>(f_count - j));
                    std::swap(features[static_cast<std::size_t>(j)], features[pick]);
                    allowed[k][static_cast<std::size_t>(features[static_cast<std::size_t>(j)])] = true;
                }
            }
        }

        std::vector<Candidate> best(open.size());
        std::vector<Stats> left(open.size());
        std::vector<double> last(open.size());
        for (int f = 0; f < f_count; ++f) {
            std::fill(left.begin(), left.end(), Stats{});
            for (std::uint32_t i : order[static_cast<std::size_t>(f)]) {
                const int node = node_of[i];
                if (node < 0) continue;
                const int s = slot[static_cast<std::size_t>(node)];
                if (s < 0) continue;
                const auto k = static_cast<std::size_t>(s);
                if (!try_split[k] || (subsample && !allowed[k][static_cast<std::size_t>(f)])) continue;
                const double v = x(i, f);
                auto& l = left[k];
                if (l.count > 0 && v > last[k]) {
                    Stats r{total[k].a - l.a, total[k].b - l.b, total[k].count - l.count};
                    if (crit.admissible(l) && crit.admissible(r)) {
                        const double g = crit.gain(l, r, total[k]);
                        auto& b = best[k];
                        if (g > crit.min_gain() && (b.feature < 0 || g > b.gain + 1e-12 * (1.0 + std::abs(b.gain)))) {
                            double mid = last[k] + (v - last[k]) / 2;
                            if (mid >= v) mid = last[k];
                            b = {g, f, mid};
                        }
                    }
                }
                l.add(sa[i], sb[i]);
                last[k] = v;
            }
        }

        std::vector<int> next;
        for (std::size_t k = 0; k < open.size(); ++k) {
            if (best[k].feature < 0) continue;
            const auto id = static_cast<std::size_t>(open[k]);
            const int l = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            tree.nodes[id].feature = best[k].feature;
            tree.nodes[id].threshold = best[k].threshold;
            tree.nodes[id].left = l;
            tree.nodes[id].right = l + 1;
            next.push_back(l);
            next.push_back(l + 1);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const int node = node_of[i];
            if (node < 0) continue;
            const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
            if (slot[static_cast<std::size_t>(node)] < 0 || nd.leaf()) {
                node_of[i] = -1;
                continue;
            }
            node_of[i] = x(static_cast<Eigen::Index>(i), nd.feature) <= nd.threshold ? nd.left : nd.right;
        }
        open = std::move(next);
    }
    return tree;
}

} // namespace detail

namespace {

void check_shapes(const MatrixXd& x, std::size_t labels) {
    if (x.rows() == 0) throw ValidationError("no training samples");
    if (static_cast<std::size_t>(x.rows()) != labels) throw ValidationError("feature rows and labels differ in length");
    if (!x.allFinite()) throw ValidationError("training features contain non-finite values");
}

} // namespace

DecisionTree train_tree_weighted(const MatrixXd& x, const Labels& y, const std::vector<int>& weights,
                                 const TreeOptions& options) {
    check_shapes(x, y.size());
    if (options.max_depth < 1) throw ConfigError("tree max_depth must be >= 1");
    if (options.min_leaf < 1) throw ConfigError("tree min_leaf must be >= 1");
    if (weights.size() != y.size()) throw ValidationError("weights and labels differ in length");
    const auto n = y.size();
    std::vector<double> sa(n), sb(n);
    std::vector<bool> included(n);
    for (std::size_t i = 0; i < n; ++i) {
        sb[i] = weights[i];
        sa[i] = y[i] ? weights[i] : 0.0;
        included[i] = weights[i] > 0;
    }
    detail::GiniCriterion crit{options.min_leaf};
    return detail::grow(x, sa, sb, included, options.max_depth, options.max_features, options.seed, crit);
}

DecisionTree train_tree(const MatrixXd& x, const Labels& y, const TreeOptions& options) {
    return train_tree_weighted(x, y, std::vector<int>(y.size(), 1), options);
}

double RandomForest::predict(const VectorXd& x) const {
    if (trees.empty()) throw ModelError("empty forest");
    double s = 0.0;
    for (const auto& t : trees) s += t.evaluate(x);
    return s / static_cast<double>(trees.size());
}

RandomForest train_forest(const MatrixXd& x, const Labels& y, const ForestOptions& options) {
    check_shapes(x, y.size());
    if (options.n_trees < 1) throw ConfigError("forest n_trees must be >= 1");
    const auto n = y.size();
    RandomForest forest;
    forest.trees.reserve(static_cast<std::size_t>(options.n_trees));
    for (int t = 0; t < options.n_trees; ++t) {
        const auto tree_seed = derive_seed(options.seed, static_cast<std::uint64_t>(t));
        std::vector<int> w(n, 1);
        if (options.bootstrap) {
            Rng rng(derive_seed(tree_seed, 0));
            std::fill(w.begin(), w.end(), 0);
            for (std::size_t i = 0; i < n; ++i) ++w[rng.index(n)];
        }
        TreeOptions to = options.tree;
        to.seed = derive_seed(tree_seed, 1);
        if (options.subsample_features && to.max_features == 0)
            to.max_features = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(x.cols())))));
        if (!options.subsample_features) to.max_features = 0;
        forest.trees.push_back(train_tree_weighted(x, y, w, to));
    }
    return forest;
}

DecisionTree fit_gradient_tree(const MatrixXd& x, const VectorXd& grad, const VectorXd& hess, int max_depth,
                               double lambda, double min_child_weight) {
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<double> sa(grad.data(), grad.data() + n), sb(hess.data(), hess.data() + n);
    detail::SecondOrderCriterion crit{lambda, min_child_weight};
    return detail::grow(x, sa, sb, std::vector<bool>(n, true), max_depth, 0, 0, crit);
}

} // namespace lyricpref
