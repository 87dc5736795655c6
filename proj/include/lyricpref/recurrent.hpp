#pragma once

#include "lyricpref/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lyricpref {

// One LSTM direction. Gate blocks are stacked in the order i, f, g, o.
template <typename Scalar>
struct LstmDirection {
    Matrix<Scalar> w; // 4H x F
    Matrix<Scalar> u; // 4H x H
    Vector<Scalar> b; // 4H
};

template <typename Scalar>
struct RecurrentParams {
    LstmDirection<Scalar> fwd;
    LstmDirection<Scalar> bwd; // empty when unidirectional
    Vector<Scalar> attention;  // D = H or 2H
    Vector<Scalar> head;       // D
    Vector<Scalar> head_bias;  // 1

    // Calls f(name, block) for every parameter block in a fixed order.
    template <typename F>
    void visit(F&& f) {
        f("forward.input", fwd.w);
        f("forward.recurrent", fwd.u);
        f("forward.bias", fwd.b);
        if (bwd.w.size() > 0) {
            f("backward.input", bwd.w);
            f("backward.recurrent", bwd.u);
            f("backward.bias", bwd.b);
        }
        f("attention", attention);
        f("head", head);
        f("head.bias", head_bias);
    }
    template <typename F>
    void visit(F&& f) const {
        const_cast<RecurrentParams*>(this)->visit([&](const char* name, const auto& block) { f(name, block); });
    }

    Eigen::Index size() const;
    Vector<Scalar> flatten() const;
    void assign(const Vector<Scalar>& flat);
    RecurrentParams zeros_like() const;
};

// Bidirectional LSTM over the rows of a sequence, global dot-product
// attention pooling of the concatenated states, logistic head.
template <typename Scalar>
class BiLstmAttention {
public:
    BiLstmAttention() = default;
    BiLstmAttention(Eigen::Index input, Eigen::Index hidden, bool bidirectional, std::uint64_t seed);

    Eigen::Index input_width() const { return params_.fwd.w.cols(); }
    Eigen::Index hidden() const { return params_.fwd.u.cols(); }
    bool bidirectional() const { return params_.bwd.w.size() > 0; }

    RecurrentParams<Scalar>& params() { return params_; }
    const RecurrentParams<Scalar>& params() const { return params_; }

    Scalar logit(const Matrix<Scalar>& x) const;
    Scalar probability(const Matrix<Scalar>& x) const;
    Vector<Scalar> attention_weights(const Matrix<Scalar>& x) const;

    // Mean binary cross-entropy over the batch. When `grad` is given it is
    // overwritten with the gradient of that mean.
    Scalar loss(std::span<const Matrix<Scalar>> xs, std::span<const int> ys, RecurrentParams<Scalar>* grad) const;

private:
    struct DirectionCache {
        std::vector<Vector<Scalar>> i, f, g, o, c, tc, h;
    };
    struct Cache {
        DirectionCache fwd, bwd;
        Matrix<Scalar> states; // L x D
        Vector<Scalar> alpha;
        Vector<Scalar> context;
        Scalar logit{};
    };

    void check_input(const Matrix<Scalar>& x) const;
    void run_direction(const LstmDirection<Scalar>& p, const Matrix<Scalar>& x, bool reverse, DirectionCache& c) const;
    void backprop_direction(const LstmDirection<Scalar>& p, const Matrix<Scalar>& x, bool reverse,
                            const DirectionCache& c, const Matrix<Scalar>& dh, LstmDirection<Scalar>& grad) const;
    void forward(const Matrix<Scalar>& x, Cache& cache) const;
    void backward(const Matrix<Scalar>& x, const Cache& cache, Scalar dlogit, RecurrentParams<Scalar>& grad) const;

    RecurrentParams<Scalar> params_;
};

struct RecurrentOptions {
    Eigen::Index hidden = 0; // 0: the input width
    bool bidirectional = true;
    double learning_rate = 1e-4;
    int max_epochs = 500;
    int patience = 10;
    int batch_size = 32;
    bool early_stopping = true;
    std::uint64_t seed = 0;
};

struct TrainingHistory {
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
    int best_epoch = -1; // index into the loss vectors
    bool stopped_early = false;
};

template <typename Scalar>
struct RecurrentModel {
    Vector<Scalar> input_mean;
    Vector<Scalar> input_scale;
    BiLstmAttention<Scalar> net;
    TrainingHistory history;

    Matrix<Scalar> standardize(const Matrix<Scalar>& x) const;
    Scalar predict(const Matrix<Scalar>& x) const { return net.probability(standardize(x)); }
};

// Adam on minibatches in a seeded order. With early stopping the weights of
// the epoch with the lowest validation loss are returned once `patience`
// epochs pass without improvement.
template <typename Scalar>
RecurrentModel<Scalar> train_recurrent(std::span<const Matrix<Scalar>> xs, const Labels& y,
                                       std::span<const Matrix<Scalar>> val_xs, const Labels& val_y,
                                       const RecurrentOptions& options);

struct GradientCheck {
    std::vector<std::pair<std::string, double>> max_relative_error; // per parameter block
    double overall = 0.0;
};

// Central finite differences against the analytic gradient of `loss`.
template <typename Scalar>
GradientCheck check_gradients(const BiLstmAttention<Scalar>& net, std::span<const Matrix<Scalar>> xs,
                              std::span<const int> ys, double step = 1e-5);

extern template struct RecurrentParams<double>;
extern template class BiLstmAttention<double>;
extern template struct RecurrentModel<double>;

} // namespace lyricpref

#include "lyricpref/recurrent_impl.hpp"
