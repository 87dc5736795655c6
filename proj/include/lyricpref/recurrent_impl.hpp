#pragma once

#include "lyricpref/errors.hpp"
#include "lyricpref/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lyricpref {

namespace recurrent_detail {

template <typename Scalar>
Scalar sigmoid(Scalar z) {
    using std::exp;
    if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-z));
    const Scalar e = exp(z);
    return e / (Scalar(1) + e);
}

template <typename Scalar>
Scalar softplus(Scalar z) {
    using std::exp;
    using std::log1p;
    return z > Scalar(0) ? z + log1p(exp(-z)) : log1p(exp(z));
}

template <typename Scalar>
Vector<Scalar> sigmoid(const Eigen::Ref<const Vector<Scalar>>& z) {
    return z.unaryExpr([](Scalar v) { return sigmoid(v); });
}

} // namespace recurrent_detail

template <typename Scalar>
Eigen::Index RecurrentParams<Scalar>::size() const {
    Eigen::Index n = 0;
    visit([&](const char*, const auto& block) { n += block.size(); });
    return n;
}

template <typename Scalar>
Vector<Scalar> RecurrentParams<Scalar>::flatten() const {
    Vector<Scalar> out(size());
    Eigen::Index at = 0;
    visit([&](const char*, const auto& block) {
        out.segment(at, block.size()) = Eigen::Map<const Vector<Scalar>>(block.data(), block.size());
        at += block.size();
    });
    return out;
}

template <typename Scalar>
void RecurrentParams<Scalar>::assign(const Vector<Scalar>& flat) {
    if (flat.size() != size()) throw ModelError("parameter vector has the wrong length");
    Eigen::Index at = 0;
    visit([&](const char*, auto& block) {
        Eigen::Map<Vector<Scalar>>(block.data(), block.size()) = flat.segment(at, block.size());
        at += block.size();
    });
}

template <typename Scalar>
RecurrentParams<Scalar> RecurrentParams<Scalar>::zeros_like() const {
    RecurrentParams out = *this;
    out.visit([](const char*, auto& block) { block.setZero(); });
    return out;
}

template <typename Scalar>
BiLstmAttention<Scalar>::BiLstmAttention(Eigen::Index input, Eigen::Index hidden, bool bidirectional,
                                         std::uint64_t seed) {
    if (input < 1 || hidden < 1) throw ConfigError("recurrent input and hidden widths must be >= 1");
    Rng rng(seed);
    const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
    auto fill = [&](auto& block, double bound) {
        for (Eigen::Index i = 0; i < block.size(); ++i) block.data()[i] = Scalar(rng.uniform(-bound, bound));
    };
    auto init_direction = [&](LstmDirection<Scalar>& d) {
        d.w.resize(4 * hidden, input);
        d.u.resize(4 * hidden, hidden);
        d.b.resize(4 * hidden);
        fill(d.w, k);
        fill(d.u, k);
        fill(d.b, k);
        d.b.segment(hidden, hidden).array() += Scalar(1); // forget gate starts open
    };
    init_direction(params_.fwd);
    if (bidirectional) init_direction(params_.bwd);
    const Eigen::Index d = bidirectional ? 2 * hidden : hidden;
    const double kd = 1.0 / std::sqrt(static_cast<double>(d));
    params_.attention.resize(d);
    params_.head.resize(d);
    params_.head_bias.resize(1);
    fill(params_.attention, kd);
    fill(params_.head, kd);
    fill(params_.head_bias, kd);
}

template <typename Scalar>
void BiLstmAttention<Scalar>::check_input(const Matrix<Scalar>& x) const {
    if (x.rows() < 1) throw ModelError("empty input sequence");
    if (x.cols() != input_width())
        throw ModelError("input width " + std::to_string(x.cols()) + " does not match network width " +
                         std::to_string(input_width()));
}

template <typename Scalar>
void BiLstmAttention<Scalar>::run_direction(const LstmDirection<Scalar>& p, const Matrix<Scalar>& x, bool reverse,
                                            DirectionCache& c) const {
    using recurrent_detail::sigmoid;
    const Eigen::Index len = x.rows();
    const Eigen::Index h_size = hidden();
    for (auto* v : {&c.i, &c.f, &c.g, &c.o, &c.c, &c.tc, &c.h}) v->assign(static_cast<std::size_t>(len), Vector<Scalar>());
    Vector<Scalar> h = Vector<Scalar>::Zero(h_size);
    Vector<Scalar> cell = Vector<Scalar>::Zero(h_size);
    for (Eigen::Index s = 0; s < len; ++s) {
        const auto t = static_cast<std::size_t>(reverse ? len - 1 - s : s);
        const Vector<Scalar> z = p.w * x.row(static_cast<Eigen::Index>(t)).transpose() + p.u * h + p.b;
        c.i[t] = sigmoid<Scalar>(z.segment(0, h_size));
        c.f[t] = sigmoid<Scalar>(z.segment(h_size, h_size));
        c.g[t] = z.segment(2 * h_size, h_size).array().tanh();
        c.o[t] = sigmoid<Scalar>(z.segment(3 * h_size, h_size));
        cell = c.f[t].cwiseProduct(cell) + c.i[t].cwiseProduct(c.g[t]);
        c.c[t] = cell;
        c.tc[t] = cell.array().tanh();
        h = c.o[t].cwiseProduct(c.tc[t]);
        c.h[t] = h;
    }
}

template <typename Scalar>
void BiLstmAttention<Scalar>::forward(const Matrix<Scalar>& x, Cache& cache) const {
    check_input(x);
    const Eigen::Index len = x.rows();
    const Eigen::Index h_size = hidden();
    const bool bi = bidirectional();
    run_direction(params_.fwd, x, false, cache.fwd);
    if (bi) run_direction(params_.bwd, x, true, cache.bwd);

    cache.states.resize(len, bi ? 2 * h_size : h_size);
    for (Eigen::Index t = 0; t < len; ++t) {
        cache.states.row(t).head(h_size) = cache.fwd.h[static_cast<std::size_t>(t)].transpose();
        if (bi) cache.states.row(t).tail(h_size) = cache.bwd.h[static_cast<std::size_t>(t)].transpose();
    }
    const Vector<Scalar> scores = cache.states * params_.attention;
    cache.alpha = (scores.array() - scores.maxCoeff()).exp();
    cache.alpha /= cache.alpha.sum();
    cache.context = cache.states.transpose() * cache.alpha;
    cache.logit = params_.head.dot(cache.context) + params_.head_bias(0);
}

template <typename Scalar>
void BiLstmAttention<Scalar>::backprop_direction(const LstmDirection<Scalar>& p, const Matrix<Scalar>& x,
                                                 bool reverse, const DirectionCache& c, const Matrix<Scalar>& dh,
                                                 LstmDirection<Scalar>& grad) const {
    const Eigen::Index len = x.rows();
    const Eigen::Index h_size = hidden();
    const Vector<Scalar> zero = Vector<Scalar>::Zero(h_size);
    Vector<Scalar> dh_next = zero;
    Vector<Scalar> dc_next = zero;
    Vector<Scalar> dz(4 * h_size);
    for (Eigen::Index s = len - 1; s >= 0; --s) {
        const Eigen::Index t = reverse ? len - 1 - s : s;
        const auto ti = static_cast<std::size_t>(t);
        const bool has_prev = reverse ? t + 1 < len : t > 0;
        const auto tp = static_cast<std::size_t>(reverse ? t + 1 : t - 1);
        const Vector<Scalar>& c_prev = has_prev ? c.c[tp] : zero;
        const Vector<Scalar>& h_prev = has_prev ? c.h[tp] : zero;

        const auto& i = c.i[ti];
        const auto& f = c.f[ti];
        const auto& g = c.g[ti];
        const auto& o = c.o[ti];
        const auto& tc = c.tc[ti];
        const Vector<Scalar> dht = dh.row(t).transpose() + dh_next;
        const Vector<Scalar> dct =
            dht.cwiseProduct(o).cwiseProduct((Scalar(1) - tc.array().square()).matrix()) + dc_next;

        dz.segment(0, h_size) = dct.cwiseProduct(g).cwiseProduct(i).cwiseProduct((Scalar(1) - i.array()).matrix());
        dz.segment(h_size, h_size) =
            dct.cwiseProduct(c_prev).cwiseProduct(f).cwiseProduct((Scalar(1) - f.array()).matrix());
        dz.segment(2 * h_size, h_size) = dct.cwiseProduct(i).cwiseProduct((Scalar(1) - g.array().square()).matrix());
        dz.segment(3 * h_size, h_size) =
            dht.cwiseProduct(tc).cwiseProduct(o).cwiseProduct((Scalar(1) - o.array()).matrix());

        grad.w.noalias() += dz * x.row(t);
        grad.u.noalias() += dz * h_prev.transpose();
        grad.b += dz;
        dh_next.noalias() = p.u.transpose() * dz;
        dc_next = dct.cwiseProduct(f);
    }
}

template <typename Scalar>
void BiLstmAttention<Scalar>::backward(const Matrix<Scalar>& x, const Cache& cache, Scalar dlogit,
                                       RecurrentParams<Scalar>& grad) const {
    const Eigen::Index h_size = hidden();
    grad.head += dlogit * cache.context;
    grad.head_bias(0) += dlogit;
    const Vector<Scalar> dcontext = dlogit * params_.head;

    const Vector<Scalar> dalpha = cache.states * dcontext;
    Matrix<Scalar> dstates = cache.alpha * dcontext.transpose();
    const Vector<Scalar> dscores =
        cache.alpha.cwiseProduct((dalpha.array() - cache.alpha.dot(dalpha)).matrix());
    grad.attention.noalias() += cache.states.transpose() * dscores;
    dstates.noalias() += dscores * params_.attention.transpose();

    backprop_direction(params_.fwd, x, false, cache.fwd, dstates.leftCols(h_size), grad.fwd);
    if (bidirectional()) backprop_direction(params_.bwd, x, true, cache.bwd, dstates.rightCols(h_size), grad.bwd);
}

template <typename Scalar>
Scalar BiLstmAttention<Scalar>::logit(const Matrix<Scalar>& x) const {
    Cache cache;
    forward(x, cache);
    return cache.logit;
}

template <typename Scalar>
Scalar BiLstmAttention<Scalar>::probability(const Matrix<Scalar>& x) const {
    return recurrent_detail::sigmoid(logit(x));
}

template <typename Scalar>
Vector<Scalar> BiLstmAttention<Scalar>::attention_weights(const Matrix<Scalar>& x) const {
    Cache cache;
    forward(x, cache);
    return cache.alpha;
}

template <typename Scalar>
Scalar BiLstmAttention<Scalar>::loss(std::span<const Matrix<Scalar>> xs, std::span<const int> ys,
                                     RecurrentParams<Scalar>* grad) const {
    if (xs.size() != ys.size() || xs.empty()) throw ModelError("batch inputs and labels differ in length or are empty");
    if (grad) *grad = params_.zeros_like();
    const Scalar scale = Scalar(1) / static_cast<Scalar>(xs.size());
    Scalar total(0);
    Cache cache;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        forward(xs[k], cache);
        const Scalar y = ys[k] ? Scalar(1) : Scalar(0);
        total += recurrent_detail::softplus(cache.logit) - y * cache.logit;
        if (grad) backward(xs[k], cache, (recurrent_detail::sigmoid(cache.logit) - y) * scale, *grad);
    }
    return total * scale;
}

template <typename Scalar>
Matrix<Scalar> RecurrentModel<Scalar>::standardize(const Matrix<Scalar>& x) const {
    if (x.cols() != input_mean.size())
        throw ModelError("input width " + std::to_string(x.cols()) + " does not match model width " +
                         std::to_string(input_mean.size()));
    return (x.rowwise() - input_mean.transpose()).array().rowwise() / input_scale.transpose().array();
}

template <typename Scalar>
RecurrentModel<Scalar> train_recurrent(std::span<const Matrix<Scalar>> xs, const Labels& y,
                                       std::span<const Matrix<Scalar>> val_xs, const Labels& val_y,
                                       const RecurrentOptions& options) {
    if (xs.empty() || xs.size() != y.size()) throw ValidationError("training sequences and labels differ in length or are empty");
    if (val_xs.size() != val_y.size()) throw ValidationError("validation sequences and labels differ in length");
    if (options.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (options.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (options.early_stopping && options.patience >= options.max_epochs)
        throw ConfigError("patience must be smaller than max_epochs");
    if (!(options.learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (options.early_stopping && val_xs.empty()) throw ValidationError("early stopping needs a validation set");

    const Eigen::Index width = xs.front().cols();
    auto check_width = [&](const Matrix<Scalar>& m) {
        if (m.cols() != width)
            throw ValidationError("sequence width " + std::to_string(m.cols()) + " differs from " + std::to_string(width));
        if (m.rows() < 1) throw ValidationError("empty sequence");
        if (!m.allFinite()) throw ValidationError("sequence contains non-finite values");
    };
    for (const auto& m : xs) check_width(m);
    for (const auto& m : val_xs) check_width(m);

    RecurrentModel<Scalar> model;
    {
        Vector<Scalar> sum = Vector<Scalar>::Zero(width), sq = Vector<Scalar>::Zero(width);
        Scalar rows(0);
        for (const auto& m : xs) {
            sum += m.colwise().sum().transpose();
            rows += static_cast<Scalar>(m.rows());
        }
        model.input_mean = sum / rows;
        for (const auto& m : xs) sq += (m.rowwise() - model.input_mean.transpose()).array().square().colwise().sum().matrix().transpose();
        model.input_scale = (sq / rows).array().sqrt();
        for (Eigen::Index c = 0; c < width; ++c) {
            if (!(model.input_scale(c) > Scalar(1e-12))) model.input_scale(c) = Scalar(1);
        }
    }
    std::vector<Matrix<Scalar>> train, val;
    train.reserve(xs.size());
    for (const auto& m : xs) train.push_back(model.standardize(m));
    for (const auto& m : val_xs) val.push_back(model.standardize(m));

    const Eigen::Index hidden = options.hidden > 0 ? options.hidden : width;
    model.net = BiLstmAttention<Scalar>(width, hidden, options.bidirectional, derive_seed(options.seed, 0));
    Rng rng(derive_seed(options.seed, 1));

    Vector<Scalar> theta = model.net.params().flatten();
    Vector<Scalar> m1 = Vector<Scalar>::Zero(theta.size()), m2 = Vector<Scalar>::Zero(theta.size());
    const Scalar lr(options.learning_rate), beta1(0.9), beta2(0.999), eps(1e-8);
    long long step = 0;

    Vector<Scalar> best = theta;
    Scalar best_val = std::numeric_limits<Scalar>::infinity();
    int since_best = 0;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<Matrix<Scalar>> batch_x;
    std::vector<int> batch_y;
    RecurrentParams<Scalar> grad;

    for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
        rng.shuffle(order);
        Scalar epoch_loss(0);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
            batch_x.clear();
            batch_y.clear();
            for (std::size_t k = start; k < end; ++k) {
                batch_x.push_back(train[order[k]]);
                batch_y.push_back(y[order[k]]);
            }
            const Scalar l = model.net.loss(batch_x, batch_y, &grad);
            epoch_loss += l * static_cast<Scalar>(end - start);
            const Vector<Scalar> g = grad.flatten();
            ++step;
            m1 = beta1 * m1 + (Scalar(1) - beta1) * g;
            m2 = beta2 * m2 + (Scalar(1) - beta2) * g.cwiseAbs2();
            const Scalar c1 = Scalar(1) - std::pow(beta1, static_cast<Scalar>(step));
            const Scalar c2 = Scalar(1) - std::pow(beta2, static_cast<Scalar>(step));
            theta.array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
            model.net.params().assign(theta);
        }
        model.history.train_loss.push_back(static_cast<double>(epoch_loss / static_cast<Scalar>(train.size())));

        if (!val.empty()) {
            const Scalar vl = model.net.loss(val, val_y, nullptr);
            model.history.validation_loss.push_back(static_cast<double>(vl));
            if (vl < best_val) {
                best_val = vl;
                best = theta;
                model.history.best_epoch = epoch;
                since_best = 0;
            } else if (++since_best >= options.patience && options.early_stopping) {
                model.history.stopped_early = true;
                break;
            }
        }
    }
    if (options.early_stopping) {
        model.net.params().assign(best);
    } else {
        model.history.best_epoch = static_cast<int>(model.history.train_loss.size()) - 1;
    }
    return model;
}

template <typename Scalar>
GradientCheck check_gradients(const BiLstmAttention<Scalar>& net, std::span<const Matrix<Scalar>> xs,
                              std::span<const int> ys, double step) {
    RecurrentParams<Scalar> analytic;
    net.loss(xs, ys, &analytic);
    BiLstmAttention<Scalar> probe = net;
    const Vector<Scalar> base = net.params().flatten();
    const Vector<Scalar> grad = analytic.flatten();

    GradientCheck out;
    Eigen::Index at = 0;
    net.params().visit([&](const char* name, const auto& block) {
        double worst = 0.0;
        for (Eigen::Index k = 0; k < block.size(); ++k, ++at) {
            Vector<Scalar> theta = base;
            theta(at) = base(at) + Scalar(step);
            probe.params().assign(theta);
            const Scalar up = probe.loss(xs, ys, nullptr);
            theta(at) = base(at) - Scalar(step);
            probe.params().assign(theta);
            const Scalar down = probe.loss(xs, ys, nullptr);
            const double numeric = static_cast<double>((up - down) / Scalar(2 * step));
            const double a = static_cast<double>(grad(at));
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-7});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
        out.max_relative_error.emplace_back(name, worst);
        out.overall = std::max(out.overall, worst);
    });
    return out;
}

} // namespace lyricpref
