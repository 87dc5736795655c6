#include "doctest.h"

#include "lyricpref/errors.hpp"
#include "lyricpref/recurrent.hpp"

#include "../support.hpp"

using namespace lyricpref;

namespace {

std::vector<MatrixXd> random_sequences(int n, int f, Rng& rng) {
    std::vector<MatrixXd> xs;
    for (int i = 0; i < n; ++i) {
        MatrixXd x(2 + static_cast<int>(rng.index(5)), f);
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            for (Eigen::Index c = 0; c < f; ++c) x(r, c) = rng.normal();
        xs.push_back(x);
    }
    return xs;
}

} // namespace

TEST_CASE("analytic gradients match finite differences in every block") {
    Rng rng(8);
    for (bool bidirectional : {true, false}) {
        BiLstmAttention<double> net(4, 3, bidirectional, 17);
        const auto xs = random_sequences(3, 4, rng);
        const std::vector<int> ys{1, 0, 1};
        const auto check = check_gradients(net, std::span<const MatrixXd>(xs), std::span<const int>(ys));
        CHECK(check.max_relative_error.size() == (bidirectional ? 9u : 6u));
        for (const auto& [name, err] : check.max_relative_error) {
            INFO(name);
            CHECK(err < 1e-4);
        }
    }
}

TEST_CASE("attention weights form a distribution") {
    BiLstmAttention<double> net(3, 4, true, 1);
    Rng rng(3);
    const auto xs = random_sequences(5, 3, rng);
    for (const auto& x : xs) {
        const auto a = net.attention_weights(x);
        CHECK(a.size() == x.rows());
        CHECK(a.sum() == doctest::Approx(1.0));
        CHECK(a.minCoeff() >= 0.0);
        const double p = net.probability(x);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
    MatrixXd one(1, 3);
    one << 0.1, 0.2, 0.3;
    CHECK(net.attention_weights(one)(0) == 1.0);
    CHECK_THROWS(net.logit(MatrixXd::Zero(2, 5)));
}

TEST_CASE("parameter flattening round-trips") {
    BiLstmAttention<double> net(3, 2, true, 5);
    const auto flat = net.params().flatten();
    CHECK(flat.size() == net.params().size());
    // 2 directions x (4H x F + 4H x H + 4H) + attention 2H + head 2H + bias
    CHECK(flat.size() == 2 * (8 * 3 + 8 * 2 + 8) + 4 + 4 + 1);
    auto z = net.params().zeros_like();
    z.assign(flat);
    CHECK(z.flatten() == flat);
}

TEST_CASE("training lowers the loss and is reproducible") {
    Rng rng(12);
    auto xs = random_sequences(80, 3, rng);
    Labels y;
    for (const auto& x : xs) y.push_back(x.col(0).mean() > 0);
    RecurrentOptions o;
    o.learning_rate = 0.01;
    o.max_epochs = 30;
    o.patience = 29;
    o.seed = 4;
    const auto m = train_recurrent<double>(xs, y, xs, y, o);
    REQUIRE(m.history.train_loss.size() >= 2);
    CHECK(m.history.train_loss.back() < m.history.train_loss.front());
    const auto again = train_recurrent<double>(xs, y, xs, y, o);
    CHECK(again.net.params().flatten() == m.net.params().flatten());
    int ok = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) ok += (m.predict(xs[i]) >= 0.5) == (y[i] == 1);
    CHECK(ok > 64);
}

TEST_CASE("early stopping keeps the best validation epoch") {
    Rng rng(13);
    auto xs = random_sequences(40, 2, rng);
    Labels y;
    for (std::size_t i = 0; i < xs.size(); ++i) y.push_back(static_cast<int>(i % 2));
    RecurrentOptions o;
    o.learning_rate = 0.05;
    o.max_epochs = 200;
    o.patience = 3;
    const auto m = train_recurrent<double>(std::span<const MatrixXd>(xs).first(30), Labels(y.begin(), y.begin() + 30),
                                           std::span<const MatrixXd>(xs).last(10), Labels(y.begin() + 30, y.end()), o);
    const auto& h = m.history;
    REQUIRE(h.best_epoch >= 0);
    const double best = h.validation_loss[static_cast<std::size_t>(h.best_epoch)];
    for (double v : h.validation_loss) CHECK(best <= v);
    if (h.stopped_early) CHECK(h.validation_loss.size() == static_cast<std::size_t>(h.best_epoch) + 1 + 3);
}
