#include "doctest.h"

#include "lyricpref/analysis.hpp"
#include "lyricpref/errors.hpp"

#include "../support.hpp"

#include <regex>

using namespace lyricpref;

namespace {

std::vector<MeanFeatures> random_means(int n, Rng& rng) {
    std::vector<MeanFeatures> out(n);
    for (auto& m : out)
        for (auto& v : m.values) v = rng.normal();
    return out;
}

// Plain Newton-Raphson on the twelve-term design built from scratch.
VectorXd oracle_fit(const std::vector<MeanFeatures>& means, const Labels& y) {
    const int n = static_cast<int>(means.size());
    const std::array<int, 9> order = {kSurprisal, kEntropy, kNpmiUni, kNpmiBi, kAbstraction,
                                      kValence,   kImagery, kEnergy,  kBanality};
    MatrixXd z(n, 9);
    for (int c = 0; c < 9; ++c) {
        double mu = 0, var = 0;
        for (const auto& m : means) mu += m[c];
        mu /= n;
        for (const auto& m : means) var += (m[c] - mu) * (m[c] - mu);
        const double sd = std::sqrt(var / n);
        for (int i = 0; i < n; ++i) z(i, c) = (means[i][c] - mu) / sd;
    }
    MatrixXd x(n, 13);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        for (int k = 0; k < 9; ++k) x(i, 1 + k) = z(i, order[k]);
        x(i, 10) = z(i, kSurprisal) * z(i, kEntropy) * z(i, kBanality) * z(i, kNpmiUni) * z(i, kNpmiBi);
        x(i, 11) = z(i, kImagery) * z(i, kEnergy) * z(i, kAbstraction) * z(i, kValence);
        x(i, 12) = z.row(i).prod();
    }
    VectorXd b = VectorXd::Zero(13);
    for (int it = 0; it < 100; ++it) {
        VectorXd g = VectorXd::Zero(13);
        MatrixXd h = MatrixXd::Zero(13, 13);
        for (int i = 0; i < n; ++i) {
            const double p = 1.0 / (1.0 + std::exp(-x.row(i).dot(b)));
            g += x.row(i).transpose() * (y[i] - p);
            h += p * (1 - p) * x.row(i).transpose() * x.row(i);
        }
        b += h.ldlt().solve(g);
        if (g.cwiseAbs().maxCoeff() < 1e-10) break;
    }
    return b;
}

} // namespace

TEST_CASE("Wald p-values") {
    CHECK(wald_p_value(0.0) == 1.0);
    CHECK(wald_p_value(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(wald_p_value(-1.959963984540054) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(wald_p_value(2.5758293035489) == doctest::Approx(0.01).epsilon(1e-10));
}

TEST_CASE("interaction fit agrees with an independent Newton solve") {
    Rng rng(19);
    const auto means = random_means(300, rng);
    Labels y;
    for (const auto& m : means) y.push_back(rng.bernoulli(1.0 / (1.0 + std::exp(-(0.8 * m[kSurprisal] - 0.5 * m[kImagery])))));
    const auto r = fit_interactions(means, y, "A1");
    REQUIRE(r.converged);
    REQUIRE(r.terms.size() == 12);
    for (int k = 0; k < 12; ++k) CHECK(r.terms[k].name == kInteractionTermNames[k]);
    const auto b = oracle_fit(means, y);
    // 1e-8 ridge moves the solution by far less than this tolerance
    CHECK(r.intercept == doctest::Approx(b(0)).epsilon(1e-5));
    for (int k = 0; k < 12; ++k) CHECK(r.terms[k].coefficient == doctest::Approx(b(1 + k)).epsilon(1e-5));
    CHECK(r.term("surprisal").coefficient > 0);
    CHECK(r.term("imagery").coefficient < 0);
    CHECK(r.term("surprisal").p_value < 0.01);
    for (const auto& t : r.terms) {
        CHECK(t.z == doctest::Approx(t.coefficient / t.std_error));
        CHECK(t.p_value == doctest::Approx(wald_p_value(t.z)));
    }
    const auto csv = interactions_csv(r);
    CHECK(csv.rfind("term,coef,std_err,z,p_value\nsurprisal,", 0) == 0);
}

TEST_CASE("interaction fit input checks") {
    Rng rng(20);
    auto means = random_means(20, rng);
    Labels y(20, 0);
    y[0] = 1;
    CHECK_THROWS_AS(fit_interactions(means, y), ValidationError);
    means = random_means(40, rng);
    CHECK_THROWS_AS(fit_interactions(means, Labels(40, 1)), ValidationError);
    Labels mixed(40);
    for (int i = 0; i < 40; ++i) mixed[i] = i % 2;
    for (auto& m : means) m[kBanality] = 3.0;
    const auto r = fit_interactions(means, mixed);
    CHECK_FALSE(r.warnings.empty());
    CHECK(r.term("banality").coefficient == 0.0);
}

TEST_CASE("preference profiles average each class") {
    std::vector<MeanFeatures> means(4);
    for (int i = 0; i < 4; ++i)
        for (int c = 0; c < 9; ++c) means[i][c] = i * 10 + c;
    const auto p = preference_profile(std::span<const MeanFeatures>(means), Labels{1, 0, 1, 0}, "A9");
    CHECK(p.n_positive == 2);
    CHECK(p.positive[0] == 10.0);
    CHECK(p.negative[8] == 28.0);
    const std::vector<ProfileData> list{p};
    CHECK(parse_profile_csv(profile_csv(list)) == list);
    CHECK_THROWS(preference_profile(std::span<const MeanFeatures>(means), Labels{1, 1, 1, 1}));
}

TEST_CASE("radar chart is deterministic and labelled") {
    ProfileData p;
    p.annotator = "A2";
    for (int c = 0; c < 9; ++c) {
        p.positive[c] = 1.0 + c;
        p.negative[c] = 2.0 + 0.5 * c;
    }
    p.positive[4] = p.negative[4]; // equal values sit mid-radius
    p.n_positive = 3;
    p.n_negative = 5;
    const auto svg = render_radar(p);
    CHECK(svg == render_radar(p));
    CHECK(svg.rfind("<svg", 0) == 0);
    const std::regex axis("class=\"axis\"");
    CHECK(std::distance(std::sregex_iterator(svg.begin(), svg.end(), axis), std::sregex_iterator()) == 9);
    for (const char* name : kFeatureNames) CHECK(svg.find(name) != std::string::npos);
    CHECK(svg.find("class=\"positive\"") != std::string::npos);
    CHECK(svg.find("#1f4fd1") != std::string::npos);
    CHECK(svg.find("#d12a1f") != std::string::npos);
    p.positive[0] = std::nan("");
    CHECK_THROWS_AS(render_radar(p), FeatureError);
}
