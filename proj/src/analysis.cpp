#include "lyricpref/analysis.hpp"

#include "lyricpref/errors.hpp"
#include "lyricpref/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace lyricpref {

const std::array<const char*, kInteractionTerms> kInteractionTermNames = {
    "surprisal", "entropy", "npmi_uni", "npmi_bi", "abstraction", "valence",
    "imagery",   "energy",  "banality", "I1",      "I2",          "I_all"};

namespace {

// Mean-feature column for each of the first nine table rows.
constexpr std::array<int, kMeanFeatureCount> kTableColumns = {kSurprisal, kEntropy, kNpmiUni, kNpmiBi, kAbstraction,
                                                              kValence,   kImagery, kEnergy,  kBanality};
constexpr std::array<int, 5> kLinguistic = {kSurprisal, kEntropy, kBanality, kNpmiUni, kNpmiBi};
constexpr std::array<int, 4> kStylistic = {kImagery, kEnergy, kAbstraction, kValence};

} // namespace

const InteractionTerm& InteractionReport::term(const std::string& name) const {
    for (const auto& t : terms) {
        if (t.name == name) return t;
    }
    throw ValidationError("no interaction term named " + name);
}

double wald_p_value(double z) {
    if (std::isnan(z)) return 1.0;
    return std::clamp(std::erfc(std::abs(z) / std::sqrt(2.0)), 0.0, 1.0);
}

InteractionReport fit_interactions(std::span<const MeanFeatures> means, const Labels& labels,
                                   const std::string& annotator) {
    const std::size_t n = means.size();
    if (n != labels.size()) throw ValidationError("mean features and labels differ in length");
    if (n < 30) throw ValidationError("interaction testing needs at least 30 lines (got " + std::to_string(n) + ")");
    std::size_t pos = 0;
    for (int v : labels) pos += v != 0;
    if (pos == 0 || pos == n) throw ValidationError("interaction testing needs both classes present");

    MatrixXd raw(static_cast<Eigen::Index>(n), kMeanFeatureCount);
    for (std::size_t i = 0; i < n; ++i) raw.row(static_cast<Eigen::Index>(i)) = means[i].as_vector().transpose();
    if (!raw.allFinite()) throw ValidationError("mean features contain non-finite values");

    const auto rows = raw.rows();
    MatrixXd z(rows, kMeanFeatureCount);
    InteractionReport report;
    report.annotator = annotator;
    report.n = n;
    for (int c = 0; c < kMeanFeatureCount; ++c) {
        const double mean = raw.col(c).mean();
        const double sd = std::sqrt((raw.col(c).array() - mean).square().sum() / static_cast<double>(rows));
        if (!(sd > 0)) {
            report.warnings.push_back(std::string("feature ") + kFeatureNames[static_cast<std::size_t>(c)] +
                                      " is constant; its standardized column is zero");
            z.col(c).setZero();
        } else {
            z.col(c) = (raw.col(c).array() - mean) / sd;
        }
    }

    MatrixXd design(rows, 1 + kInteractionTerms);
    design.col(0).setOnes();
    for (int k = 0; k < kMeanFeatureCount; ++k) design.col(1 + k) = z.col(kTableColumns[static_cast<std::size_t>(k)]);
    VectorXd i1 = VectorXd::Ones(rows), i2 = VectorXd::Ones(rows), iall = VectorXd::Ones(rows);
    for (int c : kLinguistic) i1 = i1.cwiseProduct(z.col(c));
    for (int c : kStylistic) i2 = i2.cwiseProduct(z.col(c));
    for (int c = 0; c < kMeanFeatureCount; ++c) iall = iall.cwiseProduct(z.col(c));
    design.col(10) = i1;
    design.col(11) = i2;
    design.col(12) = iall;

    VectorXd y(rows);
    for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = labels[i] ? 1.0 : 0.0;
    IrlsOptions opts;
    opts.ridge = 1e-8;
    opts.max_iterations = 200;
    const auto fit = fit_logistic_irls(design, y, opts);
    report.converged = fit.converged;
    report.iterations = fit.iterations;
    if (!fit.converged) report.warnings.push_back("IRLS did not converge within 200 iterations");
    report.intercept = fit.coefficients(0);
    for (int k = 0; k < kInteractionTerms; ++k) {
        InteractionTerm t;
        t.name = kInteractionTermNames[static_cast<std::size_t>(k)];
        t.coefficient = fit.coefficients(1 + k);
        t.std_error = std::sqrt(std::max(fit.covariance(1 + k, 1 + k), 0.0));
        t.z = t.std_error > 0 ? t.coefficient / t.std_error : 0.0;
        t.p_value = wald_p_value(t.z);
        report.terms.push_back(t);
    }
    return report;
}

std::string interactions_csv(const InteractionReport& report) {
    std::string out = "term,coef,std_err,z,p_value\n";
    char buf[160];
    for (const auto& t : report.terms) {
        std::snprintf(buf, sizeof buf, ",%.6g,%.6g,%.6g,%.6g\n", t.coefficient, t.std_error, t.z, t.p_value);
        out += t.name + buf;
    }
    return out;
}

ProfileData preference_profile(std::span<const MeanFeatures> means, const Labels& labels, const std::string& annotator) {
    if (means.size() != labels.size()) throw ValidationError("mean features and labels differ in length");
    ProfileData p;
    p.annotator = annotator;
    for (std::size_t i = 0; i < means.size(); ++i) {
        auto& side = labels[i] ? p.positive : p.negative;
        for (int c = 0; c < kMeanFeatureCount; ++c) side[static_cast<std::size_t>(c)] += means[i][c];
        ++(labels[i] ? p.n_positive : p.n_negative);
    }
    if (p.n_positive == 0 || p.n_negative == 0) throw ValidationError("a preference profile needs both classes present");
    for (auto& v : p.positive) v /= static_cast<double>(p.n_positive);
    for (auto& v : p.negative) v /= static_cast<double>(p.n_negative);
    return p;
}

ProfileData preference_profile(std::span<const FeatureTensor> tensors, const Labels& labels,
                               const std::string& annotator) {
    std::vector<MeanFeatures> means;
    means.reserve(tensors.size());
    for (const auto& t : tensors) means.push_back(timestep_means(t));
    return preference_profile(std::span<const MeanFeatures>(means), labels, annotator);
}

std::string profile_csv(std::span<const ProfileData> profiles) {
    std::string out = "annotator,feature,positive_mean,negative_mean,n_positive,n_negative\n";
    char buf[160];
    for (const auto& p : profiles) {
        for (std::size_t c = 0; c < kMeanFeatureCount; ++c) {
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%zu,%zu\n", p.positive[c], p.negative[c], p.n_positive,
                          p.n_negative);
            out += p.annotator + "," + kFeatureNames[c] + buf;
        }
    }
    return out;
}

std::vector<ProfileData> parse_profile_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line) || line != "annotator,feature,positive_mean,negative_mean,n_positive,n_negative")
        throw ParseError("unexpected profile CSV header", 1);
    std::vector<ProfileData> out;
    std::size_t c = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
        if (cells.size() != 6) throw ParseError("profile row needs 6 fields", line_no);
        if (c == 0) {
            out.emplace_back();
            out.back().annotator = cells[0];
        }
        auto& p = out.back();
        if (cells[0] != p.annotator || cells[1] != kFeatureNames[c])
            throw ParseError("profile rows out of order: expected " + p.annotator + "/" + kFeatureNames[c], line_no);
        try {
            p.positive[c] = std::stod(cells[2]);
            p.negative[c] = std::stod(cells[3]);
            p.n_positive = std::stoul(cells[4]);
            p.n_negative = std::stoul(cells[5]);
        } catch (const std::exception&) {
            throw ParseError("bad number in profile row", line_no);
        }
        c = (c + 1) % kMeanFeatureCount;
    }
    if (c != 0) throw ParseError("profile CSV ends mid-annotator", line_no);
    return out;
}

namespace {

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += ch;
        }
    }
    return out;
}

} // namespace

std::string render_radar(const ProfileData& profile) {
    for (std::size_t c = 0; c < kMeanFeatureCount; ++c) {
        if (!std::isfinite(profile.positive[c]) || !std::isfinite(profile.negative[c]))
            throw FeatureError(std::string("cannot render non-finite profile value on axis ") + kFeatureNames[c]);
    }
    constexpr double size = 480.0, cx = 240.0, cy = 250.0, radius = 160.0, inner = 0.15;
    const double pi = std::acos(-1.0);
    auto angle = [&](std::size_t c) { return -pi / 2 + 2 * pi * static_cast<double>(c) / kMeanFeatureCount; };
    char buf[256];
    std::string svg;
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                  size, size + 20, size, size + 20);
    svg += buf;
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"240\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
           xml_escape(profile.annotator.empty() ? "preference profile" : profile.annotator) + "</text>\n";

    for (double ring : {0.25, 0.5, 0.75, 1.0}) {
        std::string pts;
        for (std::size_t c = 0; c < kMeanFeatureCount; ++c) {
            const double r = radius * (inner + (1 - inner) * ring);
            std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", c ? " " : "", cx + r * std::cos(angle(c)), cy + r * std::sin(angle(c)));
            pts += buf;
        }
        svg += "<polygon points=\"" + pts + "\" fill=\"none\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";
    }
    for (std::size_t c = 0; c < kMeanFeatureCount; ++c) {
        const double x = cx + radius * std::cos(angle(c)), y = cy + radius * std::sin(angle(c));
        std::snprintf(buf, sizeof buf, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#999999\" stroke-width=\"1\"/>\n",
                      cx, cy, x, y);
        svg += buf;
        const double lx = cx + (radius + 22) * std::cos(angle(c)), ly = cy + (radius + 22) * std::sin(angle(c));
        std::snprintf(buf, sizeof buf,
                      "<text class=\"axis\" x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\" dominant-baseline=\"middle\" "
                      "font-family=\"sans-serif\" font-size=\"12\">%s</text>\n",
                      lx, ly, kFeatureNames[c]);
        svg += buf;
    }

    auto polygon = [&](const std::array<double, kMeanFeatureCount>& values, const char* colour, const char* cls) {
        std::string pts;
        for (std::size_t c = 0; c < kMeanFeatureCount; ++c) {
            const double lo = std::min(profile.positive[c], profile.negative[c]);
            const double hi = std::max(profile.positive[c], profile.negative[c]);
            const double norm = hi - lo > 1e-12 * std::max(1.0, std::abs(hi)) ? (values[c] - lo) / (hi - lo) : 0.5;
            const double r = radius * (inner + (1 - inner) * norm);
            std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", c ? " " : "", cx + r * std::cos(angle(c)), cy + r * std::sin(angle(c)));
            pts += buf;
        }
        svg += std::string("<polygon class=\"") + cls + "\" points=\"" + pts + "\" fill=\"" + colour +
               "\" fill-opacity=\"0.25\" stroke=\"" + colour + "\" stroke-width=\"2\"/>\n";
    };
    polygon(profile.positive, "#1f4fd1", "positive");
    polygon(profile.negative, "#d12a1f", "negative");
    std::snprintf(buf, sizeof buf,
                  "<text x=\"20\" y=\"%.0f\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#1f4fd1\">inspiring (n=%zu)</text>\n"
                  "<text x=\"460\" y=\"%.0f\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#d12a1f\">not inspiring (n=%zu)</text>\n",
                  size + 10, profile.n_positive, size + 10, profile.n_negative);
    svg += buf;
    svg += "</svg>\n";
    return svg;
}

} // namespace lyricpref
