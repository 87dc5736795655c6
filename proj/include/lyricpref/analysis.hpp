#pragma once

#include "lyricpref/features.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace lyricpref {

// Terms in the order of the interaction table: the nine mean features
// (reordered), then the three interaction products.
inline constexpr int kInteractionTerms = 12;
extern const std::array<const char*, kInteractionTerms> kInteractionTermNames;

struct InteractionTerm {
    std::string name;
    double coefficient = 0.0;
    double std_error = 0.0;
    double z = 0.0;
    double p_value = 1.0;
};

struct InteractionReport {
    std::string annotator;
    std::size_t n = 0;
    bool converged = false;
    int iterations = 0;
    double intercept = 0.0;
    std::vector<InteractionTerm> terms; // kInteractionTermNames order
    std::vector<std::string> warnings;

    const InteractionTerm& term(const std::string& name) const;
};

// Two-sided normal p-value for a Wald statistic.
double wald_p_value(double z);

// Standardizes the nine means, appends I1 (surprisal, entropy, banality and
// both NPMI means), I2 (imagery, energy, abstraction, valence) and I_all
// (all nine) as products of standardized columns, and fits a logistic
// regression with a 1e-8 ridge by IRLS from zero.
InteractionReport fit_interactions(std::span<const MeanFeatures> means, const Labels& labels,
                                   const std::string& annotator = "");

std::string interactions_csv(const InteractionReport& report);

struct ProfileData {
    std::string annotator;
    std::array<double, kMeanFeatureCount> positive{}; // kFeatureNames order
    std::array<double, kMeanFeatureCount> negative{};
    std::size_t n_positive = 0;
    std::size_t n_negative = 0;

    bool operator==(const ProfileData&) const = default;
};

ProfileData preference_profile(std::span<const FeatureTensor> tensors, const Labels& labels,
                               const std::string& annotator = "");
ProfileData preference_profile(std::span<const MeanFeatures> means, const Labels& labels,
                               const std::string& annotator = "");

// Rows: annotator,feature,positive_mean,negative_mean,n_positive,n_negative.
std::string profile_csv(std::span<const ProfileData> profiles);
std::vector<ProfileData> parse_profile_csv(const std::string& text);

// Nine-axis radar chart, positive polygon blue and negative red, each axis
// min-max scaled across the two polygons. Output depends only on `profile`.
std::string render_radar(const ProfileData& profile);

} // namespace lyricpref
