#pragma once

// Shared fixtures and independent oracles for the unit and acceptance suites.

#include "lyricpref/corpus.hpp"
#include "lyricpref/features.hpp"
#include "lyricpref/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace lyricpref::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        const auto base = std::filesystem::temp_directory_path();
        Rng rng(derive_seed(stable_hash(tag), ++counter ^ static_cast<std::uint64_t>(::getpid())));
        path_ = base / ("lyricpref-" + tag + "-" + std::to_string(rng.next() % 1000000007ULL));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline const std::vector<std::string>& small_vocabulary() {
    static const std::vector<std::string> words = {
        "love", "fire",  "night", "city", "burning", "alone", "dream", "light", "rain", "heart", "sky",  "walk",
        "run",  "lost",  "pure",  "red",  "the",     "a",     "of",    "to",    "and",  "you",   "i",    "hope",
        "road", "gold",  "river", "home", "broken",  "sing",  "stars", "cold",  "free", "wild",  "blue", "hands"};
    return words;
}

// JSONL dataset with two label annotators and one rating annotator.
inline std::string synthetic_dataset_jsonl(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    const auto& vocab = small_vocabulary();
    std::ostringstream out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto len = 3 + rng.index(6);
        std::string text;
        for (std::size_t w = 0; w < len; ++w) {
            if (w) text += ' ';
            text += vocab[rng.index(vocab.size())];
        }
        // Alternate so both classes are always present.
        const bool a1 = (i % 2 == 0) != rng.bernoulli(0.2);
        out << "{\"id\":\"line-" << i << "\",\"text\":\"" << text << "\",\"A1\":\""
            << (a1 ? "inspiring" : "not_inspiring") << "\",\"A2\":\""
            << (rng.bernoulli(0.4) ? "inspiring" : "not_inspiring") << "\",\"A3_rating\":" << (1 + i % 10) << "}\n";
    }
    return out.str();
}

// --- oracles --------------------------------------------------------------

// NPMI by direct enumeration over the raw corpus lines: every count is a
// fresh scan, no shared tables.
inline double npmi_oracle(const std::vector<std::vector<std::string>>& corpus, const std::string& x,
                          const std::string& y, bool bidirectional) {
    long long n = 0, cx = 0, cy = 0, cxy = 0, cyx = 0;
    for (const auto& line : corpus) {
        for (std::size_t i = 0; i < line.size(); ++i) {
            ++n;
            if (line[i] == x) ++cx;
            if (line[i] == y) ++cy;
            if (i + 1 < line.size()) {
                if (line[i] == x && line[i + 1] == y) ++cxy;
                if (line[i] == y && line[i + 1] == x) ++cyx;
            }
        }
    }
    const double nn = static_cast<double>(n);
    const double joint = bidirectional ? static_cast<double>(cxy + cyx) / (2.0 * nn) : static_cast<double>(cxy) / nn;
    if (joint == 0.0) return -1.0;
    const double h = -std::log(joint);
    if (h <= 0.0) return 1.0;
    const double v = std::log(joint / ((static_cast<double>(cx) / nn) * (static_cast<double>(cy) / nn))) / h;
    return std::clamp(v, -1.0, 1.0);
}

// Probability that a random positive outscores a random negative, ties 1/2.
inline double pairwise_auc_oracle(std::span<const double> scores, std::span<const int> labels) {
    double wins = 0.0;
    long long pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

// Tensor of `t` timesteps whose per-column timestep means equal `means`.
// Noise is centred per column so the means are exact up to rounding.
inline FeatureTensor tensor_with_means(const MeanFeatures& means, int t, Rng& rng, const std::string& id,
                                       double noise = 0.3) {
    FeatureTensor tensor;
    tensor.line_id = id;
    tensor.valence_mode = ValenceMode::Binary;
    tensor.rows.resize(t + 1, kMeanFeatureCount);
    for (int c = 0; c < kMeanFeatureCount; ++c) {
        VectorXd col(t);
        for (int r = 0; r < t; ++r) col(r) = noise * rng.normal();
        col.array() -= col.mean();
        for (int r = 0; r < t; ++r) tensor.rows(r, c) = means[c] + col(r);
        tensor.rows(t, c) = tensor.rows.col(c).head(t).mean();
    }
    return tensor;
}

} // namespace lyricpref::testing
