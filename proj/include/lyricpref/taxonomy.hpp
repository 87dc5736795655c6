#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace lyricpref {

// Fixed emotion roster with its sentiment partition. Column order of the
// full valence block follows `labels()`.
class EmotionTaxonomy {
public:
    static constexpr int kTopK = 5;

    EmotionTaxonomy(std::string version, std::vector<std::string> labels, std::vector<int> polarity);

    static EmotionTaxonomy load(const std::filesystem::path& path);
    // The roster shipped in data/emotions.json.
    static const EmotionTaxonomy& shipped();

    const std::string& version() const { return version_; }
    const std::vector<std::string>& labels() const { return labels_; }
    int size() const { return static_cast<int>(labels_.size()); }

    // -1 when the label is not part of the taxonomy.
    int index_of(const std::string& label) const;
    int polarity(int index) const { return polarity_.at(index); }
    const std::string& label(int index) const { return labels_.at(index); }

private:
    std::string version_;
    std::vector<std::string> labels_;
    std::vector<int> polarity_;
    std::unordered_map<std::string, int> index_;
};

std::filesystem::path default_data_dir();

} // namespace lyricpref
