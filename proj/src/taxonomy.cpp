#include "lyricpref/taxonomy.hpp"

#include "lyricpref/errors.hpp"

#include "json.hpp"

#include <cstdlib>
#include <fstream>

namespace lyricpref {

EmotionTaxonomy::EmotionTaxonomy(std::string version, std::vector<std::string> labels, std::vector<int> polarity)
    : version_(std::move(version)), labels_(std::move(labels)), polarity_(std::move(polarity)) {
    if (labels_.size() != polarity_.size()) throw ConfigError("taxonomy: labels and polarity differ in length");
    if (labels_.size() <= static_cast<std::size_t>(kTopK))
        throw ConfigError("taxonomy needs more than " + std::to_string(kTopK) + " labels");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (polarity_[i] < -1 || polarity_[i] > 1) throw ConfigError("taxonomy: polarity must be -1, 0 or 1");
        if (!index_.emplace(labels_[i], static_cast<int>(i)).second)
            throw ConfigError("taxonomy: duplicate label " + labels_[i]);
    }
}

EmotionTaxonomy EmotionTaxonomy::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open emotion taxonomy " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed taxonomy " + path.string() + ": " + e.what());
    }
    std::vector<std::string> labels;
    std::vector<int> polarity;
    for (const auto& entry : j.at("labels")) {
        labels.push_back(entry.at("name").get<std::string>());
        polarity.push_back(entry.at("polarity").get<int>());
    }
    return EmotionTaxonomy(j.value("version", "unversioned"), std::move(labels), std::move(polarity));
}

const EmotionTaxonomy& EmotionTaxonomy::shipped() {
    static const EmotionTaxonomy taxonomy = load(default_data_dir() / "emotions.json");
    return taxonomy;
}

int EmotionTaxonomy::index_of(const std::string& label) const {
    auto it = index_.find(label);
    return it == index_.end() ? -1 : it->second;
}

std::filesystem::path default_data_dir() {
    if (const char* env = std::getenv("LYRICPREF_DATA_DIR")) return env;
    return LYRICPREF_DATA_DIR;
}

} // namespace lyricpref
