#include "lyricpref/extraction.hpp"

#include "lyricpref/errors.hpp"

#include "json.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include <unistd.h>

namespace lyricpref {

using nlohmann::json;

std::set<FeatureFamily> parse_feature_families(const std::string& spec) {
    static const std::map<std::string, FeatureFamily> names = {
        {"imagery", FeatureFamily::Imagery},     {"energy", FeatureFamily::Energy},
        {"abstraction", FeatureFamily::Abstraction}, {"surprisal", FeatureFamily::Surprisal},
        {"entropy", FeatureFamily::Entropy},     {"npmi", FeatureFamily::Npmi},
        {"banality", FeatureFamily::Banality},   {"valence", FeatureFamily::Valence}};
    std::set<FeatureFamily> out;
    if (spec == "all") {
        for (const auto& [_, f] : names) out.insert(f);
        return out;
    }
    std::istringstream in(spec);
    for (std::string item; std::getline(in, item, ',');) {
        auto it = names.find(item);
        if (it == names.end()) throw ValidationError("unknown feature family '" + item + "'");
        out.insert(it->second);
    }
    if (out.empty()) throw ValidationError("no feature families selected");
    return out;
}

FeatureExtractor::FeatureExtractor(ExtractionProviders providers, CorpusStats stats, ExtractionOptions options)
    : providers_(std::move(providers)), stats_(std::move(stats)), options_(std::move(options)) {
    auto need = [&](bool present, FeatureFamily f, const char* what) {
        if (options_.families.count(f) && !present) throw ConfigError(std::string("no provider configured for ") + what);
    };
    need(providers_.rubric != nullptr, FeatureFamily::Imagery, "imagery");
    need(providers_.rubric != nullptr, FeatureFamily::Energy, "energy");
    need(providers_.rubric != nullptr, FeatureFamily::Banality, "banality");
    need(providers_.categories != nullptr, FeatureFamily::Abstraction, "abstraction");
    need(providers_.tokens != nullptr, FeatureFamily::Surprisal, "surprisal");
    need(providers_.tokens != nullptr, FeatureFamily::Entropy, "entropy");
    need(providers_.emotions != nullptr, FeatureFamily::Valence, "valence");
    if (options_.valence_mode == ValenceMode::Full && !providers_.emotions)
        throw ConfigError("full valence mode needs an emotion classifier for the taxonomy width");
}

FeatureRecord FeatureExtractor::extract(const LyricLine& line) const {
    const auto t = static_cast<Eigen::Index>(line.size());
    const auto& fam = options_.families;
    auto on = [&](FeatureFamily f) { return fam.count(f) > 0; };
    FeatureRecord record;
    record.text = line.text;

    LineFeatures f;
    f.imagery = on(FeatureFamily::Imagery) ? rubric_prefix_vector(line, Rubric::Imagery, *providers_.rubric)
                                           : VectorXd::Zero(t);
    f.energy = on(FeatureFamily::Energy) ? rubric_prefix_vector(line, Rubric::Energy, *providers_.rubric)
                                         : VectorXd::Zero(t);
    f.banality = on(FeatureFamily::Banality) ? rubric_prefix_vector(line, Rubric::Banality, *providers_.rubric)
                                             : VectorXd::Zero(t);
    f.abstraction = on(FeatureFamily::Abstraction) ? abstraction_vector(line, *providers_.categories)
                                                   : VectorXd::Zero(t);

    f.surprisal = VectorXd::Zero(t + 1);
    f.entropy = VectorXd::Zero(t + 1);
    if (on(FeatureFamily::Surprisal) || on(FeatureFamily::Entropy)) {
        std::vector<TokenStepInfo> steps;
        try {
            steps = providers_.tokens->token_logprobs(line.text);
        } catch (const ProviderError& e) {
            throw ProviderError("token logprobs failed for line '" + line.id + "': " + e.what(), e.retriable());
        }
        if (on(FeatureFamily::Surprisal)) f.surprisal = surprisal_from_steps(steps, line.size());
        if (on(FeatureFamily::Entropy)) {
            f.entropy = entropy_from_steps(steps, line.size());
            for (const auto& s : steps) {
                if (s.entropy_approximate) {
                    record.flags.push_back("approximate_entropy");
                    break;
                }
            }
        }
    }

    if (on(FeatureFamily::Npmi)) {
        bool fb_uni = false;
        bool fb_bi = false;
        f.npmi_uni = npmi_vector(line, stats_, NpmiDirection::Uni, options_.unseen, &fb_uni);
        f.npmi_bi = npmi_vector(line, stats_, NpmiDirection::Bi, options_.unseen, &fb_bi);
        if (fb_uni || fb_bi) record.flags.push_back("npmi_unseen_fallback");
    } else {
        f.npmi_uni = VectorXd::Zero(t);
        f.npmi_bi = VectorXd::Zero(t);
    }

    if (on(FeatureFamily::Valence)) {
        f.valence = valence_vector(line, *providers_.emotions, options_.valence_mode);
    } else if (options_.valence_mode == ValenceMode::Full) {
        const int m = providers_.emotions->taxonomy().size();
        f.valence = MatrixXd::Constant(t, m, 1.0 / m);
    } else {
        f.valence = MatrixXd::Zero(t, 1);
    }

    record.tensor = assemble_tensor(line, f, options_.valence_mode);
    return record;
}

std::vector<FeatureRecord> FeatureExtractor::extract_all(std::span<const LyricLine> lines) const {
    std::vector<FeatureRecord> out(lines.size());
    std::vector<std::exception_ptr> errors(lines.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < lines.size(); i = next++) {
            try {
                out[i] = extract(lines[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int jobs = std::max(1, std::min<int>(options_.jobs, static_cast<int>(lines.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

std::map<std::string, std::string> FeatureExtractor::fingerprints() const {
    std::map<std::string, std::string> fp;
    if (providers_.rubric) fp["rubric"] = providers_.rubric->fingerprint();
    if (providers_.emotions) fp["emotions"] = providers_.emotions->fingerprint();
    if (providers_.categories) fp["categories"] = providers_.categories->fingerprint();
    if (providers_.tokens) fp["tokens"] = providers_.tokens->fingerprint();
    return fp;
}

std::vector<std::string> column_names(ValenceMode mode, const EmotionTaxonomy& taxonomy) {
    std::vector<std::string> cols(kFeatureNames.begin(), kFeatureNames.begin() + kScalarColumns);
    if (mode == ValenceMode::Binary) {
        cols.emplace_back("valence");
    } else {
        for (const auto& l : taxonomy.labels()) cols.push_back("valence:" + l);
    }
    return cols;
}

std::string feature_record_json(const FeatureRecord& record, const std::map<std::string, std::string>& fingerprints,
                                const std::string& timestamp) {
    const auto& t = record.tensor;
    json rows = json::array();
    for (Eigen::Index r = 0; r < t.timesteps(); ++r) {
        std::vector<double> row(t.width());
        for (Eigen::Index c = 0; c < t.width(); ++c) row[c] = t.rows(r, c);
        rows.push_back(row);
    }
    std::vector<double> agg(t.width());
    for (Eigen::Index c = 0; c < t.width(); ++c) agg[c] = t.rows(t.timesteps(), c);
    json j = {{"id", t.line_id},
              {"text", record.text},
              {"valence_mode", to_string(t.valence_mode)},
              {"timesteps", t.timesteps()},
              {"width", t.width()},
              {"rows", rows},
              {"aggregate", agg},
              {"flags", record.flags},
              {"providers", fingerprints},
              {"extracted_at", timestamp}};
    return j.dump();
}

FeatureRecord parse_feature_record(const std::string& json_line) {
    json j;
    try {
        j = json::parse(json_line);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed feature record: ") + e.what());
    }
    FeatureRecord rec;
    try {
        rec.tensor.line_id = j.at("id").get<std::string>();
        rec.text = j.value("text", std::string{});
        rec.tensor.valence_mode = valence_mode_from_string(j.at("valence_mode").get<std::string>());
        const auto& rows = j.at("rows");
        const auto& agg = j.at("aggregate");
        const auto width = static_cast<Eigen::Index>(agg.size());
        const auto t = static_cast<Eigen::Index>(rows.size());
        if (t == 0) throw ParseError("feature record '" + rec.tensor.line_id + "' has no timesteps");
        rec.tensor.rows.resize(t + 1, width);
        for (Eigen::Index r = 0; r < t; ++r) {
            if (static_cast<Eigen::Index>(rows[r].size()) != width)
                throw ParseError("feature record '" + rec.tensor.line_id + "' has ragged rows");
            for (Eigen::Index c = 0; c < width; ++c) rec.tensor.rows(r, c) = rows[r][c].get<double>();
        }
        for (Eigen::Index c = 0; c < width; ++c) rec.tensor.rows(t, c) = agg[c].get<double>();
        rec.flags = j.value("flags", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw ParseError(std::string("feature record has the wrong shape: ") + e.what());
    }
    return rec;
}

std::vector<FeatureRecord> load_feature_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open feature file " + path.string());
    std::vector<FeatureRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(parse_feature_record(line));
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot write " + tmp.string());
        out << contents;
        if (!out) throw ValidationError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace lyricpref
