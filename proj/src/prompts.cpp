#include "lyricpref/prompts.hpp"

#include "lyricpref/errors.hpp"
#include "lyricpref/taxonomy.hpp"

#include <fstream>
#include <sstream>

namespace lyricpref {

PromptTemplate::PromptTemplate(std::string name, const std::string& source) : name_(std::move(name)) {
    std::istringstream in(source);
    std::string line;
    bool in_header = true;
    while (std::getline(in, line)) {
        if (in_header && !line.empty() && line[0] == '#') {
            header_ += line + '\n';
            continue;
        }
        in_header = false;
        body_ += line + '\n';
    }
    while (!body_.empty() && (body_.back() == '\n' || body_.back() == ' ')) body_.pop_back();

    std::size_t pos = 0;
    while (pos < body_.size()) {
        const auto open = body_.find("{{", pos);
        if (open == std::string::npos) {
            pieces_.push_back({false, body_.substr(pos)});
            break;
        }
        const auto close = body_.find("}}", open);
        if (close == std::string::npos) throw ConfigError("prompt " + name_ + ": unterminated placeholder");
        if (open > pos) pieces_.push_back({false, body_.substr(pos, open - pos)});
        pieces_.push_back({true, body_.substr(open + 2, close - open - 2)});
        pos = close + 2;
    }
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open prompt template " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return PromptTemplate(path.stem().string(), ss.str());
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    std::string out;
    for (const auto& p : pieces_) {
        if (!p.is_placeholder) {
            out += p.text;
            continue;
        }
        auto it = values.find(p.text);
        if (it == values.end()) throw ConfigError("prompt " + name_ + ": no value for {{" + p.text + "}}");
        out += it->second;
    }
    return out;
}

std::optional<std::string> PromptTemplate::extract(const std::string& rendered, const std::string& placeholder) const {
    // Literal pieces are matched left to right; a placeholder extends to the
    // last occurrence of the literal that follows it, which keeps values with
    // embedded copies of that literal intact.
    std::size_t pos = 0;
    std::optional<std::string> found;
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
        const auto& p = pieces_[i];
        if (!p.is_placeholder) {
            if (rendered.compare(pos, p.text.size(), p.text) != 0) return std::nullopt;
            pos += p.text.size();
            continue;
        }
        std::size_t end = rendered.size();
        if (i + 1 < pieces_.size()) {
            const auto& next = pieces_[i + 1].text;
            end = rendered.rfind(next);
            if (end == std::string::npos || end < pos) return std::nullopt;
        }
        if (p.text == placeholder) found = rendered.substr(pos, end - pos);
        pos = end;
    }
    if (pos != rendered.size()) return std::nullopt;
    return found;
}

PromptSet PromptSet::load(const std::filesystem::path& dir) {
    PromptSet set;
    set.imagery = PromptTemplate::load(dir / "imagery.txt");
    set.energy = PromptTemplate::load(dir / "energy.txt");
    set.banality = PromptTemplate::load(dir / "banality.txt");
    set.emotions = PromptTemplate::load(dir / "emotions.txt");
    set.categories = PromptTemplate::load(dir / "categories.txt");
    set.fewshot = PromptTemplate::load(dir / "fewshot.txt");
    return set;
}

const PromptSet& PromptSet::shipped() {
    static const PromptSet set = load(default_data_dir() / "prompts");
    return set;
}

} // namespace lyricpref
