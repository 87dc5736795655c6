#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lyricpref {

// Plain-text prompt with {{name}} placeholders. Leading lines starting with
// '#' form a header that is kept for provenance but never rendered.
class PromptTemplate {
public:
    PromptTemplate() = default;
    PromptTemplate(std::string name, const std::string& source);

    static PromptTemplate load(const std::filesystem::path& path);

    const std::string& name() const { return name_; }
    const std::string& body() const { return body_; }
    const std::string& header() const { return header_; }

    // Throws ConfigError when a placeholder in the body has no value.
    std::string render(const std::map<std::string, std::string>& values) const;

    // Inverse of render for one placeholder: recovers its value from a
    // rendered prompt, or nullopt when `rendered` did not come from this
    // template. Other placeholders match any text.
    std::optional<std::string> extract(const std::string& rendered, const std::string& placeholder) const;

private:
    struct Piece {
        bool is_placeholder;
        std::string text;
    };

    std::string name_;
    std::string header_;
    std::string body_;
    std::vector<Piece> pieces_;
};

struct PromptSet {
    PromptTemplate imagery;
    PromptTemplate energy;
    PromptTemplate banality;
    PromptTemplate emotions;
    PromptTemplate categories;
    PromptTemplate fewshot;

    static PromptSet load(const std::filesystem::path& dir);
    static const PromptSet& shipped();
};

} // namespace lyricpref
