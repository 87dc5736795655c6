#include "lyricpref/corpus.hpp"

#include "lyricpref/errors.hpp"
#include "lyricpref/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace lyricpref {

using nlohmann::json;

namespace {

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(std::move(w));
    return out;
}

constexpr const char* kRatingSuffix = "_rating";

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// A single annotator cell before rating normalization.
struct RawCell {
    std::optional<Label> label;
    std::optional<int> rating;
};

struct RawRecord {
    std::string id;
    std::string text;
    std::map<std::string, RawCell> cells;
    std::size_t line_no = 0;
};

int parse_rating(long long v, std::size_t line_no) {
    if (v < 1 || v > 10) throw ParseError("rating out of range 1..10: " + std::to_string(v), line_no);
    return static_cast<int>(v);
}

Label parse_label_string(const std::string& s, std::size_t line_no) {
    if (s == "inspiring") return Label::Inspiring;
    if (s == "not_inspiring") return Label::NotInspiring;
    throw ParseError("unknown label '" + s + "'", line_no);
}

// Cell values from CSV arrive as text; integers are ratings.
void put_text_cell(RawRecord& rec, const std::string& key, const std::string& value, std::size_t line_no) {
    if (value.empty()) throw ParseError("empty value for field '" + key + "'", line_no);
    const bool numeric = std::all_of(value.begin(), value.end(), [](unsigned char c) { return std::isdigit(c); });
    if (ends_with(key, kRatingSuffix)) {
        if (!numeric) throw ParseError("non-integer rating in '" + key + "'", line_no);
        rec.cells[key.substr(0, key.size() - 7)].rating = parse_rating(std::stoll(value), line_no);
    } else if (numeric) {
        rec.cells[key].rating = parse_rating(std::stoll(value), line_no);
    } else {
        rec.cells[key].label = parse_label_string(value, line_no);
    }
}

RawRecord parse_json_record(const std::string& line, std::size_t line_no) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON record: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw ParseError("record is not a JSON object", line_no);
    RawRecord rec;
    rec.line_no = line_no;
    for (const auto& [key, value] : j.items()) {
        if (key == "id") {
            if (value.is_string()) rec.id = value.get<std::string>();
            else if (value.is_number_integer()) rec.id = std::to_string(value.get<long long>());
            else throw ParseError("field 'id' must be a string", line_no);
        } else if (key == "text") {
            if (!value.is_string()) throw ParseError("field 'text' must be a string", line_no);
            rec.text = value.get<std::string>();
        } else if (ends_with(key, kRatingSuffix)) {
            if (!value.is_number_integer()) throw ParseError("non-integer rating in '" + key + "'", line_no);
            rec.cells[key.substr(0, key.size() - 7)].rating = parse_rating(value.get<long long>(), line_no);
        } else if (value.is_string()) {
            rec.cells[key].label = parse_label_string(value.get<std::string>(), line_no);
        } else if (value.is_number_integer()) {
            rec.cells[key].rating = parse_rating(value.get<long long>(), line_no);
        } else {
            throw ParseError("field '" + key + "' must be a label string or integer rating", line_no);
        }
    }
    return rec;
}

// RFC 4180 style: quoted fields may contain commas, doubled quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(std::istream& in, std::vector<std::size_t>& line_numbers) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t line_no = 1;
    std::size_t row_start = 1;
    char c;
    auto end_row = [&] {
        row.push_back(std::move(field));
        field.clear();
        if (!(row.size() == 1 && row[0].empty() && !field_started)) {
            rows.push_back(std::move(row));
            line_numbers.push_back(row_start);
        }
        row.clear();
        field_started = false;
    };
    while (in.get(c)) {
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field += '"';
                    in.get(c);
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line_no;
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            quoted = true;
            field_started = true;
            break;
        case ',':
            row.push_back(std::move(field));
            field.clear();
            field_started = true;
            break;
        case '\r':
            break;
        case '\n':
            end_row();
            ++line_no;
            row_start = line_no;
            break;
        default:
            field += c;
            field_started = true;
        }
    }
    if (quoted) throw ParseError("unterminated quoted field", line_no);
    if (!field.empty() || !row.empty() || field_started) end_row();
    return rows;
}

Dataset assemble(std::vector<RawRecord> records) {
    Dataset ds;
    std::set<std::string> seen_ids;
    std::vector<std::string> annotators;
    for (const auto& rec : records) {
        if (rec.id.empty()) throw ParseError("record missing 'id'", rec.line_no);
        if (rec.text.empty()) throw ParseError("record missing 'text'", rec.line_no);
        if (rec.cells.empty()) throw ParseError("record has no annotator field", rec.line_no);
        if (!seen_ids.insert(rec.id).second) throw ValidationError("duplicate line id '" + rec.id + "'");
        for (const auto& [ann, cell] : rec.cells) {
            if (std::find(annotators.begin(), annotators.end(), ann) == annotators.end()) annotators.push_back(ann);
        }
    }
    // Keep the first-seen order, which is the column order of the source file.
    ds.annotators = annotators;

    for (const auto& rec : records) {
        LyricLine line = LyricLine::from_raw(rec.id, rec.text);
        if (line.words.empty()) throw ParseError("text has no words", rec.line_no);
        ds.lines.push_back(std::move(line));
    }

    for (const auto& ann : annotators) {
        std::vector<Annotation> list(records.size());
        std::vector<int> ratings;
        std::vector<std::size_t> rated;
        for (std::size_t i = 0; i < records.size(); ++i) {
            auto it = records[i].cells.find(ann);
            if (it == records[i].cells.end())
                throw ValidationError("line " + std::to_string(records[i].line_no) + " has no annotation for " + ann);
            list[i].annotator_id = ann;
            list[i].raw_rating = it->second.rating;
            if (it->second.rating) {
                ratings.push_back(*it->second.rating);
                rated.push_back(i);
            } else if (it->second.label) {
                list[i].label = *it->second.label;
            } else {
                throw ParseError("annotator " + ann + " has a rating field but no value", records[i].line_no);
            }
        }
        if (!ratings.empty()) {
            const auto labels = normalize_ratings(ratings);
            for (std::size_t r = 0; r < rated.size(); ++r) {
                const auto& cell = records[rated[r]].cells.at(ann);
                if (cell.label && *cell.label != labels[r])
                    throw ValidationError("label for " + ann + " on line " + std::to_string(records[rated[r]].line_no) +
                                          " disagrees with its normalized rating");
                list[rated[r]].label = labels[r];
            }
        }
        ds.annotations.emplace(ann, std::move(list));
    }
    ds.validate();
    return ds;
}

} // namespace

LyricLine LyricLine::from_raw(std::string id, const std::string& raw_text) {
    LyricLine line;
    line.id = std::move(id);
    line.words = split_ws(lowercase(raw_text));
    for (std::size_t i = 0; i < line.words.size(); ++i) {
        if (i) line.text += ' ';
        line.text += line.words[i];
    }
    return line;
}

std::string LyricLine::prefix(std::size_t t) const {
    if (t < 1 || t > words.size())
        throw ValidationError("prefix length " + std::to_string(t) + " outside 1.." + std::to_string(words.size()));
    std::string out;
    for (std::size_t i = 0; i < t; ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out;
}

Labels Dataset::labels(const std::string& annotator) const {
    auto it = annotations.find(annotator);
    if (it == annotations.end()) throw ValidationError("unknown annotator '" + annotator + "'");
    Labels out;
    out.reserve(it->second.size());
    for (const auto& a : it->second) out.push_back(to_int(a.label));
    return out;
}

void Dataset::validate() const {
    std::set<std::string> ids;
    for (const auto& l : lines) {
        if (l.words.empty()) throw ValidationError("line '" + l.id + "' has no words");
        if (!ids.insert(l.id).second) throw ValidationError("duplicate line id '" + l.id + "'");
    }
    for (const auto& [ann, list] : annotations) {
        if (list.size() != lines.size())
            throw ValidationError("annotations for " + ann + " are not aligned with lines (" +
                                  std::to_string(list.size()) + " vs " + std::to_string(lines.size()) + ")");
    }
}

DatasetFormat format_from_path(const std::filesystem::path& path) {
    const auto ext = lowercase(path.extension().string());
    if (ext == ".csv") return DatasetFormat::Csv;
    return DatasetFormat::Jsonl;
}

Dataset load_dataset(const std::filesystem::path& path) { return load_dataset(path, format_from_path(path)); }

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open dataset " + path.string());
    std::vector<RawRecord> records;
    if (format == DatasetFormat::Jsonl) {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            records.push_back(parse_json_record(line, line_no));
        }
    } else {
        std::vector<std::size_t> line_numbers;
        const auto rows = parse_csv(in, line_numbers);
        if (rows.empty()) throw ParseError("CSV has no header", 1);
        const auto& header = rows[0];
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto line_no = line_numbers[r];
            if (rows[r].size() != header.size())
                throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                                     std::to_string(rows[r].size()),
                                 line_no);
            RawRecord rec;
            rec.line_no = line_no;
            for (std::size_t c = 0; c < header.size(); ++c) {
                if (header[c] == "id") rec.id = rows[r][c];
                else if (header[c] == "text") rec.text = rows[r][c];
                else put_text_cell(rec, header[c], rows[r][c], line_no);
            }
            records.push_back(std::move(rec));
        }
    }
    if (records.empty()) throw ValidationError("dataset " + path.string() + " has no records");
    return assemble(std::move(records));
}

std::string to_canonical_jsonl(const Dataset& dataset) {
    std::string out;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        json j = json::object();
        j["id"] = dataset.lines[i].id;
        j["text"] = dataset.lines[i].text;
        for (const auto& ann : dataset.annotators) {
            const auto& a = dataset.annotations.at(ann)[i];
            j[ann] = to_string(a.label);
            if (a.raw_rating) j[ann + kRatingSuffix] = *a.raw_rating;
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<Label> normalize_ratings(const std::vector<int>& ratings, double threshold) {
    if (ratings.empty()) throw ValidationError("no ratings to normalize");
    if (!(threshold > 0.0 && threshold <= 1.0)) throw ValidationError("threshold must lie in (0,1]");
    const auto [lo, hi] = std::minmax_element(ratings.begin(), ratings.end());
    if (*lo == *hi) throw ValidationError("degenerate rating scale: all ratings equal " + std::to_string(*lo));
    const double range = static_cast<double>(*hi - *lo);
    std::vector<Label> out;
    out.reserve(ratings.size());
    for (int r : ratings) {
        const double scaled = (r - *lo) / range;
        // ties at the threshold count as inspiring; tolerate rounding in the division
        const bool inspiring = scaled >= threshold || std::abs(scaled - threshold) < 1e-12;
        out.push_back(inspiring ? Label::Inspiring : Label::NotInspiring);
    }
    return out;
}

SplitPlan stratified_split(const Labels& labels, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test_fraction must lie in (0,1)");
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i] ? 1 : 0].push_back(i);
    for (int c = 0; c < 2; ++c) {
        if (by_class[c].size() < 2)
            throw ValidationError("cannot stratify: class " + std::to_string(c) + " has " +
                                  std::to_string(by_class[c].size()) + " member(s)");
    }
    SplitPlan plan;
    plan.seed = seed;
    Rng rng(seed);
    for (int c = 0; c < 2; ++c) {
        auto idx = by_class[c];
        rng.shuffle(idx);
        auto n_test = static_cast<std::size_t>(std::llround(idx.size() * test_fraction));
        n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
        plan.test_indices.insert(plan.test_indices.end(), idx.begin(), idx.begin() + n_test);
        plan.train_indices.insert(plan.train_indices.end(), idx.begin() + n_test, idx.end());
    }
    std::sort(plan.test_indices.begin(), plan.test_indices.end());
    std::sort(plan.train_indices.begin(), plan.train_indices.end());
    return plan;
}

SplitPlan stratified_split(const Dataset& dataset, const std::string& annotator, double test_fraction,
                           std::uint64_t seed) {
    return stratified_split(dataset.labels(annotator), test_fraction, seed);
}

std::vector<std::vector<std::size_t>> kfold(const std::vector<std::size_t>& indices, const Labels& labels, int k,
                                            std::uint64_t seed) {
    if (indices.size() != labels.size()) throw ValidationError("kfold: indices and labels differ in length");
    if (k < 2) throw ValidationError("kfold: k must be at least 2");
    if (static_cast<std::size_t>(k) > indices.size())
        throw ValidationError("kfold: k=" + std::to_string(k) + " exceeds sample count " +
                              std::to_string(indices.size()));
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < indices.size(); ++i) by_class[labels[i] ? 1 : 0].push_back(indices[i]);
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> folds(k);
    // Deal class 0 then class 1 round-robin without resetting the fold cursor,
    // so both per-class and total fold sizes differ by at most one.
    std::size_t cursor = 0;
    for (auto& members : by_class) {
        rng.shuffle(members);
        for (auto idx : members) folds[cursor++ % k].push_back(idx);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

MatrixXd pairwise_agreement(const Dataset& dataset) {
    const auto n = dataset.annotators.size();
    if (n < 2) throw ValidationError("agreement needs at least two annotators");
    dataset.validate();
    if (dataset.size() == 0) throw ValidationError("agreement on an empty dataset");
    std::vector<Labels> labels;
    for (const auto& a : dataset.annotators) labels.push_back(dataset.labels(a));
    MatrixXd m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            std::size_t same = 0;
            for (std::size_t l = 0; l < dataset.size(); ++l) same += labels[i][l] == labels[j][l];
            m(i, j) = m(j, i) = 100.0 * static_cast<double>(same) / static_cast<double>(dataset.size());
        }
    }
    return m;
}

std::string agreement_csv(const Dataset& dataset, const MatrixXd& agreement) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(1);
    out << "annotator";
    for (const auto& a : dataset.annotators) out << ',' << a;
    out << '\n';
    for (Eigen::Index i = 0; i < agreement.rows(); ++i) {
        out << dataset.annotators[i];
        for (Eigen::Index j = 0; j < agreement.cols(); ++j) out << ',' << agreement(i, j);
        out << '\n';
    }
    return out.str();
}

} // namespace lyricpref
