#include "atc/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <tuple>

#include "atc/errors.hpp"
#include "atc/text.hpp"

namespace atc {

namespace {

// One RFC 4180 record; quoted fields may span lines. Returns false on
// clean EOF before any input. line_no tracks the record's first line.
bool read_record(std::istream& in, char delimiter, std::vector<std::string>& fields,
                 std::size_t& line_no, std::string_view source) {
    fields.clear();
    int c = in.get();
    if (c == std::char_traits<char>::eof()) return false;

    std::string field;
    bool quoted = false;
    ++line_no;
    std::size_t start_line = line_no;
    while (true) {
        if (c == std::char_traits<char>::eof()) {
            if (quoted) {
                throw Error(errc::parse_error, std::string(source) + ":" +
                                                   std::to_string(start_line) +
                                                   ": unterminated quoted field");
            }
            if (!field.empty() && field.back() == '\r') field.pop_back();
            fields.push_back(std::move(field));
            return true;
        }
        char ch = static_cast<char>(c);
        if (quoted) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get();
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                if (ch == '\n') ++line_no;
                field += ch;
            }
        } else if (ch == '"' && field.empty()) {
            quoted = true;
        } else if (ch == delimiter) {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            fields.push_back(std::move(field));
            return true;
        } else {
            field += ch;
        }
        c = in.get();
    }
}

void strip_bom(std::string& s) {
    if (s.starts_with("\xEF\xBB\xBF")) s.erase(0, 3);
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name,
                        std::string_view source) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw Error(errc::missing_column,
                std::string(source) + ": no column named '" + name + "'");
}

std::string_view cell(const std::vector<std::string>& row, std::size_t index) {
    return index < row.size() ? std::string_view(row[index]) : std::string_view();
}

char default_delimiter(const std::filesystem::path& path) {
    return path.extension() == ".tsv" ? '\t' : ',';
}

// Minimal CSV quoting for the canonical writer.
void write_cell(std::ostream& out, std::string_view value) {
    if (value.find_first_of(",\"\r\n") == std::string_view::npos) {
        out << value;
        return;
    }
    out << '"';
    for (char ch : value) {
        if (ch == '"') out << '"';
        out << ch;
    }
    out << '"';
}

} // namespace

ColumnMapping canonical_mapping() {
    ColumnMapping mapping;
    mapping.generic_name = "generic_name";
    mapping.granularity = "granularity";
    return mapping;
}

DatasetLoadResult load_dataset(const std::filesystem::path& path,
                               const ColumnMapping& mapping, IngestMode mode,
                               std::optional<char> delimiter) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::parse_error, "cannot open " + path.string());
    return load_dataset(in, mapping, mode, delimiter.value_or(default_delimiter(path)),
                        path.string());
}

DatasetLoadResult load_dataset(std::istream& in, const ColumnMapping& mapping,
                               IngestMode mode, char delimiter,
                               std::string_view source_name) {
    std::vector<std::string> row;
    std::size_t line_no = 0;
    if (!read_record(in, delimiter, row, line_no, source_name)) {
        throw Error(errc::parse_error, std::string(source_name) + ": empty input");
    }
    if (!row.empty()) strip_bom(row.front());

    std::size_t mention_col = find_column(row, mapping.mention, source_name);
    std::size_t gold_col = find_column(row, mapping.gold, source_name);
    std::optional<std::size_t> generic_col;
    std::optional<std::size_t> granularity_col;
    if (mapping.generic_name) {
        generic_col = find_column(row, *mapping.generic_name, source_name);
    }
    if (mapping.granularity) {
        granularity_col = find_column(row, *mapping.granularity, source_name);
    }

    DatasetLoadResult result;
    while (read_record(in, delimiter, row, line_no, source_name)) {
        if (row.size() == 1 && trim(row.front()).empty()) continue;
        auto fail = [&](const std::string& why) {
            std::string where = std::string(source_name) + ":" + std::to_string(line_no);
            if (mode == IngestMode::strict) {
                throw Error(errc::parse_error, where + ": " + why);
            }
            ++result.skipped;
        };

        std::string mention(trim(cell(row, mention_col)));
        if (mention.empty()) {
            fail("empty mention");
            continue;
        }
        std::optional<AtcCode> gold;
        try {
            gold = AtcCode::parse(trim(cell(row, gold_col)));
        } catch (const Error& e) {
            fail(e.what());
            continue;
        }

        std::optional<std::string> generic_name;
        if (generic_col) {
            std::string generic(trim(cell(row, *generic_col)));
            if (!generic.empty()) generic_name = std::move(generic);
        }
        std::optional<int> granularity;
        if (granularity_col) {
            std::string text(trim(cell(row, *granularity_col)));
            if (!text.empty()) {
                if (text.size() != 1 || text[0] < '0' || text[0] > '5') {
                    fail("granularity '" + text + "' is not in 0-5");
                    continue;
                }
                granularity = text[0] - '0';
            }
        }
        result.items.push_back(
            {std::move(mention), *gold, std::move(generic_name), granularity});
    }
    return result;
}

void write_dataset_csv(std::ostream& out, const std::vector<LabeledMention>& items) {
    out << "mention,gold,generic_name,granularity\n";
    for (const LabeledMention& item : items) {
        write_cell(out, item.mention);
        out << ',' << item.gold.text() << ',';
        if (item.generic_name) write_cell(out, *item.generic_name);
        out << ',';
        if (item.granularity) out << *item.granularity;
        out << '\n';
    }
}

SplitResult stratified_split(const std::vector<LabeledMention>& data, double ratio,
                             std::uint32_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw Error(errc::precondition, "ratio must be in (0, 1)");
    }

    // std::map keeps stratum iteration order independent of input order.
    std::map<std::string, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < data.size(); ++i) {
        strata[data[i].gold.prefix_at_level(1).text()].push_back(i);
    }

    SplitResult result;
    result.seed = seed;
    result.ratio = ratio;
    std::mt19937 rng(seed);
    auto canonical = [&data](std::size_t a, std::size_t b) {
        const LabeledMention& x = data[a];
        const LabeledMention& y = data[b];
        return std::tie(x.mention, x.gold.text(), x.generic_name, x.granularity) <
               std::tie(y.mention, y.gold.text(), y.generic_name, y.granularity);
    };
    for (auto& [key, indices] : strata) {
        if (indices.size() < 2) {
            for (std::size_t i : indices) result.train.push_back(data[i]);
            continue;
        }
        // Canonical order first so the shuffle, and therefore the split,
        // is a function of (items, ratio, seed) alone, not of input order.
        std::sort(indices.begin(), indices.end(), canonical);
        std::shuffle(indices.begin(), indices.end(), rng);
        auto n_train = static_cast<std::size_t>(
            std::lround(static_cast<double>(indices.size()) * ratio));
        n_train = std::min(n_train, indices.size());
        for (std::size_t i = 0; i < indices.size(); ++i) {
            (i < n_train ? result.train : result.test).push_back(data[indices[i]]);
        }
    }
    return result;
}

double substring_overlap_rate(const std::vector<LabeledMention>& data) {
    std::size_t eligible = 0;
    std::size_t overlapping = 0;
    for (const LabeledMention& item : data) {
        if (!item.generic_name) continue;
        std::string mention = to_lower(trim(item.mention));
        std::string generic = to_lower(trim(*item.generic_name));
        if (mention.empty() || generic.empty()) continue;
        ++eligible;
        if (mention.find(generic) != std::string::npos ||
            generic.find(mention) != std::string::npos) {
            ++overlapping;
        }
    }
    if (eligible == 0) {
        throw Error(errc::empty_eligible_set, "no items carry a generic name");
    }
    return static_cast<double>(overlapping) / static_cast<double>(eligible);
}

} // namespace atc
