#include "atc/ontology.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "atc/text.hpp"

namespace atc {

namespace {

// Character class per 0-based position: letter, digit, digit, letter,
// letter, digit, digit.
bool position_ok(std::size_t pos, char c) {
    switch (pos) {
    case 0:
    case 3:
    case 4:
        return is_ascii_upper(c);
    default:
        return is_ascii_digit(c);
    }
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char byte : data) {
        hash ^= byte;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

} // namespace

int level_for_length(std::size_t length) noexcept {
    for (int k = 1; k <= kMaxLevel; ++k) {
        if (kLevelLengths[k - 1] == static_cast<int>(length)) return k;
    }
    return 0;
}

AtcCode AtcCode::parse(std::string_view text) {
    std::string upper = to_upper(text);
    int level = level_for_length(upper.size());
    if (level == 0) {
        throw Error(errc::invalid_length,
                    "'" + upper + "' has length " + std::to_string(upper.size()) +
                        ", expected 1, 3, 4, 5 or 7");
    }
    for (std::size_t i = 0; i < upper.size(); ++i) {
        if (!position_ok(i, upper[i])) {
            throw Error(errc::invalid_pattern,
                        "'" + upper + "' has an invalid character at position " +
                            std::to_string(i + 1));
        }
    }
    return AtcCode(std::move(upper), level);
}

AtcCode AtcCode::prefix_at_level(int k) const {
    if (k < 1) throw Error(errc::precondition, "level must be at least 1");
    if (k > level_) {
        throw Error(errc::level_exceeds_code, "level " + std::to_string(k) +
                                                  " exceeds level " + std::to_string(level_) +
                                                  " of '" + text_ + "'");
    }
    return AtcCode(text_.substr(0, kLevelLengths[k - 1]), k);
}

std::optional<AtcCode> AtcCode::parent() const {
    if (level_ == 1) return std::nullopt;
    return prefix_at_level(level_ - 1);
}

Ontology Ontology::load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::parse_error, "cannot open '" + path.string() + "'");
    return load(in, path.string());
}

Ontology Ontology::load(std::istream& in, std::string_view source_name) {
    std::vector<OntologyEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (first) {
            if (view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
            first = false;
        }
        if (view.ends_with('\r')) view.remove_suffix(1);
        std::string_view stripped = trim(view);
        if (stripped.empty() || stripped.front() == '#') continue;

        auto where = [&] { return std::string(source_name) + ":" + std::to_string(line_no); };
        std::size_t tab = view.find('\t');
        if (tab == std::string_view::npos || view.find('\t', tab + 1) != std::string_view::npos) {
            throw Error(errc::parse_error,
                        where() + ": expected exactly two tab-separated fields");
        }
        std::string_view code_field = trim(view.substr(0, tab));
        std::string_view name_field = trim(view.substr(tab + 1));
        if (name_field.empty()) throw Error(errc::parse_error, where() + ": empty name");
        try {
            entries.push_back({AtcCode::parse(code_field), std::string(name_field)});
        } catch (const Error& e) {
            throw Error(errc::parse_error, where() + ": " + e.what());
        }
    }
    return from_entries(std::move(entries));
}

Ontology Ontology::from_entries(std::vector<OntologyEntry> entries) {
    Ontology ontology;
    for (OntologyEntry& entry : entries) {
        if (trim(entry.name).empty()) {
            throw Error(errc::parse_error, "entry '" + entry.code.text() + "' has an empty name");
        }
        std::string key = entry.code.text();
        auto [it, inserted] = ontology.entries_.emplace(std::move(key), std::move(entry));
        if (!inserted) {
            throw Error(errc::duplicate_code, "'" + it->first + "' appears more than once");
        }
    }
    for (const auto& [text, entry] : ontology.entries_) {
        auto parent = entry.code.parent();
        if (!parent.has_value()) {
            ontology.roots_.push_back(text);
            continue;
        }
        if (!ontology.entries_.contains(parent->text())) {
            throw Error(errc::orphan_code,
                        "'" + text + "' has no parent entry '" + parent->text() + "'");
        }
        ontology.children_[parent->text()].push_back(text);
    }
    // entries_ iterates in sorted order, so child lists and roots_ are
    // already ascending by code text.
    return ontology;
}

bool Ontology::contains(std::string_view code_text) const {
    return entries_.find(code_text) != entries_.end();
}

const OntologyEntry* Ontology::find(std::string_view code_text) const {
    auto it = entries_.find(code_text);
    return it == entries_.end() ? nullptr : &it->second;
}

const OntologyEntry& Ontology::at(const AtcCode& code) const {
    const OntologyEntry* entry = find(code.text());
    if (entry == nullptr) {
        throw Error(errc::unknown_code, "'" + code.text() + "' is not in the ontology");
    }
    return *entry;
}

std::vector<const OntologyEntry*> Ontology::children(const std::optional<AtcCode>& parent) const {
    std::vector<const OntologyEntry*> out;
    if (!parent.has_value()) {
        out.reserve(roots_.size());
        for (const std::string& text : roots_) out.push_back(&entries_.at(text));
        return out;
    }
    if (!contains(parent->text())) {
        throw Error(errc::unknown_code, "'" + parent->text() + "' is not in the ontology");
    }
    auto it = children_.find(parent->text());
    if (it == children_.end()) return out;
    out.reserve(it->second.size());
    for (const std::string& text : it->second) out.push_back(&entries_.at(text));
    return out;
}

std::array<std::size_t, kMaxLevel> Ontology::level_counts() const {
    std::array<std::size_t, kMaxLevel> counts{};
    for (const auto& [text, entry] : entries_) ++counts[entry.code.level() - 1];
    return counts;
}

OptionStats Ontology::option_stats() const {
    if (entries_.empty()) throw Error(errc::precondition, "option_stats on an empty ontology");
    std::size_t parents = 1; // the virtual root always has children here
    std::size_t total = roots_.size();
    std::size_t max = roots_.size();
    for (const auto& [text, kids] : children_) {
        ++parents;
        total += kids.size();
        max = std::max(max, kids.size());
    }
    return {static_cast<double>(total) / static_cast<double>(parents), static_cast<int>(max)};
}

std::vector<const OntologyEntry*> Ontology::entries_sorted() const {
    std::vector<const OntologyEntry*> out;
    out.reserve(entries_.size());
    for (const auto& [text, entry] : entries_) out.push_back(&entry);
    return out;
}

std::string Ontology::to_tsv() const {
    std::ostringstream out;
    for (const auto& [text, entry] : entries_) out << text << '\t' << entry.name << '\n';
    return out.str();
}

std::string Ontology::fingerprint() const {
    std::uint64_t hash = fnv1a64(to_tsv());
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[hash & 0xF];
        hash >>= 4;
    }
    return out;
}

} // namespace atc
