#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "atc/errors.hpp"

namespace atc {

inline constexpr int kMaxLevel = 5;

/// Character length of a code at each level (index = level - 1).
inline constexpr std::array<int, kMaxLevel> kLevelLengths{1, 3, 4, 5, 7};

/// Level encoded by a code of `length` characters, or 0 if no level uses
/// that length.
int level_for_length(std::size_t length) noexcept;

/// A validated ATC code. The level (1-5) is derived from the text length
/// (1/3/4/5/7 characters). Character classes per position: letter,
/// digit, digit, letter, letter, digit, digit.
class AtcCode {
public:
    /// Uppercases `text`, then validates length and character pattern.
    /// Throws Error{invalid_length} or Error{invalid_pattern}.
    static AtcCode parse(std::string_view text);

    const std::string& text() const noexcept { return text_; }
    int level() const noexcept { return level_; }

    /// The code truncated to its level-k prefix. Requires 1 <= k <= level().
    AtcCode prefix_at_level(int k) const;

    /// Prefix one level up, or nullopt for a level-1 code.
    std::optional<AtcCode> parent() const;

    friend bool operator==(const AtcCode&, const AtcCode&) = default;
    friend std::strong_ordering operator<=>(const AtcCode&, const AtcCode&) = default;

private:
    AtcCode(std::string text, int level) : text_(std::move(text)), level_(level) {}

    std::string text_;
    int level_ = 0;
};

struct OntologyEntry {
    AtcCode code;
    std::string name;

    friend bool operator==(const OntologyEntry&, const OntologyEntry&) = default;
};

struct OptionStats {
    double mean_branching = 0.0;
    int max_branching = 0;
};

/// Immutable prefix hierarchy over ATC codes. Closed under parents: every
/// non-root entry's parent prefix is also an entry. Safe to share across
/// threads after construction.
class Ontology {
public:
    /// Reads the canonical ontology TSV: UTF-8, one "code<TAB>name" per
    /// line, '#' comment lines and blank lines ignored, no header.
    static Ontology load_file(const std::filesystem::path& path);
    static Ontology load(std::istream& in, std::string_view source_name = "<stream>");

    /// Validates and indexes the given entries (duplicate codes, orphaned
    /// codes, and empty names are rejected).
    static Ontology from_entries(std::vector<OntologyEntry> entries);

    bool contains(std::string_view code_text) const;
    const OntologyEntry* find(std::string_view code_text) const;
    const OntologyEntry& at(const AtcCode& code) const;

    /// Entries one level below `parent`, sorted ascending by code text.
    /// nullopt asks for the level-1 roots. Throws Error{unknown_code} if
    /// `parent` is not in the ontology.
    std::vector<const OntologyEntry*> children(const std::optional<AtcCode>& parent) const;

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::array<std::size_t, kMaxLevel> level_counts() const;

    /// Branching statistics over every node with at least one child,
    /// the (virtual) root included. Requires a non-empty ontology.
    OptionStats option_stats() const;

    /// All entries sorted ascending by code text.
    std::vector<const OntologyEntry*> entries_sorted() const;

    /// Canonical serialization: sorted "code<TAB>name" lines. Reloading
    /// the output yields an equal ontology.
    std::string to_tsv() const;

    /// 64-bit FNV-1a over the canonical serialization, as 16 hex digits.
    std::string fingerprint() const;

    friend bool operator==(const Ontology& a, const Ontology& b) { return a.entries_ == b.entries_; }

private:
    Ontology() = default;

    // Keyed by code text; std::map keeps children lists and serialization
    // in sorted order without extra passes.
    std::map<std::string, OntologyEntry, std::less<>> entries_;
    std::map<std::string, std::vector<std::string>, std::less<>> children_;
    std::vector<std::string> roots_;
};

} // namespace atc
