#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "atc/ontology.hpp"

namespace atc {

/// How much context accompanies each code option in a prompt.
enum class GroundingSetting {
    code_only, // "A12AA01"
    with_name, // "A12AA01: calcium phosphate"
    with_umls, // "A12AA01: <definition>", falling back to with_name
};

std::string_view to_string(GroundingSetting setting) noexcept;

/// Parses "code-only" | "with-name" | "with-umls". Throws Error{config_error}.
GroundingSetting grounding_from_string(std::string_view text);

/// Per-code definition text keyed by code. Keys must parse as ATC codes
/// (stored uppercased) but need not belong to any particular ontology.
/// Immutable after load.
class DefinitionStore {
public:
    DefinitionStore() = default;

    /// Reads "code<TAB>definition" lines; '#' comments and blank lines ignored.
    static DefinitionStore load_file(const std::filesystem::path& path);
    static DefinitionStore load(std::istream& in, std::string_view source_name = "<stream>");

    static DefinitionStore from_pairs(std::vector<std::pair<std::string, std::string>> pairs);

    /// Definition for the code, or nullptr.
    const std::string* find(std::string_view code_text) const;

    std::size_t size() const noexcept { return defs_.size(); }

private:
    std::map<std::string, std::string, std::less<>> defs_;
};

/// One option line for the prompt. Always begins with the code text.
std::string render_option(const OntologyEntry& entry, GroundingSetting setting,
                          const DefinitionStore& defs);

} // namespace atc
