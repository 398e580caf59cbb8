#include "atc/knowledge.hpp"

#include <fstream>

#include "atc/text.hpp"

namespace atc {

std::string_view to_string(GroundingSetting setting) noexcept {
    switch (setting) {
    case GroundingSetting::code_only: return "code-only";
    case GroundingSetting::with_name: return "with-name";
    case GroundingSetting::with_umls: return "with-umls";
    }
    return "with-name";
}

GroundingSetting grounding_from_string(std::string_view text) {
    if (text == "code-only") return GroundingSetting::code_only;
    if (text == "with-name") return GroundingSetting::with_name;
    if (text == "with-umls") return GroundingSetting::with_umls;
    throw Error(errc::config_error, "unknown grounding setting '" + std::string(text) +
                                        "', expected code-only, with-name or with-umls");
}

DefinitionStore DefinitionStore::load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::parse_error, "cannot open '" + path.string() + "'");
    return load(in, path.string());
}

DefinitionStore DefinitionStore::load(std::istream& in, std::string_view source_name) {
    std::vector<std::pair<std::string, std::string>> pairs;
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
        std::string_view def_field = trim(view.substr(tab + 1));
        if (def_field.empty()) throw Error(errc::parse_error, where() + ": empty definition");
        try {
            AtcCode code = AtcCode::parse(code_field);
            pairs.emplace_back(code.text(), std::string(def_field));
        } catch (const Error& e) {
            throw Error(errc::parse_error, where() + ": " + e.what());
        }
    }
    return from_pairs(std::move(pairs));
}

DefinitionStore DefinitionStore::from_pairs(std::vector<std::pair<std::string, std::string>> pairs) {
    DefinitionStore store;
    for (auto& [code_text, definition] : pairs) {
        AtcCode code = AtcCode::parse(code_text);
        if (trim(definition).empty()) {
            throw Error(errc::parse_error, "empty definition for '" + code.text() + "'");
        }
        auto [it, inserted] = store.defs_.emplace(code.text(), std::move(definition));
        if (!inserted) {
            throw Error(errc::duplicate_code, "'" + it->first + "' appears more than once");
        }
    }
    return store;
}

const std::string* DefinitionStore::find(std::string_view code_text) const {
    auto it = defs_.find(code_text);
    return it == defs_.end() ? nullptr : &it->second;
}

std::string render_option(const OntologyEntry& entry, GroundingSetting setting,
                          const DefinitionStore& defs) {
    switch (setting) {
    case GroundingSetting::code_only:
        return entry.code.text();
    case GroundingSetting::with_name:
        return entry.code.text() + ": " + entry.name;
    case GroundingSetting::with_umls:
        if (const std::string* def = defs.find(entry.code.text())) {
            return entry.code.text() + ": " + *def;
        }
        return entry.code.text() + ": " + entry.name;
    }
    return entry.code.text();
}

} // namespace atc
