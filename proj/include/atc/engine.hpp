#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "atc/backend.hpp"
#include "atc/knowledge.hpp"
#include "atc/ontology.hpp"

namespace atc {

inline constexpr std::string_view kSystemPrompt =
    "You are a pharmacology expert specializing in ATC classification.";

struct RenderedOption {
    AtcCode code;
    std::string text; // full option line as shown in the prompt

    friend bool operator==(const RenderedOption&, const RenderedOption&) = default;
};

/// Option lines for the children of `parent` (nullopt = level-1 roots),
/// in the ontology's sorted child order. Empty for a leaf.
std::vector<RenderedOption> render_options(const std::optional<AtcCode>& parent,
                                           const Ontology& ontology,
                                           GroundingSetting setting,
                                           const DefinitionStore& defs);

/// The two-message prompt asking to classify `mention` among the children
/// of `parent`. Pure: identical inputs yield byte-identical messages.
/// Throws Error{no_children} if `parent` has no children.
std::vector<ChatMessage> render_prompt(std::string_view mention,
                                       const std::optional<AtcCode>& parent,
                                       const Ontology& ontology,
                                       GroundingSetting setting,
                                       const DefinitionStore& defs);

struct NormalizedReply {
    enum class Kind { matched, no_match, ambiguous };

    Kind kind = Kind::no_match;
    std::optional<AtcCode> code; // set iff kind == matched
};

/// Maps a raw model reply onto one of the presented options, first match
/// wins: exact code (after trimming and uppercasing), a unique option
/// code occurring as a token anywhere in the reply (which covers
/// "CODE: ..." and "CODE ..." prefix replies), then a unique option name
/// contained case-insensitively in the reply. Two or more distinct hits
/// at the same stage are ambiguous, never a coin flip.
NormalizedReply normalize_reply(std::string_view raw,
                                const std::vector<RenderedOption>& options);

struct LevelStep {
    int level = 0;
    std::vector<RenderedOption> options;
    std::string raw_reply; // empty for auto-selected steps
    std::optional<AtcCode> selected;
    bool auto_selected = false;
};

/// Full record of one mention's traversal. One step is recorded per
/// backend attempt (retries included) and per auto-descent; steps with a
/// selection form a root-to-leaf chain with strictly increasing levels.
struct CodingTrace {
    std::string mention;
    GroundingSetting grounding = GroundingSetting::with_name;
    std::vector<LevelStep> steps;
    std::optional<AtcCode> final_code;

    bool abstained() const noexcept { return !final_code.has_value(); }
};

struct EngineConfig {
    GroundingSetting grounding = GroundingSetting::with_name;
    int retries_per_level = 2;
    bool auto_select_single_child = true;
};

/// Level-by-level traversal driver. Holds references only; the ontology,
/// definitions, and backend must outlive the coder. Safe to use from
/// multiple threads as long as the backend is.
class Coder {
public:
    Coder(const Ontology& ontology, const DefinitionStore& defs, Backend& backend,
          GenerationParams params, EngineConfig config);

    /// Descends from the root, prompting at each level (single-child
    /// levels descend without a call when auto-select is on) and
    /// re-asking up to retries_per_level times on unusable replies.
    /// Stops at a leaf or at the deepest matched level; a mention whose
    /// level-1 selection never matches is Abstained. The final code,
    /// when present, always exists in the ontology.
    CodingTrace code_mention(std::string_view mention) const;

    struct BatchResult {
        CodingTrace trace;
        std::optional<std::string> error; // set when the traversal failed
    };

    /// Runs up to max_concurrency traversals in parallel; results are in
    /// input order and per-mention failures are captured in their slot.
    std::vector<BatchResult> code_batch(const std::vector<std::string>& mentions,
                                        int max_concurrency) const;

private:
    const Ontology& ontology_;
    const DefinitionStore& defs_;
    Backend& backend_;
    GenerationParams params_;
    EngineConfig config_;
};

/// JSONL trace schema: {mention, grounding, final, abstained,
/// steps:[{level, options, raw_reply, selected, auto_selected}]} where
/// options is the list of option code texts.
nlohmann::json trace_to_json(const CodingTrace& trace);

struct TracePrediction {
    std::string mention;
    std::optional<AtcCode> final_code;
};

/// Reads back the fields of a trace line that evaluation needs.
TracePrediction trace_prediction_from_json(const nlohmann::json& j);

} // namespace atc
