#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "atc/data.hpp"
#include "atc/engine.hpp"

namespace atc {

// Reference fine-tuning hyperparameters recorded in the export manifest
// for the downstream trainer; training itself is out of scope here.
inline constexpr double kReferenceLearningRate = 2e-5;
inline constexpr int kReferenceEpochs = 3;
inline constexpr int kReferenceBatchSize = 4;

/// One supervised example: the inference-time prompt at one level of the
/// gold path plus the gold option line as the assistant turn.
struct SftRecord {
    std::vector<ChatMessage> messages; // system, user, assistant
    std::string mention;
    int level = 0;
    AtcCode gold_code; // the gold child selected at this level
};

struct SftStats {
    std::size_t records = 0;
    std::size_t skipped_missing_gold = 0;
};

/// Replays each mention's gold traversal root -> gold, emitting one
/// record per level to `sink`. The user message is byte-identical to
/// what render_prompt produces at inference time; the assistant message
/// is the gold child's rendered option line. Levels with a single option
/// are emitted only when include_single_child is set. Mentions whose
/// gold code is absent from the ontology are skipped and counted.
SftStats export_sft(const std::vector<LabeledMention>& data, const Ontology& ontology,
                    GroundingSetting setting, const DefinitionStore& defs,
                    bool include_single_child,
                    const std::function<void(const SftRecord&)>& sink);

std::vector<SftRecord> export_sft_collect(const std::vector<LabeledMention>& data,
                                          const Ontology& ontology,
                                          GroundingSetting setting,
                                          const DefinitionStore& defs,
                                          bool include_single_child);

/// {"messages":[{"role":..,"content":..},..],
///  "meta":{"mention":..,"level":..,"gold_code":..}}
nlohmann::json sft_record_to_json(const SftRecord& record);

struct SftManifest {
    GroundingSetting grounding = GroundingSetting::with_name;
    std::string ontology_fingerprint;
    std::size_t record_count = 0;
    std::size_t skipped_missing_gold = 0;
    bool include_single_child = false;
};

/// Sidecar manifest for an export. Deterministic apart from the caller-
/// supplied created_at timestamp.
nlohmann::json build_manifest(const SftManifest& manifest, std::string_view created_at);

} // namespace atc
