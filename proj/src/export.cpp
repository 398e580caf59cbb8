#include "atc/export.hpp"

namespace atc {

SftStats export_sft(const std::vector<LabeledMention>& data, const Ontology& ontology,
                    GroundingSetting setting, const DefinitionStore& defs,
                    bool include_single_child,
                    const std::function<void(const SftRecord&)>& sink) {
    SftStats stats;
    for (const LabeledMention& item : data) {
        if (!ontology.contains(item.gold.text())) {
            ++stats.skipped_missing_gold;
            continue;
        }
        std::optional<AtcCode> parent;
        for (int level = 1; level <= item.gold.level(); ++level) {
            AtcCode gold_child = item.gold.prefix_at_level(level);
            std::vector<RenderedOption> options =
                render_options(parent, ontology, setting, defs);
            if (options.size() > 1 || include_single_child) {
                const RenderedOption* gold_option = nullptr;
                for (const RenderedOption& option : options) {
                    if (option.code == gold_child) gold_option = &option;
                }
                if (!gold_option) {
                    throw Error(errc::unknown_code, "'" + gold_child.text() +
                                                        "' missing among its siblings");
                }
                std::vector<ChatMessage> messages =
                    render_prompt(item.mention, parent, ontology, setting, defs);
                messages.push_back({Role::assistant, gold_option->text});
                sink({std::move(messages), item.mention, level, gold_child});
                ++stats.records;
            }
            parent = gold_child;
        }
    }
    return stats;
}

std::vector<SftRecord> export_sft_collect(const std::vector<LabeledMention>& data,
                                          const Ontology& ontology,
                                          GroundingSetting setting,
                                          const DefinitionStore& defs,
                                          bool include_single_child) {
    std::vector<SftRecord> records;
    export_sft(data, ontology, setting, defs, include_single_child,
               [&](const SftRecord& record) { records.push_back(record); });
    return records;
}

nlohmann::json sft_record_to_json(const SftRecord& record) {
    nlohmann::json messages = nlohmann::json::array();
    for (const ChatMessage& message : record.messages) {
        messages.push_back({{"role", std::string(to_string(message.role))},
                            {"content", message.content}});
    }
    return {{"messages", std::move(messages)},
            {"meta",
             {{"mention", record.mention},
              {"level", record.level},
              {"gold_code", record.gold_code.text()}}}};
}

nlohmann::json build_manifest(const SftManifest& manifest, std::string_view created_at) {
    return {{"grounding", std::string(to_string(manifest.grounding))},
            {"ontology_fingerprint", manifest.ontology_fingerprint},
            {"record_count", manifest.record_count},
            {"skipped_missing_gold", manifest.skipped_missing_gold},
            {"include_single_child", manifest.include_single_child},
            {"created_at", std::string(created_at)},
            {"reference_hyperparameters",
             {{"learning_rate", kReferenceLearningRate},
              {"epochs", kReferenceEpochs},
              {"batch_size", kReferenceBatchSize}}}};
}

} // namespace atc
