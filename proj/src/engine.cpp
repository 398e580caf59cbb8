#include "atc/engine.hpp"

#include <atomic>
#include <set>
#include <thread>

#include "atc/text.hpp"

namespace atc {

std::vector<RenderedOption> render_options(const std::optional<AtcCode>& parent,
                                           const Ontology& ontology,
                                           GroundingSetting setting,
                                           const DefinitionStore& defs) {
    std::vector<RenderedOption> options;
    for (const OntologyEntry* entry : ontology.children(parent)) {
        options.push_back({entry->code, render_option(*entry, setting, defs)});
    }
    return options;
}

std::vector<ChatMessage> render_prompt(std::string_view mention,
                                       const std::optional<AtcCode>& parent,
                                       const Ontology& ontology,
                                       GroundingSetting setting,
                                       const DefinitionStore& defs) {
    std::vector<RenderedOption> options = render_options(parent, ontology, setting, defs);
    if (options.empty()) {
        throw Error(errc::no_children,
                    parent ? "'" + parent->text() + "' has no children" : "ontology has no roots");
    }
    int level = parent ? parent->level() + 1 : 1;

    std::string user;
    user += "Classify the drug `";
    user += mention;
    user += "' into one of the following ATC level ";
    user += std::to_string(level);
    user += " categories:\n";
    for (const RenderedOption& option : options) {
        user += option.text;
        user += '\n';
    }
    user += "Provide ONLY one of the options listed above that best matches `";
    user += mention;
    user += "'. Do not include any description.";

    return {{Role::system, std::string(kSystemPrompt)}, {Role::user, std::move(user)}};
}

namespace {

// The name part of a rendered option line ("CODE: name" -> "name").
std::string_view option_name(const RenderedOption& option) {
    std::string_view text = option.text;
    const std::string& code = option.code.text();
    if (text.size() > code.size() && text.starts_with(code) && text[code.size()] == ':') {
        return trim(text.substr(code.size() + 1));
    }
    if (text == code) return {};
    return trim(text);
}

bool contains_token(std::string_view haystack, std::string_view needle) {
    std::size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string_view::npos) {
        bool left_ok = pos == 0 || !is_ascii_alnum(haystack[pos - 1]);
        std::size_t end = pos + needle.size();
        bool right_ok = end == haystack.size() || !is_ascii_alnum(haystack[end]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

bool contains_ci(std::string_view haystack_lower, std::string_view needle) {
    return haystack_lower.find(to_lower(needle)) != std::string_view::npos;
}

} // namespace

NormalizedReply normalize_reply(std::string_view raw,
                                const std::vector<RenderedOption>& options) {
    if (options.empty()) throw Error(errc::precondition, "options must be non-empty");

    const std::string trimmed(trim(raw));
    const std::string upper = to_upper(trimmed);

    for (const RenderedOption& option : options) {
        if (upper == option.code.text()) {
            return {NormalizedReply::Kind::matched, option.code};
        }
    }

    // Any option code occurring as a standalone token, "CODE: ..." and
    // "CODE ..." prefix replies included. Two distinct codes mean the
    // model hedged; that is an ambiguity, not a choice.
    std::set<std::string> token_hits;
    std::optional<AtcCode> token_match;
    for (const RenderedOption& option : options) {
        if (contains_token(upper, option.code.text()) &&
            token_hits.insert(option.code.text()).second) {
            token_match = option.code;
        }
    }
    if (token_hits.size() > 1) return {NormalizedReply::Kind::ambiguous, std::nullopt};
    if (token_hits.size() == 1) return {NormalizedReply::Kind::matched, token_match};

    const std::string lower = to_lower(trimmed);
    std::set<std::string> name_hits;
    std::optional<AtcCode> name_match;
    for (const RenderedOption& option : options) {
        std::string_view name = option_name(option);
        if (name.empty()) continue;
        if (contains_ci(lower, name) && name_hits.insert(option.code.text()).second) {
            name_match = option.code;
        }
    }
    if (name_hits.size() > 1) return {NormalizedReply::Kind::ambiguous, std::nullopt};
    if (name_hits.size() == 1) return {NormalizedReply::Kind::matched, name_match};

    return {NormalizedReply::Kind::no_match, std::nullopt};
}

Coder::Coder(const Ontology& ontology, const DefinitionStore& defs, Backend& backend,
             GenerationParams params, EngineConfig config)
    : ontology_(ontology), defs_(defs), backend_(backend), params_(std::move(params)),
      config_(config) {
    if (config_.retries_per_level < 0) {
        throw Error(errc::precondition, "retries_per_level must be non-negative");
    }
}

CodingTrace Coder::code_mention(std::string_view raw_mention) const {
    std::string mention(trim(raw_mention));
    if (mention.empty()) throw Error(errc::precondition, "mention is empty");
    if (ontology_.empty()) throw Error(errc::precondition, "ontology is empty");

    CodingTrace trace;
    trace.mention = mention;
    trace.grounding = config_.grounding;

    std::optional<AtcCode> parent;
    while (true) {
        std::vector<RenderedOption> options =
            render_options(parent, ontology_, config_.grounding, defs_);
        if (options.empty()) break; // leaf
        int level = parent ? parent->level() + 1 : 1;

        if (options.size() == 1 && config_.auto_select_single_child) {
            AtcCode selected = options.front().code;
            trace.steps.push_back({level, std::move(options), "", selected, true});
            trace.final_code = selected;
            parent = selected;
            continue;
        }

        std::vector<ChatMessage> messages =
            render_prompt(mention, parent, ontology_, config_.grounding, defs_);
        std::optional<AtcCode> matched;
        for (int attempt = 0; attempt <= config_.retries_per_level; ++attempt) {
            std::string raw = backend_.complete(messages, params_);
            NormalizedReply reply = normalize_reply(raw, options);
            trace.steps.push_back({level, options, std::move(raw), reply.code, false});
            if (reply.kind == NormalizedReply::Kind::matched) {
                matched = reply.code;
                break;
            }
        }
        if (!matched.has_value()) break; // stop at the deepest matched level
        trace.final_code = matched;
        parent = matched;
    }
    return trace;
}

std::vector<Coder::BatchResult> Coder::code_batch(const std::vector<std::string>& mentions,
                                                  int max_concurrency) const {
    if (max_concurrency < 1) throw Error(errc::precondition, "max_concurrency must be >= 1");

    std::vector<BatchResult> results(mentions.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= mentions.size()) return;
            try {
                results[i].trace = code_mention(mentions[i]);
            } catch (const std::exception& e) {
                results[i].trace.mention = mentions[i];
                results[i].trace.grounding = config_.grounding;
                results[i].error = e.what();
            }
        }
    };

    std::size_t n_threads = std::min<std::size_t>(max_concurrency, mentions.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(n_threads);
        for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
        for (std::thread& thread : threads) thread.join();
    }
    return results;
}

nlohmann::json trace_to_json(const CodingTrace& trace) {
    nlohmann::json steps = nlohmann::json::array();
    for (const LevelStep& step : trace.steps) {
        nlohmann::json codes = nlohmann::json::array();
        for (const RenderedOption& option : step.options) codes.push_back(option.code.text());
        steps.push_back({{"level", step.level},
                         {"options", std::move(codes)},
                         {"raw_reply", step.raw_reply},
                         {"selected", step.selected ? nlohmann::json(step.selected->text())
                                                    : nlohmann::json(nullptr)},
                         {"auto_selected", step.auto_selected}});
    }
    return {{"mention", trace.mention},
            {"grounding", std::string(to_string(trace.grounding))},
            {"final", trace.final_code ? nlohmann::json(trace.final_code->text())
                                       : nlohmann::json(nullptr)},
            {"abstained", trace.abstained()},
            {"steps", std::move(steps)}};
}

TracePrediction trace_prediction_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("mention") || !j["mention"].is_string()) {
        throw Error(errc::parse_error, "trace record has no mention field");
    }
    TracePrediction prediction;
    prediction.mention = j["mention"].get<std::string>();
    if (j.contains("final") && j["final"].is_string()) {
        prediction.final_code = AtcCode::parse(j["final"].get<std::string>());
    }
    return prediction;
}

} // namespace atc
