// Acceptance checks for the coding pipeline, one printed line each.
// Exit status is the number of failed checks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "atc/backend.hpp"
#include "atc/data.hpp"
#include "atc/engine.hpp"
#include "atc/eval.hpp"
#include "atc/export.hpp"
#include "atc/knowledge.hpp"
#include "atc/ontology.hpp"
#include "support/synthetic_ontology.hpp"

namespace {

using namespace atc;
using Clock = std::chrono::steady_clock;

constexpr double kBudgetNoFabricationSec = 10.0;
constexpr double kBudgetOracleSec = 5.0;
constexpr double kEps = 1e-12;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Harness {
    int failures = 0;
    int index = 0;

    void report(const char* name, bool ok, const std::string& detail) {
        ++index;
        std::printf("[%s] %d. %s (%s)\n", ok ? "PASS" : "FAIL", index, name, detail.c_str());
        if (!ok) ++failures;
    }
};

// Every selection must be an ontology member and a child of the previous
// selection; the final code must be the deepest selection.
bool trace_is_sound(const CodingTrace& trace, const Ontology& ontology) {
    std::optional<AtcCode> prev;
    int prev_level = 0;
    for (const LevelStep& step : trace.steps) {
        if (!step.selected.has_value()) continue;
        const AtcCode& selected = *step.selected;
        if (!ontology.contains(selected.text())) return false;
        if (selected.level() != step.level) return false;
        if (step.level <= prev_level) return false;
        bool in_options = false;
        for (const RenderedOption& option : step.options) {
            if (option.code == selected) in_options = true;
        }
        if (!in_options) return false;
        std::optional<AtcCode> parent = selected.parent();
        if (parent.has_value() != prev.has_value()) return false;
        if (parent.has_value() && !(*parent == *prev)) return false;
        prev = selected;
        prev_level = step.level;
    }
    if (trace.final_code.has_value() != prev.has_value()) return false;
    if (prev.has_value() && !(*trace.final_code == *prev)) return false;
    return true;
}

void check_no_fabrication(Harness& h) {
    auto start = Clock::now();
    Ontology ontology = test::synthetic_ontology();

    // Replies cycle through garbage, hedges, and genuine codes pulled
    // from all over the ontology, so traversals descend to varying
    // depths before stalling.
    std::vector<const OntologyEntry*> entries = ontology.entries_sorted();
    const char* roots = "ABCDGHJLMNPRSV";
    std::vector<std::string> script;
    std::mt19937 rng(99);
    for (int i = 0; i < 97; ++i) {
        switch (i % 6) {
        case 0:
            script.push_back(entries[rng() % entries.size()]->code.text());
            break;
        case 1:
            script.push_back("I cannot determine the category.");
            break;
        case 2:
            script.push_back("The answer is clearly Q99.");
            break;
        case 3:
            script.push_back("Either " + entries[rng() % entries.size()]->code.text() +
                             " or " + entries[rng() % entries.size()]->code.text());
            break;
        case 4:
            script.push_back(std::string(1, roots[rng() % 14]));
            break;
        default:
            script.push_back("  " + entries[rng() % entries.size()]->code.text() +
                             ": some description");
            break;
        }
    }
    AdversarialBackend backend(std::move(script));
    DefinitionStore defs;
    Coder coder(ontology, defs, backend, {}, {});

    std::vector<std::string> mentions;
    mentions.reserve(1000);
    for (int i = 0; i < 1000; ++i) mentions.push_back("mention-" + std::to_string(i));
    std::vector<Coder::BatchResult> results = coder.code_batch(mentions, 8);

    int violations = 0;
    int coded = 0;
    for (const Coder::BatchResult& result : results) {
        if (result.error.has_value()) {
            ++violations;
            continue;
        }
        if (!trace_is_sound(result.trace, ontology)) ++violations;
        if (result.trace.final_code.has_value()) ++coded;
    }
    double elapsed = seconds_since(start);

    std::ostringstream detail;
    detail << results.size() << " traversals over " << ontology.size() << " nodes, "
           << coded << " coded, " << violations << " violations, " << elapsed << "s";
    bool ok = ontology.size() >= 300 && results.size() == 1000 && violations == 0 &&
              coded > 0 && elapsed < kBudgetNoFabricationSec;
    h.report("no-fabrication under an adversarial backend", ok, detail.str());
}

void check_oracle_completeness(Harness& h) {
    auto start = Clock::now();
    Ontology ontology = test::synthetic_ontology();
    std::vector<AtcCode> leaves = test::leaf_codes(ontology, 100);

    std::map<std::string, AtcCode, std::less<>> gold;
    std::vector<std::string> mentions;
    std::vector<LabeledMention> labeled;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        std::string mention = "drug-" + std::to_string(i);
        gold.insert_or_assign(mention, leaves[i]);
        mentions.push_back(mention);
        labeled.push_back({mention, leaves[i], std::nullopt, std::nullopt});
    }

    OracleBackend backend(std::move(gold));
    DefinitionStore defs;
    Coder coder(ontology, defs, backend, {}, {});
    std::vector<Coder::BatchResult> results = coder.code_batch(mentions, 4);

    std::vector<EvalExample> examples;
    bool clean = true;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].error.has_value()) clean = false;
        examples.push_back({labeled[i], results[i].trace.final_code});
    }
    EvalReport report = build_report(examples);
    double elapsed = seconds_since(start);

    std::ostringstream detail;
    detail << examples.size() << " mentions, A@>=5 = " << report.cumulative[4] << ", "
           << elapsed << "s";
    bool ok = clean && examples.size() == 100 && report.cumulative[4] == 1.0 &&
              elapsed < kBudgetOracleSec;
    h.report("oracle backend reaches every gold leaf", ok, detail.str());
}

// Independent re-derivation: the agreement level is the deepest level
// whose code length fits inside the common character prefix.
int char_scan_level(const AtcCode& gold, const AtcCode& predicted) {
    const std::string& a = gold.text();
    const std::string& b = predicted.text();
    std::size_t common = 0;
    while (common < a.size() && common < b.size() && a[common] == b[common]) ++common;
    int best = 0;
    for (int k = 1; k <= kMaxLevel; ++k) {
        if (kLevelLengths[k - 1] <= static_cast<int>(common) &&
            k <= std::min(gold.level(), predicted.level())) {
            best = k;
        }
    }
    return best;
}

void check_metric_equivalence(Harness& h) {
    Ontology ontology = test::synthetic_ontology();
    std::vector<const OntologyEntry*> entries = ontology.entries_sorted();

    std::vector<AtcCode> codes;
    for (std::size_t i = 0; i < entries.size() && codes.size() < 100;
         i += entries.size() / 100) {
        codes.push_back(entries[i]->code);
    }

    std::size_t pairs = 0;
    std::size_t disagreements = 0;
    for (const AtcCode& gold : codes) {
        for (const AtcCode& predicted : codes) {
            ++pairs;
            if (correct_level(gold, predicted) != char_scan_level(gold, predicted)) {
                ++disagreements;
            }
        }
    }
    bool spots =
        correct_level(AtcCode::parse("A10BA02"), AtcCode::parse("A10BB01")) == 3 &&
        correct_level(AtcCode::parse("A10BA02"), AtcCode::parse("A10BA03")) == 4;

    std::ostringstream detail;
    detail << pairs << " pairs, " << disagreements << " disagreements, spot checks "
           << (spots ? "hold" : "broken");
    h.report("correct_level matches the character-scan oracle",
             codes.size() == 100 && pairs == 10000 && disagreements == 0 && spots,
             detail.str());
}

void check_granularity_capping(Harness& h) {
    CappedLevel worked = capped_correct_level(AtcCode::parse("A09AA"),
                                              AtcCode::parse("A09AA02"), 4);
    bool worked_ok = worked.value == 4 && worked.capped;

    // 200 annotated notes: 166 fully codeable, 20 uncodeable, and 14
    // mid-granularity (0/2/2/10 across levels 1-4).
    const std::pair<int, int> distribution[] = {
        {5, 166}, {0, 20}, {1, 0}, {2, 2}, {3, 2}, {4, 10}};
    std::vector<EvalExample> examples;
    int serial = 0;
    for (auto [granularity, count] : distribution) {
        for (int i = 0; i < count; ++i) {
            LabeledMention item{"note-" + std::to_string(serial++),
                                AtcCode::parse("A10BA02"), std::nullopt, granularity};
            examples.push_back({item, AtcCode::parse("A10BA02")});
        }
    }
    EvalReport subset = build_report(examples, {.granularity5_only = true});
    EvalReport everything = build_report(examples);
    bool partition_ok = examples.size() == 200 && subset.n_evaluated == 166 &&
                        subset.n_excluded == 34 && everything.n_evaluated == 180 &&
                        everything.n_excluded == 20;

    std::ostringstream detail;
    detail << "worked example -> (" << worked.value << ", " << (worked.capped ? "capped" : "uncapped")
           << "), strict subset n=" << subset.n_evaluated << ", default n="
           << everything.n_evaluated;
    h.report("granularity capping and the 166-of-200 partition", worked_ok && partition_ok,
             detail.str());
}

void check_prompt_fidelity(Harness& h) {
    Ontology ontology = Ontology::load_file(std::filesystem::path(ATC_FIXTURES_DIR) /
                                            "mini_ontology.tsv");
    DefinitionStore defs = DefinitionStore::load_file(
        std::filesystem::path(ATC_FIXTURES_DIR) / "definitions.tsv");

    auto read = [](const char* name) {
        std::ifstream in(std::filesystem::path(ATC_FIXTURES_DIR) / "golden" / name,
                         std::ios::binary);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        return std::move(buffer).str();
    };

    std::vector<ChatMessage> root = render_prompt("metformin", std::nullopt, ontology,
                                                  GroundingSetting::with_name, defs);
    std::vector<ChatMessage> umls = render_prompt("Tylenol", AtcCode::parse("N"), ontology,
                                                  GroundingSetting::with_umls, defs);
    std::vector<ChatMessage> bare = render_prompt("senna", std::nullopt, ontology,
                                                  GroundingSetting::code_only, defs);

    bool system_ok =
        root[0].content == "You are a pharmacology expert specializing in ATC classification." &&
        root[0].content == umls[0].content && root[0].content == bare[0].content;
    bool user_ok = root[1].content == read("root_with_name.txt") &&
                   umls[1].content == read("n_with_umls.txt") &&
                   bare[1].content == read("root_code_only.txt");
    bool closing_ok = root[1].content.ends_with("Do not include any description.");

    std::ostringstream detail;
    detail << "system line " << (system_ok ? "verbatim" : "WRONG") << ", "
           << "3 golden user messages " << (user_ok ? "byte-identical" : "DIFFER");
    h.report("prompt rendering matches the golden files", system_ok && user_ok && closing_ok,
             detail.str());
}

void check_split_properties(Harness& h) {
    const char* roots = "ABCDGHJLMNPRSV";
    std::vector<LabeledMention> items;
    char buffer[16];
    for (int i = 0; i < 1000; ++i) {
        std::snprintf(buffer, sizeof buffer, "%c01AA%02d", roots[i % 14], i % 100);
        items.push_back({"item-" + std::to_string(i), AtcCode::parse(buffer), std::nullopt,
                         std::nullopt});
    }

    SplitResult first = stratified_split(items, 0.9, 1234);
    SplitResult second = stratified_split(items, 0.9, 1234);
    bool deterministic = first.train == second.train && first.test == second.test;
    bool partitioned = first.train.size() + first.test.size() == items.size();

    std::map<char, int> total;
    std::map<char, int> test_count;
    for (const LabeledMention& item : items) ++total[item.gold.text()[0]];
    for (const LabeledMention& item : first.test) ++test_count[item.gold.text()[0]];
    bool strata_ok = total.size() == 14;
    double max_deviation = 0.0;
    for (const auto& [root, n] : total) {
        double deviation = std::abs(test_count[root] - 0.1 * n);
        max_deviation = std::max(max_deviation, deviation);
        if (deviation > 1.0 + kEps) strata_ok = false;
    }

    std::ostringstream detail;
    detail << total.size() << " strata, max |test - 10%| = " << max_deviation
           << " items, deterministic " << (deterministic ? "yes" : "NO");
    h.report("stratified split is deterministic and balanced",
             deterministic && partitioned && strata_ok, detail.str());
}

void check_grounding_renderings(Harness& h) {
    OntologyEntry entry{AtcCode::parse("A12AA01"), "calcium phosphate"};
    DefinitionStore empty;
    DefinitionStore defs = DefinitionStore::from_pairs(
        {{"A12AA01",
          "A calcium salt that is used as a dietary supplement and in dentifrices."}});

    bool code_only_ok = render_option(entry, GroundingSetting::code_only, empty) == "A12AA01";
    bool with_name_ok = render_option(entry, GroundingSetting::with_name, empty) ==
                        "A12AA01: calcium phosphate";
    bool with_umls_ok =
        render_option(entry, GroundingSetting::with_umls, defs) ==
        "A12AA01: A calcium salt that is used as a dietary supplement and in dentifrices.";
    bool fallback_ok = render_option(entry, GroundingSetting::with_umls, empty) ==
                       render_option(entry, GroundingSetting::with_name, empty);

    std::ostringstream detail;
    detail << "code-only " << (code_only_ok ? "ok" : "WRONG") << ", with-name "
           << (with_name_ok ? "ok" : "WRONG") << ", with-umls " << (with_umls_ok ? "ok" : "WRONG")
           << ", fallback " << (fallback_ok ? "ok" : "WRONG");
    h.report("grounding settings render the documented option lines",
             code_only_ok && with_name_ok && with_umls_ok && fallback_ok, detail.str());
}

void check_substring_diagnostic(Harness& h) {
    std::vector<LabeledMention> pairs{
        {"GLUCOPHAGE 500mg", AtcCode::parse("A10BA02"), "metformin", std::nullopt},
        {"Metformin Hydrochloride", AtcCode::parse("A10BA02"), "metformin", std::nullopt},
    };
    double rate = substring_overlap_rate(pairs);
    std::ostringstream detail;
    detail << "two-pair fixture -> " << rate;
    h.report("substring overlap diagnostic", rate == 0.5, detail.str());
}

void check_sft_round_trip(Harness& h) {
    Ontology ontology = Ontology::load_file(std::filesystem::path(ATC_FIXTURES_DIR) /
                                            "mini_ontology.tsv");
    DefinitionStore defs;
    std::vector<LabeledMention> data{
        {"GLUCOPHAGE", AtcCode::parse("A10BA02"), std::nullopt, std::nullopt},
        {"Tylenol", AtcCode::parse("N02BE01"), std::nullopt, std::nullopt},
        {"glucose syrup", AtcCode::parse("A10B"), std::nullopt, std::nullopt},
    };

    std::vector<SftRecord> records =
        export_sft_collect(data, ontology, GroundingSetting::with_name, defs, false);

    // Closed form: one record per gold-path level offering >1 option.
    std::size_t expected = 0;
    for (const LabeledMention& item : data) {
        std::optional<AtcCode> parent;
        for (int level = 1; level <= item.gold.level(); ++level) {
            if (ontology.children(parent).size() > 1) ++expected;
            parent = item.gold.prefix_at_level(level);
        }
    }

    bool regenerates = true;
    for (const SftRecord& record : records) {
        std::vector<ChatMessage> prompt =
            render_prompt(record.mention, record.gold_code.parent(), ontology,
                          GroundingSetting::with_name, defs);
        if (record.messages.size() != 3 || record.messages[1].content != prompt[1].content ||
            record.messages[0].content != prompt[0].content) {
            regenerates = false;
        }
    }

    std::ostringstream detail;
    detail << records.size() << " records, closed form " << expected << ", user messages "
           << (regenerates ? "regenerate byte-identically" : "DIFFER");
    h.report("SFT export round-trips against render_prompt",
             regenerates && records.size() == expected && !records.empty(), detail.str());
}

void check_cumulative_shape(Harness& h) {
    // Predictions crafted to hit each agreement level exactly.
    const std::map<int, const char*> by_level{{0, "N02BE01"}, {1, "A99XX99"}, {2, "A10XX99"},
                                              {3, "A10BX99"}, {4, "A10BA99"}, {5, "A10BA02"}};
    std::mt19937 rng(2024);
    int trials = 0;
    int monotone = 0;
    for (int t = 0; t < 200; ++t) {
        std::vector<EvalExample> examples;
        std::size_t n = 1 + rng() % 50;
        for (std::size_t i = 0; i < n; ++i) {
            int level = static_cast<int>(rng() % 6);
            std::optional<int> granularity;
            if (rng() % 3 == 0) granularity = static_cast<int>(rng() % 6);
            LabeledMention item{"x" + std::to_string(i), AtcCode::parse("A10BA02"),
                                std::nullopt, granularity};
            examples.push_back({item, AtcCode::parse(by_level.at(level))});
        }
        // Keep at least one scoreable example in every trial.
        LabeledMention anchor{"anchor", AtcCode::parse("A10BA02"), std::nullopt, std::nullopt};
        examples.push_back({anchor, AtcCode::parse("A10BA02")});

        EvalReport report = build_report(examples);
        ++trials;
        bool ok = true;
        for (int k = 1; k < kMaxLevel; ++k) {
            if (report.cumulative[k] > report.cumulative[k - 1] + kEps) ok = false;
        }
        if (ok) ++monotone;
    }
    std::ostringstream detail;
    detail << monotone << "/" << trials << " randomized reports non-increasing";
    h.report("cumulative accuracy rows never increase with depth", monotone == trials,
             detail.str());
}

} // namespace

int main() {
    Harness h;
    check_no_fabrication(h);
    check_oracle_completeness(h);
    check_metric_equivalence(h);
    check_granularity_capping(h);
    check_prompt_fidelity(h);
    check_split_properties(h);
    check_grounding_renderings(h);
    check_substring_diagnostic(h);
    check_sft_round_trip(h);
    check_cumulative_shape(h);
    std::printf("%d of %d acceptance checks passed\n", h.index - h.failures, h.index);
    return h.failures;
}
