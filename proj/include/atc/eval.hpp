#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "atc/data.hpp"
#include "atc/ontology.hpp"

namespace atc {

/// Deepest level k at which gold and predicted share the level-k prefix;
/// 0 if they differ already at level 1.
int correct_level(const AtcCode& gold, const AtcCode& predicted);

/// Abstained predictions (nullopt) score 0.
int correct_level(const AtcCode& gold, const std::optional<AtcCode>& predicted);

struct CappedLevel {
    int value = 0;
    bool capped = false; // the granularity annotation bound the value
};

/// Applies the granularity cap: min(correct_level, granularity) when a
/// granularity is present, with capped = true when granularity <= the
/// uncapped level. Granularity must be in 0-5.
CappedLevel capped_correct_level(const AtcCode& gold,
                                 const std::optional<AtcCode>& predicted,
                                 std::optional<int> granularity);

struct EvalExample {
    LabeledMention item;
    std::optional<AtcCode> predicted; // nullopt = abstained
};

struct PerExampleResult {
    std::string mention;
    AtcCode gold;
    std::optional<AtcCode> predicted;
    int correct_level = 0;
    bool capped = false;
};

struct EvalReport {
    std::vector<PerExampleResult> per_example;
    std::array<double, kMaxLevel> cumulative{}; // [k-1] = A@>=k
    std::size_t n_evaluated = 0;
    std::size_t n_excluded = 0;
};

struct EvalOptions {
    /// Evaluate only items whose granularity is 5 (or absent); everything
    /// else is excluded and counted. Default mode excludes only
    /// granularity-0 items.
    bool granularity5_only = false;
};

/// Scores every eligible example and accumulates the cumulative accuracy
/// rows A@>=1 .. A@>=5 (non-increasing in k by construction). Throws
/// Error{empty_evaluation} if no example survives exclusion.
EvalReport build_report(const std::vector<EvalExample>& examples,
                        const EvalOptions& options = {});

/// {"cumulative":{"1":..,..,"5":..}, "n_evaluated":.., "n_excluded":..,
///  "per_example":[{mention, gold, predicted, correct_level, capped}]}
nlohmann::json report_to_json(const EvalReport& report);

/// Aligned text table with rows ">=5" down to ">=1" (printed as
/// "≥5".."≥1") and one column per run.
std::string report_table(const std::vector<std::pair<std::string, const EvalReport*>>& runs);
std::string report_table(const EvalReport& report);

} // namespace atc
