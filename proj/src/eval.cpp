#include "atc/eval.hpp"

#include <algorithm>
#include <cstdio>

#include "atc/errors.hpp"

namespace atc {

int correct_level(const AtcCode& gold, const AtcCode& predicted) {
    int max_level = std::min(gold.level(), predicted.level());
    for (int k = max_level; k >= 1; --k) {
        if (gold.prefix_at_level(k) == predicted.prefix_at_level(k)) return k;
    }
    return 0;
}

int correct_level(const AtcCode& gold, const std::optional<AtcCode>& predicted) {
    return predicted ? correct_level(gold, *predicted) : 0;
}

CappedLevel capped_correct_level(const AtcCode& gold,
                                 const std::optional<AtcCode>& predicted,
                                 std::optional<int> granularity) {
    int uncapped = correct_level(gold, predicted);
    if (!granularity) return {uncapped, false};
    if (*granularity < 0 || *granularity > kMaxLevel) {
        throw Error(errc::precondition,
                    "granularity " + std::to_string(*granularity) + " is not in 0-5");
    }
    if (*granularity <= uncapped) return {*granularity, true};
    return {uncapped, false};
}

EvalReport build_report(const std::vector<EvalExample>& examples,
                        const EvalOptions& options) {
    EvalReport report;
    for (const EvalExample& example : examples) {
        const std::optional<int>& granularity = example.item.granularity;
        bool excluded = options.granularity5_only
                            ? (granularity.has_value() && *granularity != kMaxLevel)
                            : (granularity.has_value() && *granularity == 0);
        if (excluded) {
            ++report.n_excluded;
            continue;
        }
        CappedLevel level =
            capped_correct_level(example.item.gold, example.predicted, granularity);
        report.per_example.push_back({example.item.mention, example.item.gold,
                                      example.predicted, level.value, level.capped});
    }
    report.n_evaluated = report.per_example.size();
    if (report.n_evaluated == 0) {
        throw Error(errc::empty_evaluation, "no examples left to score");
    }

    std::array<std::size_t, kMaxLevel> at_least{};
    for (const PerExampleResult& result : report.per_example) {
        for (int k = 1; k <= result.correct_level; ++k) ++at_least[k - 1];
    }
    for (int k = 0; k < kMaxLevel; ++k) {
        report.cumulative[k] = static_cast<double>(at_least[k]) /
                               static_cast<double>(report.n_evaluated);
    }
    return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json cumulative = nlohmann::json::object();
    for (int k = 1; k <= kMaxLevel; ++k) {
        cumulative[std::to_string(k)] = report.cumulative[k - 1];
    }
    nlohmann::json per_example = nlohmann::json::array();
    for (const PerExampleResult& result : report.per_example) {
        per_example.push_back(
            {{"mention", result.mention},
             {"gold", result.gold.text()},
             {"predicted", result.predicted ? nlohmann::json(result.predicted->text())
                                            : nlohmann::json(nullptr)},
             {"correct_level", result.correct_level},
             {"capped", result.capped}});
    }
    return {{"cumulative", std::move(cumulative)},
            {"n_evaluated", report.n_evaluated},
            {"n_excluded", report.n_excluded},
            {"per_example", std::move(per_example)}};
}

std::string report_table(
    const std::vector<std::pair<std::string, const EvalReport*>>& runs) {
    if (runs.empty()) throw Error(errc::precondition, "no runs to tabulate");

    std::string out = "level";
    std::vector<std::size_t> widths;
    for (const auto& [name, report] : runs) {
        std::size_t width = std::max<std::size_t>(name.size(), 6);
        widths.push_back(width);
        out += "  ";
        out.append(width - name.size(), ' ');
        out += name;
    }
    out += '\n';
    for (int k = kMaxLevel; k >= 1; --k) {
        // ">=" is printed as the single glyph used in accuracy tables.
        out += "≥";
        out += std::to_string(k);
        out.append(3, ' ');
        for (std::size_t i = 0; i < runs.size(); ++i) {
            char cell[32];
            std::snprintf(cell, sizeof cell, "%.3f", runs[i].second->cumulative[k - 1]);
            std::size_t len = std::char_traits<char>::length(cell);
            out += "  ";
            if (widths[i] > len) out.append(widths[i] - len, ' ');
            out += cell;
        }
        out += '\n';
    }
    return out;
}

std::string report_table(const EvalReport& report) {
    return report_table({{"all", &report}});
}

} // namespace atc
