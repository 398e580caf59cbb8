#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "atc/ontology.hpp"

namespace atc {

struct LabeledMention {
    std::string mention;
    AtcCode gold;
    std::optional<std::string> generic_name;
    std::optional<int> granularity; // 0-5; deepest confidently assignable level

    friend bool operator==(const LabeledMention&, const LabeledMention&) = default;
};

/// Names of the input columns holding each field. generic_name and
/// granularity are only read when mapped.
struct ColumnMapping {
    std::string mention = "mention";
    std::string gold = "gold";
    std::optional<std::string> generic_name;
    std::optional<std::string> granularity;
};

ColumnMapping canonical_mapping();

enum class IngestMode {
    strict,  // any bad row fails the load with its line number
    lenient, // bad rows are skipped and counted
};

struct DatasetLoadResult {
    std::vector<LabeledMention> items;
    std::size_t skipped = 0; // lenient-mode rejects
};

/// Loads a delimited file with a header row. The delimiter defaults to
/// tab for .tsv files and comma otherwise. Fields may be quoted
/// (RFC 4180 style, embedded delimiters/quotes/newlines supported).
DatasetLoadResult load_dataset(const std::filesystem::path& path,
                               const ColumnMapping& mapping,
                               IngestMode mode = IngestMode::strict,
                               std::optional<char> delimiter = std::nullopt);
DatasetLoadResult load_dataset(std::istream& in, const ColumnMapping& mapping,
                               IngestMode mode, char delimiter,
                               std::string_view source_name = "<stream>");

/// Canonical CSV: header "mention,gold,generic_name,granularity"; absent
/// optionals are empty cells. Reloading with canonical_mapping() yields
/// the same list.
void write_dataset_csv(std::ostream& out, const std::vector<LabeledMention>& items);

struct SplitResult {
    std::vector<LabeledMention> train;
    std::vector<LabeledMention> test;
    std::uint32_t seed = 0;
    double ratio = 0.0;
};

/// Deterministic stratified split keyed on the level-1 prefix of each
/// gold code. Each stratum is shuffled with the seeded generator and cut
/// at round(stratum_size * ratio); single-item strata go wholly to train.
SplitResult stratified_split(const std::vector<LabeledMention>& data, double ratio,
                             std::uint32_t seed);

/// Fraction of items whose mention contains its generic name or vice
/// versa, case-insensitively after trimming. Items without a generic
/// name are excluded from numerator and denominator; throws
/// Error{empty_eligible_set} if none remain.
double substring_overlap_rate(const std::vector<LabeledMention>& data);

} // namespace atc
