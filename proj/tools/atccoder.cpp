// atccoder: batch ATC coding pipeline around the atc library.
//
// Subcommands: code, eval, split, export-sft, ontology-stats,
// analyze-overlap. Output files are written atomically (temp + rename) so
// a fatal error never leaves a partial artifact behind. API tokens are
// taken from the environment variable named by --token-env, never from
// flags or config files.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "atc/backend.hpp"
#include "atc/data.hpp"
#include "atc/engine.hpp"
#include "atc/errors.hpp"
#include "atc/eval.hpp"
#include "atc/export.hpp"
#include "atc/knowledge.hpp"
#include "atc/ontology.hpp"
#include "atc/text.hpp"

namespace fs = std::filesystem;
using atc::Error;
using atc::errc;

namespace {

void write_atomic(const fs::path& path, std::string_view content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(errc::config_error, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out.flush()) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error(errc::config_error, "short write to " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(errc::config_error, "cannot rename into " + path.string());
    }
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::parse_error, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return std::move(buffer).str();
}

std::vector<std::string> load_mentions(const fs::path& path) {
    std::vector<std::string> mentions;
    std::string content = read_text_file(path);
    for (std::string_view line : atc::split_lines(content)) {
        std::string_view mention = atc::trim(line);
        if (!mention.empty()) mentions.emplace_back(mention);
    }
    if (mentions.empty()) {
        throw Error(errc::config_error, path.string() + " holds no mentions");
    }
    return mentions;
}

// Loads a labeled dataset, mapping the optional generic_name and
// granularity columns only when the header has them.
atc::DatasetLoadResult load_dataset_auto(const fs::path& path, atc::IngestMode mode) {
    atc::ColumnMapping mapping = atc::canonical_mapping();
    const bool with_generic[] = {true, false, true, false};
    const bool with_granularity[] = {true, true, false, false};
    for (int i = 0; i < 4; ++i) {
        mapping.generic_name =
            with_generic[i] ? std::optional<std::string>("generic_name") : std::nullopt;
        mapping.granularity =
            with_granularity[i] ? std::optional<std::string>("granularity") : std::nullopt;
        try {
            return atc::load_dataset(path, mapping, mode);
        } catch (const Error& e) {
            if (e.code() != errc::missing_column || i == 3) throw;
        }
    }
    throw Error(errc::missing_column, "unreachable");
}

std::string now_utc_iso8601() {
    std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buffer;
}

struct CodeOpts {
    std::string mentions_path;
    std::string ontology_path;
    std::string definitions_path;
    std::string grounding = "with-name";
    std::string backend = "http";
    std::string model;
    std::string base_url;
    std::string token_env = "OPENAI_API_KEY";
    std::string gold_path;
    std::string replies_path;
    std::string out;
    double temperature = 0.1;
    int seed = 42;
    int max_tokens = 256;
    int retries = 2;
    int concurrency = 1;
    bool auto_select = true;
};

std::unique_ptr<atc::Backend> make_backend(const CodeOpts& opts) {
    if (opts.backend == "oracle") {
        if (opts.gold_path.empty()) {
            throw Error(errc::config_error, "--backend oracle requires --gold");
        }
        std::map<std::string, atc::AtcCode, std::less<>> gold;
        for (const atc::LabeledMention& item :
             load_dataset_auto(opts.gold_path, atc::IngestMode::strict).items) {
            gold.insert_or_assign(item.mention, item.gold);
        }
        return std::make_unique<atc::OracleBackend>(std::move(gold));
    }
    if (opts.backend == "adversarial") {
        if (opts.replies_path.empty()) {
            throw Error(errc::config_error, "--backend adversarial requires --replies");
        }
        std::string content = read_text_file(opts.replies_path);
        std::vector<std::string> script;
        for (std::string_view line : atc::split_lines(content)) script.emplace_back(line);
        return std::make_unique<atc::AdversarialBackend>(std::move(script));
    }
    if (opts.backend == "http") {
        if (opts.base_url.empty()) {
            throw Error(errc::config_error, "--backend http requires --base-url");
        }
        if (opts.model.empty()) {
            throw Error(errc::config_error, "--backend http requires --model");
        }
        atc::HttpBackendConfig config;
        config.base_url = opts.base_url;
        config.token_env = opts.token_env;
        config.max_in_flight = opts.concurrency;
        return std::make_unique<atc::HttpChatBackend>(std::move(config));
    }
    throw Error(errc::config_error, "unknown backend '" + opts.backend + "'");
}

int cmd_code(const CodeOpts& opts) {
    atc::GroundingSetting setting = atc::grounding_from_string(opts.grounding);
    if (setting == atc::GroundingSetting::with_umls && opts.definitions_path.empty()) {
        throw Error(errc::config_error, "--grounding with-umls requires --definitions");
    }

    atc::Ontology ontology = atc::Ontology::load_file(opts.ontology_path);
    atc::DefinitionStore defs;
    if (!opts.definitions_path.empty()) {
        defs = atc::DefinitionStore::load_file(opts.definitions_path);
    }
    std::vector<std::string> mentions = load_mentions(opts.mentions_path);
    std::unique_ptr<atc::Backend> backend = make_backend(opts);

    atc::GenerationParams params{opts.temperature, opts.seed, opts.max_tokens, opts.model};
    atc::EngineConfig config{setting, opts.retries, opts.auto_select};
    atc::Coder coder(ontology, defs, *backend, params, config);
    std::vector<atc::Coder::BatchResult> results =
        coder.code_batch(mentions, opts.concurrency);

    std::ostringstream lines;
    std::size_t coded = 0;
    std::size_t abstained = 0;
    std::size_t errored = 0;
    for (const atc::Coder::BatchResult& result : results) {
        nlohmann::json j = atc::trace_to_json(result.trace);
        if (result.error) {
            j["error"] = *result.error;
            ++errored;
        } else if (result.trace.abstained()) {
            ++abstained;
        } else {
            ++coded;
        }
        lines << j.dump() << '\n';
    }
    if (opts.out.empty()) {
        std::cout << lines.str();
    } else {
        write_atomic(opts.out, lines.str());
    }
    std::cout << "coded " << coded << " abstained " << abstained << " errored " << errored
              << "\n";
    return 0;
}

struct EvalOpts {
    std::string gold_path;
    std::string predictions_path;
    std::string out;
    bool granularity5_only = false;
};

int cmd_eval(const EvalOpts& opts) {
    atc::DatasetLoadResult data = load_dataset_auto(opts.gold_path, atc::IngestMode::strict);

    // First prediction per mention wins; later duplicates are ignored.
    std::map<std::string, std::optional<atc::AtcCode>, std::less<>> predictions;
    std::string content = read_text_file(opts.predictions_path);
    for (std::string_view line : atc::split_lines(content)) {
        if (atc::trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw Error(errc::parse_error,
                        opts.predictions_path + ": malformed JSON line");
        }
        atc::TracePrediction prediction = atc::trace_prediction_from_json(j);
        predictions.emplace(std::move(prediction.mention), prediction.final_code);
    }

    std::vector<atc::EvalExample> examples;
    examples.reserve(data.items.size());
    for (const atc::LabeledMention& item : data.items) {
        auto it = predictions.find(item.mention);
        if (it == predictions.end()) {
            throw Error(errc::precondition,
                        "no prediction for mention '" + item.mention + "'");
        }
        examples.push_back({item, it->second});
    }

    atc::EvalOptions eval_options{opts.granularity5_only};
    atc::EvalReport report = atc::build_report(examples, eval_options);
    if (!opts.out.empty()) {
        write_atomic(opts.out, atc::report_to_json(report).dump(2) + "\n");
    }
    std::cout << atc::report_table(report);
    std::cout << "evaluated " << report.n_evaluated << " excluded " << report.n_excluded
              << "\n";
    return 0;
}

struct SplitOpts {
    std::string data_path;
    std::string train_out;
    std::string test_out;
    double ratio = 0.9;
    std::uint32_t seed = 42;
};

int cmd_split(const SplitOpts& opts) {
    atc::DatasetLoadResult data = load_dataset_auto(opts.data_path, atc::IngestMode::strict);
    atc::SplitResult split = atc::stratified_split(data.items, opts.ratio, opts.seed);

    std::ostringstream train;
    atc::write_dataset_csv(train, split.train);
    write_atomic(opts.train_out, train.str());
    std::ostringstream test;
    atc::write_dataset_csv(test, split.test);
    write_atomic(opts.test_out, test.str());

    std::cout << "train " << split.train.size() << " test " << split.test.size() << " seed "
              << split.seed << " ratio " << split.ratio << "\n";
    return 0;
}

struct ExportOpts {
    std::string data_path;
    std::string ontology_path;
    std::string definitions_path;
    std::string grounding = "with-name";
    std::string out;
    std::string manifest_out;
    std::string created_at;
    bool include_single_child = false;
};

int cmd_export_sft(const ExportOpts& opts) {
    atc::GroundingSetting setting = atc::grounding_from_string(opts.grounding);
    if (setting == atc::GroundingSetting::with_umls && opts.definitions_path.empty()) {
        throw Error(errc::config_error, "--grounding with-umls requires --definitions");
    }

    atc::Ontology ontology = atc::Ontology::load_file(opts.ontology_path);
    atc::DefinitionStore defs;
    if (!opts.definitions_path.empty()) {
        defs = atc::DefinitionStore::load_file(opts.definitions_path);
    }
    atc::DatasetLoadResult data = load_dataset_auto(opts.data_path, atc::IngestMode::strict);

    std::ostringstream lines;
    atc::SftStats stats = atc::export_sft(
        data.items, ontology, setting, defs, opts.include_single_child,
        [&](const atc::SftRecord& record) {
            lines << atc::sft_record_to_json(record).dump() << '\n';
        });
    write_atomic(opts.out, lines.str());

    atc::SftManifest manifest{setting, ontology.fingerprint(), stats.records,
                              stats.skipped_missing_gold, opts.include_single_child};
    std::string created_at = opts.created_at.empty() ? now_utc_iso8601() : opts.created_at;
    fs::path manifest_path =
        opts.manifest_out.empty() ? fs::path(opts.out + ".manifest.json")
                                  : fs::path(opts.manifest_out);
    write_atomic(manifest_path, atc::build_manifest(manifest, created_at).dump(2) + "\n");

    std::cout << "exported " << stats.records << " records skipped "
              << stats.skipped_missing_gold << "\n";
    return 0;
}

int cmd_ontology_stats(const std::string& ontology_path) {
    atc::Ontology ontology = atc::Ontology::load_file(ontology_path);
    std::cout << "entries " << ontology.size() << "\n";
    std::array<std::size_t, atc::kMaxLevel> counts = ontology.level_counts();
    for (int k = 1; k <= atc::kMaxLevel; ++k) {
        std::cout << "level " << k << ": " << counts[k - 1] << "\n";
    }
    atc::OptionStats stats = ontology.option_stats();
    char mean[32];
    std::snprintf(mean, sizeof mean, "%.3f", stats.mean_branching);
    std::cout << "mean branching " << mean << "\n";
    std::cout << "max branching " << stats.max_branching << "\n";
    std::cout << "fingerprint " << ontology.fingerprint() << "\n";
    return 0;
}

int cmd_analyze_overlap(const std::string& data_path) {
    atc::ColumnMapping mapping = atc::canonical_mapping();
    mapping.granularity = std::nullopt;
    atc::DatasetLoadResult data =
        atc::load_dataset(data_path, mapping, atc::IngestMode::strict);
    double rate = atc::substring_overlap_rate(data.items);

    std::size_t eligible = 0;
    for (const atc::LabeledMention& item : data.items) {
        if (!item.generic_name) continue;
        if (!atc::trim(item.mention).empty() && !atc::trim(*item.generic_name).empty()) {
            ++eligible;
        }
    }
    char text[32];
    std::snprintf(text, sizeof text, "%.4f", rate);
    std::cout << "overlap rate " << text << " over " << eligible << " of "
              << data.items.size() << " items\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ATC drug-code assignment via level-by-level LLM traversal"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat config file; flags given on the command line win");

    CodeOpts code_opts;
    CLI::App* code = app.add_subcommand("code", "Assign ATC codes to free-text mentions");
    code->add_option("mentions", code_opts.mentions_path, "Text file, one mention per line")
        ->required();
    code->add_option("--ontology", code_opts.ontology_path, "Ontology TSV (code<TAB>name)")
        ->required();
    code->add_option("--definitions", code_opts.definitions_path,
                     "Definition TSV (code<TAB>definition)");
    code->add_option("--grounding", code_opts.grounding, "Option context in prompts")
        ->check(CLI::IsMember({"code-only", "with-name", "with-umls"}));
    code->add_option("--backend", code_opts.backend, "Reply source")
        ->check(CLI::IsMember({"http", "oracle", "adversarial"}));
    code->add_option("--model", code_opts.model, "Model id sent to the http backend");
    code->add_option("--base-url", code_opts.base_url,
                     "Server base URL, e.g. https://host/v1");
    code->add_option("--token-env", code_opts.token_env,
                     "Environment variable holding the bearer token");
    code->add_option("--gold", code_opts.gold_path, "Labeled CSV for the oracle backend");
    code->add_option("--replies", code_opts.replies_path,
                     "Scripted reply lines for the adversarial backend");
    code->add_option("--temperature", code_opts.temperature, "Sampling temperature");
    code->add_option("--seed", code_opts.seed, "Sampling seed");
    code->add_option("--max-tokens", code_opts.max_tokens, "Reply token budget");
    code->add_option("--retries", code_opts.retries, "Extra prompts per level")
        ->check(CLI::NonNegativeNumber);
    code->add_flag("--auto-select,!--no-auto-select", code_opts.auto_select,
                   "Descend through single-child levels without a model call");
    code->add_option("--concurrency", code_opts.concurrency, "Parallel traversals")
        ->check(CLI::PositiveNumber);
    code->add_option("--out", code_opts.out, "Trace JSONL path (default: stdout)");

    EvalOpts eval_opts;
    CLI::App* eval = app.add_subcommand("eval", "Score a trace JSONL against gold labels");
    eval->add_option("--gold", eval_opts.gold_path, "Labeled dataset CSV/TSV")->required();
    eval->add_option("--predictions", eval_opts.predictions_path, "Trace JSONL")->required();
    eval->add_flag("--granularity-5-only", eval_opts.granularity5_only,
                   "Evaluate only granularity-5 (or unannotated) items");
    eval->add_option("--out", eval_opts.out, "Report JSON path");

    SplitOpts split_opts;
    CLI::App* split = app.add_subcommand("split", "Stratified train/test split");
    split->add_option("--data", split_opts.data_path, "Labeled dataset CSV/TSV")->required();
    split->add_option("--ratio", split_opts.ratio, "Train fraction");
    split->add_option("--seed", split_opts.seed, "Shuffle seed");
    split->add_option("--train-out", split_opts.train_out, "Train CSV path")->required();
    split->add_option("--test-out", split_opts.test_out, "Test CSV path")->required();

    ExportOpts export_opts;
    CLI::App* export_sft =
        app.add_subcommand("export-sft", "Emit chat-format SFT records from gold paths");
    export_sft->add_option("--data", export_opts.data_path, "Labeled dataset CSV/TSV")
        ->required();
    export_sft->add_option("--ontology", export_opts.ontology_path, "Ontology TSV")
        ->required();
    export_sft->add_option("--definitions", export_opts.definitions_path, "Definition TSV");
    export_sft->add_option("--grounding", export_opts.grounding, "Option context in prompts")
        ->check(CLI::IsMember({"code-only", "with-name", "with-umls"}));
    export_sft->add_flag("--include-single-child", export_opts.include_single_child,
                         "Also emit records for single-option levels");
    export_sft->add_option("--out", export_opts.out, "Record JSONL path")->required();
    export_sft->add_option("--manifest", export_opts.manifest_out,
                           "Manifest path (default: <out>.manifest.json)");
    export_sft->add_option("--created-at", export_opts.created_at,
                           "Timestamp recorded in the manifest (default: now, UTC)");

    std::string stats_ontology;
    CLI::App* stats = app.add_subcommand("ontology-stats", "Describe an ontology file");
    stats->add_option("--ontology", stats_ontology, "Ontology TSV")->required();

    std::string overlap_data;
    CLI::App* overlap = app.add_subcommand(
        "analyze-overlap", "Mention/generic-name substring overlap diagnostic");
    overlap->add_option("--data", overlap_data, "Labeled dataset with a generic_name column")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (code->parsed()) return cmd_code(code_opts);
        if (eval->parsed()) return cmd_eval(eval_opts);
        if (split->parsed()) return cmd_split(split_opts);
        if (export_sft->parsed()) return cmd_export_sft(export_opts);
        if (stats->parsed()) return cmd_ontology_stats(stats_ontology);
        if (overlap->parsed()) return cmd_analyze_overlap(overlap_data);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
