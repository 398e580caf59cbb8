#include "atc/errors.hpp"

namespace atc {

const char* errc_name(errc code) noexcept {
    switch (code) {
    case errc::invalid_length: return "InvalidLength";
    case errc::invalid_pattern: return "InvalidPattern";
    case errc::level_exceeds_code: return "LevelExceedsCode";
    case errc::parse_error: return "ParseError";
    case errc::orphan_code: return "OrphanCode";
    case errc::duplicate_code: return "DuplicateCode";
    case errc::unknown_code: return "UnknownCode";
    case errc::no_children: return "NoChildren";
    case errc::missing_column: return "MissingColumn";
    case errc::empty_eligible_set: return "EmptyEligibleSet";
    case errc::empty_evaluation: return "EmptyEvaluation";
    case errc::transport_error: return "TransportError";
    case errc::server_error: return "ServerError";
    case errc::oracle_miss: return "OracleMiss";
    case errc::config_error: return "ConfigError";
    case errc::precondition: return "PreconditionViolated";
    }
    return "UnknownError";
}

Error::Error(errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

} // namespace atc
