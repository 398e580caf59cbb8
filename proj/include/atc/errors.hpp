#pragma once

#include <stdexcept>
#include <string>

namespace atc {

enum class errc {
    invalid_length,
    invalid_pattern,
    level_exceeds_code,
    parse_error,
    orphan_code,
    duplicate_code,
    unknown_code,
    no_children,
    missing_column,
    empty_eligible_set,
    empty_evaluation,
    transport_error,
    server_error,
    oracle_miss,
    config_error,
    precondition,
};

const char* errc_name(errc code) noexcept;

/// Library-wide exception type. what() is "<errc_name>: <message>".
class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& message);

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

} // namespace atc
