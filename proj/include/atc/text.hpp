#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace atc {

std::string_view trim(std::string_view s);

// ASCII-only case mapping; codes and containment checks must not depend on locale.
std::string to_upper(std::string_view s);
std::string to_lower(std::string_view s);

bool is_ascii_upper(char c);
bool is_ascii_digit(char c);
bool is_ascii_alnum(char c);

/// Splits on '\n'; a trailing '\r' is removed from each line. The final
/// fragment after the last newline is included unless empty.
std::vector<std::string_view> split_lines(std::string_view s);

} // namespace atc
