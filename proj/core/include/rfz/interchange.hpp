#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "rfz/forest.hpp"

namespace rfz {

inline constexpr std::string_view kInterchangeFormat = "rf-interchange/1";

/// Parses an rf-interchange/1 document (see docs/interchange.md) and
/// validates every forest invariant. Throws SchemaError for structural
/// problems and InvariantError for semantic ones, with the JSON path of the
/// offending node in the message.
Forest parse_forest(std::string_view json_text);

/// Deterministic output: fixed key order, two-space indentation.
std::string serialize_forest(const Forest& forest);

/// 16 lower-case hex digits of the IEEE-754 bit pattern.
std::string to_hex64(double value);
double from_hex64(std::string_view hex);  // throws std::invalid_argument

}  // namespace rfz
