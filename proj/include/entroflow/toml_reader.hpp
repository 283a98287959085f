#pragma once

#include <string_view>

#include <json.hpp>

namespace entroflow {

/// Reads the TOML subset used by experiment configs into JSON: tables,
/// dotted keys, arrays of tables, inline tables, arrays, strings, integers,
/// floats (inf/nan included) and booleans. Dates are not supported.
/// Throws ConfigError naming the line and, where known, the key.
nlohmann::ordered_json parse_toml(std::string_view text);

}  // namespace entroflow
