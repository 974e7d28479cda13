#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace tea {

// Minimal JSON-schema checker covering the subset the shipped schemas use:
// type, properties, required, items, enum, minimum. Returns a list of
// human-readable violations; empty means valid.
std::vector<std::string> schema_validate(const nlohmann::json& value,
                                         const nlohmann::json& schema);

// Convenience: parse both texts and validate.
std::vector<std::string> schema_validate_text(const std::string& value_text,
                                              const std::string& schema_text);

}  // namespace tea
