#pragma once

#include <optional>
#include <string>

#include <json.hpp>

namespace mda {

struct SchemaViolation {
  std::string pointer;  // JSON pointer of the offending value
  std::string message;
};

/// Validates a document against the JSON Schema subset used by the run
/// configuration: type, enum, properties, required, additionalProperties,
/// items, minItems, minimum, maximum, exclusiveMinimum, exclusiveMaximum,
/// oneOf and local "#/$defs/..." references. Returns the first violation.
std::optional<SchemaViolation> validate_schema(const nlohmann::json& document, const nlohmann::json& schema);

/// The shipped run-configuration schema.
const nlohmann::json& run_config_schema();

}  // namespace mda
