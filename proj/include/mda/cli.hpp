#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "mda/error.hpp"

namespace mda {

enum class Command { pattern, bfp, sweep, fit, photon };

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitAccuracy = 3;

/// Configuration rejected by the schema or by a semantic check.
class ConfigError : public SchemaError {
 public:
  ConfigError(std::string pointer, const std::string& message)
      : SchemaError(message), pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

/// Validates a raw configuration and fills every default used by the command.
/// The result validates against the same schema and fully determines the run.
nlohmann::json resolve_config(const nlohmann::json& raw, Command command);

/// Command-line entry point: `mda <pattern|bfp|sweep|fit|photon> [flags]`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mda
