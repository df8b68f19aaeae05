#include "mda/config_schema.hpp"

#include <cmath>

#include "mda/error.hpp"
#include "run_config_schema.inc"

namespace mda {

namespace {

std::string escape(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~')
      out += "~0";
    else if (c == '/')
      out += "~1";
    else
      out += c;
  }
  return out;
}

bool has_type(const nlohmann::json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "number") return v.is_number();
  if (type == "integer") {
    if (v.is_number_integer()) return true;
    return v.is_number_float() && std::floor(v.get<double>()) == v.get<double>();
  }
  throw SchemaError("schema uses unknown type '" + type + "'");
}

class Validator {
 public:
  explicit Validator(const nlohmann::json& root) : root_(root) {}

  std::optional<SchemaViolation> check(const nlohmann::json& v, const nlohmann::json& s, const std::string& at) const {
    if (s.contains("$ref")) {
      const std::string ref = s["$ref"].get<std::string>();
      if (ref.rfind("#/", 0) != 0) throw SchemaError("unsupported schema reference " + ref);
      return check(v, root_.at(nlohmann::json::json_pointer(ref.substr(1))), at);
    }
    if (s.contains("type")) {
      const auto& t = s["type"];
      bool ok = false;
      if (t.is_string()) {
        ok = has_type(v, t.get<std::string>());
      } else {
        for (const auto& alt : t) ok = ok || has_type(v, alt.get<std::string>());
      }
      if (!ok) return fail(at, "expected type " + t.dump());
    }
    if (s.contains("enum")) {
      bool ok = false;
      for (const auto& e : s["enum"]) ok = ok || e == v;
      if (!ok) return fail(at, "value must be one of " + s["enum"].dump());
    }
    if (v.is_number()) {
      const double x = v.get<double>();
      if (s.contains("minimum") && x < s["minimum"].get<double>())
        return fail(at, "value must be >= " + s["minimum"].dump());
      if (s.contains("maximum") && x > s["maximum"].get<double>())
        return fail(at, "value must be <= " + s["maximum"].dump());
      if (s.contains("exclusiveMinimum") && x <= s["exclusiveMinimum"].get<double>())
        return fail(at, "value must be > " + s["exclusiveMinimum"].dump());
      if (s.contains("exclusiveMaximum") && x >= s["exclusiveMaximum"].get<double>())
        return fail(at, "value must be < " + s["exclusiveMaximum"].dump());
    }
    if (v.is_object()) {
      if (s.contains("required"))
        for (const auto& key : s["required"])
          if (!v.contains(key.get<std::string>())) return fail(at, "missing required property '" + key.get<std::string>() + "'");
      const nlohmann::json empty = nlohmann::json::object();
      const auto& props = s.contains("properties") ? s["properties"] : empty;
      for (const auto& [key, value] : v.items()) {
        const std::string child = at + "/" + escape(key);
        if (props.contains(key)) {
          if (auto e = check(value, props[key], child)) return e;
        } else if (s.contains("additionalProperties") && s["additionalProperties"] == false) {
          return fail(child, "unknown property '" + key + "'");
        }
      }
    }
    if (v.is_array()) {
      if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>())
        return fail(at, "array needs at least " + s["minItems"].dump() + " items");
      if (s.contains("items"))
        for (std::size_t i = 0; i < v.size(); ++i)
          if (auto e = check(v[i], s["items"], at + "/" + std::to_string(i))) return e;
    }
    if (s.contains("oneOf")) {
      int matches = 0;
      std::optional<SchemaViolation> first;
      for (const auto& alt : s["oneOf"]) {
        auto e = check(v, alt, at);
        if (!e)
          ++matches;
        else if (!first || e->pointer.size() > first->pointer.size())
          first = e;
      }
      if (matches == 0) return first;
      if (matches > 1) return fail(at, "value matches more than one alternative");
    }
    return std::nullopt;
  }

 private:
  static std::optional<SchemaViolation> fail(const std::string& at, std::string message) {
    return SchemaViolation{at.empty() ? "/" : at, std::move(message)};
  }

  const nlohmann::json& root_;
};

}  // namespace

std::optional<SchemaViolation> validate_schema(const nlohmann::json& document, const nlohmann::json& schema) {
  return Validator(schema).check(document, schema, "");
}

const nlohmann::json& run_config_schema() {
  static const nlohmann::json schema = nlohmann::json::parse(kRunConfigSchema);
  return schema;
}

}  // namespace mda
