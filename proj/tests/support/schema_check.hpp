#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

namespace elmap::testing {

// Structural validation against the JSON-Schema subset our schemas use:
// "type" (including union types), "required", "properties", "items".
inline bool matches_type(const nlohmann::json& doc, const std::string& type) {
  if (type == "object") return doc.is_object();
  if (type == "array") return doc.is_array();
  if (type == "string") return doc.is_string();
  if (type == "boolean") return doc.is_boolean();
  if (type == "null") return doc.is_null();
  if (type == "integer") return doc.is_number_integer() || doc.is_number_unsigned();
  if (type == "number") return doc.is_number();
  return false;
}

inline bool validate_schema(const nlohmann::json& schema, const nlohmann::json& doc,
                            std::string& error, const std::string& path = "$") {
  if (schema.contains("type")) {
    const auto& type = schema["type"];
    bool ok = false;
    if (type.is_string()) {
      ok = matches_type(doc, type.get<std::string>());
    } else if (type.is_array()) {
      for (const auto& t : type) {
        ok = ok || matches_type(doc, t.get<std::string>());
      }
    }
    if (!ok) {
      error = path + ": type mismatch (expected " + type.dump() + ")";
      return false;
    }
  }
  if (schema.contains("required") && doc.is_object()) {
    for (const auto& key : schema["required"]) {
      if (!doc.contains(key.get<std::string>())) {
        error = path + ": missing required key '" + key.get<std::string>() + "'";
        return false;
      }
    }
  }
  if (schema.contains("properties") && doc.is_object()) {
    for (const auto& [key, sub] : schema["properties"].items()) {
      if (doc.contains(key) &&
          !validate_schema(sub, doc[key], error, path + "." + key)) {
        return false;
      }
    }
  }
  if (schema.contains("items") && doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      if (!validate_schema(schema["items"], doc[i], error,
                           path + "[" + std::to_string(i) + "]")) {
        return false;
      }
    }
  }
  return true;
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  return nlohmann::json::parse(in);
}

}  // namespace elmap::testing
