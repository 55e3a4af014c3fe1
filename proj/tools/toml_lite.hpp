#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace elmap::cli {

/// Error with the offending config line attached.
class ConfigError : public std::runtime_error {
public:
  ConfigError(int line, const std::string& what)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what
                                    : what),
        line_(line) {}
  int line() const { return line_; }

private:
  int line_ = 0;
};

/// Minimal TOML subset: [table], [[array-of-tables]], key = value with
/// strings, numbers, booleans, and (nested) arrays. Enough for experiment
/// configs; no dotted keys or inline tables.
struct TomlValue {
  enum class Kind { number, string, boolean, array };
  Kind kind = Kind::number;
  double num = 0.0;
  std::string str;
  bool boolean = false;
  std::vector<TomlValue> arr;
  int line = 0;

  double as_number() const;
  long as_integer() const;
  bool as_bool() const;
  const std::string& as_string() const;
  std::vector<double> as_number_array() const;
  std::vector<std::string> as_string_array() const;
};

using TomlTable = std::map<std::string, TomlValue>;

struct TomlDoc {
  TomlTable root;
  std::map<std::string, TomlTable> tables;
  std::map<std::string, std::vector<TomlTable>> lists;

  const TomlTable* table(const std::string& name) const;
  const std::vector<TomlTable>* list(const std::string& name) const;
};

TomlDoc parse_toml(const std::string& text);
TomlDoc parse_toml_file(const std::string& path);

}  // namespace elmap::cli
