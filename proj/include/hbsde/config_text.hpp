#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace hbsde {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value in the `key = value` document: number, string, boolean or array.
struct ConfigValue {
  using Array = std::vector<ConfigValue>;
  std::variant<double, std::string, bool, Array> data;
  std::string raw;  // source token of a number
  int line = 0;

  bool is_number() const { return std::holds_alternative<double>(data); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }

  double as_number(const std::string& key) const;
  const std::string& as_string(const std::string& key) const;
  bool as_bool(const std::string& key) const;
  const Array& as_array(const std::string& key) const;
  std::vector<double> as_numbers(const std::string& key) const;
  std::uint64_t as_u64(const std::string& key) const;
};

// Flat view of a document: `[model.b]` + `kind = "x"` is stored under "model.b.kind".
class ConfigDocument {
 public:
  static ConfigDocument parse(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const ConfigValue& at(const std::string& key) const;

  double number(const std::string& key) const { return at(key).as_number(key); }
  double number_or(const std::string& key, double fallback) const;
  std::string string_or(const std::string& key, const std::string& fallback) const;

  // Keys directly below `prefix` (one level), used to reject unknown entries.
  std::vector<std::string> children(const std::string& prefix) const;
  const std::map<std::string, ConfigValue>& values() const { return values_; }

 private:
  std::map<std::string, ConfigValue> values_;
};

}  // namespace hbsde
