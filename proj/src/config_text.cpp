#include "hbsde/config_text.hpp"

#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

namespace hbsde {

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
  std::ostringstream os;
  os << "config line " << line << ": " << what;
  throw ConfigError(os.str());
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-'))
      return false;
  }
  return k.front() != '.' && k.back() != '.';
}

// Strips a trailing comment that is not inside a string literal.
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

class ValueParser {
 public:
  ValueParser(const std::string& text, int line) : s_(text), line_(line) {}

  ConfigValue parse_all() {
    ConfigValue v = parse_value();
    skip_ws();
    if (pos_ != s_.size()) fail(line_, "unexpected trailing characters '" + s_.substr(pos_) + "'");
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  ConfigValue parse_value() {
    skip_ws();
    if (pos_ >= s_.size()) fail(line_, "missing value");
    ConfigValue v;
    v.line = line_;
    char c = s_[pos_];
    if (c == '"') {
      ++pos_;
      std::string out;
      while (pos_ < s_.size() && s_[pos_] != '"') out.push_back(s_[pos_++]);
      if (pos_ >= s_.size()) fail(line_, "unterminated string");
      ++pos_;
      v.data = out;
    } else if (c == '[') {
      ++pos_;
      ConfigValue::Array arr;
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
      } else {
        for (;;) {
          arr.push_back(parse_value());
          skip_ws();
          if (pos_ >= s_.size()) fail(line_, "unterminated array");
          if (s_[pos_] == ',') {
            ++pos_;
            continue;
          }
          if (s_[pos_] == ']') {
            ++pos_;
            break;
          }
          fail(line_, "expected ',' or ']' in array");
        }
      }
      v.data = std::move(arr);
    } else if (s_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      v.data = true;
    } else if (s_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      v.data = false;
    } else {
      std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) ||
                                  s_[pos_] == '.' || s_[pos_] == '-' || s_[pos_] == '+'))
        ++pos_;
      std::string tok = s_.substr(start, pos_ - start);
      if (tok.empty()) fail(line_, "cannot parse value near '" + s_.substr(start) + "'");
      double d = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), d);
      if (ec != std::errc() || ptr != tok.data() + tok.size())
        fail(line_, "not a number: '" + tok + "'");
      v.data = d;
      v.raw = tok;
    }
    return v;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_;
};

}  // namespace

double ConfigValue::as_number(const std::string& key) const {
  if (!is_number()) fail(line, "'" + key + "' must be a number");
  return std::get<double>(data);
}

const std::string& ConfigValue::as_string(const std::string& key) const {
  if (!is_string()) fail(line, "'" + key + "' must be a string");
  return std::get<std::string>(data);
}

bool ConfigValue::as_bool(const std::string& key) const {
  if (!is_bool()) fail(line, "'" + key + "' must be true or false");
  return std::get<bool>(data);
}

const ConfigValue::Array& ConfigValue::as_array(const std::string& key) const {
  if (!is_array()) fail(line, "'" + key + "' must be an array");
  return std::get<Array>(data);
}

std::vector<double> ConfigValue::as_numbers(const std::string& key) const {
  std::vector<double> out;
  for (const auto& v : as_array(key)) out.push_back(v.as_number(key));
  return out;
}

std::uint64_t ConfigValue::as_u64(const std::string& key) const {
  if (!is_number()) fail(line, "'" + key + "' must be an integer");
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), out);
  if (ec != std::errc() || ptr != raw.data() + raw.size())
    fail(line, "'" + key + "' must be a non-negative integer");
  return out;
}

ConfigDocument ConfigDocument::parse(const std::string& text) {
  ConfigDocument doc;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "malformed table header");
      section = trim(s.substr(1, s.size() - 2));
      if (!valid_key(section)) fail(line, "invalid table name '" + section + "'");
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected 'key = value'");
    std::string key = trim(s.substr(0, eq));
    if (!valid_key(key)) fail(line, "invalid key '" + key + "'");
    std::string full = section.empty() ? key : section + "." + key;
    if (doc.values_.count(full)) fail(line, "duplicate key '" + full + "'");
    doc.values_[full] = ValueParser(s.substr(eq + 1), line).parse_all();
  }
  return doc;
}

const ConfigValue& ConfigDocument::at(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required key '" + key + "'");
  return it->second;
}

double ConfigDocument::number_or(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

std::string ConfigDocument::string_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? at(key).as_string(key) : fallback;
}

std::vector<std::string> ConfigDocument::children(const std::string& prefix) const {
  std::set<std::string> out;
  const std::string p = prefix.empty() ? "" : prefix + ".";
  for (const auto& [k, v] : values_) {
    if (k.compare(0, p.size(), p) != 0) continue;
    std::string rest = k.substr(p.size());
    out.insert(rest.substr(0, rest.find('.')));
  }
  return {out.begin(), out.end()};
}

}  // namespace hbsde
