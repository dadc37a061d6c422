#pragma once

// Flat key=value configuration files.
//
// Grammar, line by line:
//   - blank lines are skipped
//   - '#' starts a comment (rest of line ignored)
//   - everything else must be  key = value  with a non-empty key
//
// Keys may contain letters, digits, '_' and '.'. Values are kept verbatim
// (trimmed) and converted on access; conversion failures raise ConfigError
// with the offending key, value and source line.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qkdsim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Config {
 public:
  Config() = default;

  static Config from_string(const std::string& text,
                            const std::string& origin = "<string>") {
    Config cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      cfg.parse_line(line, line_no);
    }
    return cfg;
  }

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
      throw ConfigError("cannot open config file '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_string(buffer.str(), path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  // Raw access; throws if the key is absent.
  const std::string& raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
      throw ConfigError(origin_ + ": missing required key '" + key + "'");
    }
    return it->second.text;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second.text;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_double(key, it->second);
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const Entry& e = it->second;
    std::size_t used = 0;
    std::int64_t v = 0;
    try {
      v = std::stoll(e.text, &used, 10);
    } catch (const std::exception&) {
      throw bad_value(key, e, "an integer");
    }
    if (used != e.text.size()) throw bad_value(key, e, "an integer");
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const Entry& e = it->second;
    std::string t = lowercase(e.text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw bad_value(key, e, "a boolean (true/false)");
  }

  // Comma-separated list of numbers, e.g. "9, 3, 1, 0.3".
  std::vector<double> get_list(const std::string& key,
                               const std::vector<double>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const Entry& e = it->second;
    std::vector<double> out;
    std::string item;
    std::istringstream in(e.text);
    while (std::getline(in, item, ',')) {
      Entry piece{trim(item), e.line};
      if (piece.text.empty()) throw bad_value(key, e, "a comma-separated number list");
      out.push_back(parse_double(key, piece));
    }
    if (out.empty()) throw bad_value(key, e, "a comma-separated number list");
    return out;
  }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    out.reserve(values_.size());
    for (const auto& [k, v] : values_) out.push_back(k);
    return out;
  }

  // Rejects keys outside the accepted vocabulary so typos fail loudly
  // instead of silently falling back to defaults.
  void require_known_keys(const std::vector<std::string>& known) const {
    for (const auto& [key, entry] : values_) {
      bool ok = false;
      for (const auto& k : known) {
        if (k == key) {
          ok = true;
          break;
        }
      }
      if (!ok) {
        throw ConfigError(origin_ + ":" + std::to_string(entry.line) +
                          ": unknown key '" + key + "'");
      }
    }
  }

  const std::string& origin() const { return origin_; }

 private:
  struct Entry {
    std::string text;
    int line = 0;
  };

  static std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  static std::string lowercase(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  }

  void parse_line(const std::string& raw_line, int line_no) {
    std::string line = raw_line;
    if (auto pos = line.find('#'); pos != std::string::npos) {
      line.erase(pos);
    }
    line = trim(line);
    if (line.empty()) return;

    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin_ + ":" + std::to_string(line_no) +
                        ": expected 'key = value', got '" + trim(raw_line) + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin_ + ":" + std::to_string(line_no) + ": empty key");
    }
    for (char c : key) {
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.') {
        throw ConfigError(origin_ + ":" + std::to_string(line_no) +
                          ": invalid character in key '" + key + "'");
      }
    }
    if (value.empty()) {
      throw ConfigError(origin_ + ":" + std::to_string(line_no) +
                        ": empty value for key '" + key + "'");
    }
    if (values_.count(key)) {
      throw ConfigError(origin_ + ":" + std::to_string(line_no) +
                        ": duplicate key '" + key + "' (first set on line " +
                        std::to_string(values_[key].line) + ")");
    }
    values_[key] = Entry{value, line_no};
  }

  ConfigError bad_value(const std::string& key, const Entry& e,
                        const std::string& expected) const {
    return ConfigError(origin_ + ":" + std::to_string(e.line) + ": key '" + key +
                       "': cannot parse '" + e.text + "' as " + expected);
  }

  double parse_double(const std::string& key, const Entry& e) const {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(e.text, &used);
    } catch (const std::exception&) {
      throw bad_value(key, e, "a number");
    }
    if (used != e.text.size()) throw bad_value(key, e, "a number");
    return v;
  }

  std::string origin_ = "<empty>";
  std::map<std::string, Entry> values_;
};

}  // namespace qkdsim
