// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace convrates {

/// Flat key-value text with [section] headers; '#' and ';' start comments.
/// Keys are looked up through typed getters, and `finish` rejects every
/// key that no getter asked for.
class Config {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static Config parse(const std::string& text, const std::string& source = "<config>");
  static Config load(const std::string& path);

  bool empty() const { return sections_.empty(); }
  bool has_section(const std::string& section) const { return sections_.count(section) > 0; }
  bool has(const std::string& section, const std::string& key) const;
  std::vector<std::string> sections() const;
  std::vector<std::string> keys(const std::string& section) const;
  /// Line of a key, or of its section when the key is absent; 0 if unknown.
  int line(const std::string& section, const std::string& key = "") const;

  /// Sets or replaces a value (command-line overrides); line 0 marks it.
  void set(const std::string& section, const std::string& key, const std::string& value);

  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback);
  double get_double(const std::string& section, const std::string& key, double fallback);
  std::int64_t get_int(const std::string& section, const std::string& key, std::int64_t fallback);
  std::uint64_t get_uint(const std::string& section, const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& section, const std::string& key, bool fallback);
  /// Comma-separated integers; "a..b" expands to the inclusive range and
  /// "a^b..c" to the powers a^b, ..., a^c.
  std::vector<std::int64_t> get_int_list(const std::string& section, const std::string& key,
                                         const std::vector<std::int64_t>& fallback);
  std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                      const std::vector<double>& fallback);

  /// Throws ParseError for keys never read and for sections outside `allowed`.
  void finish(const std::set<std::string>& allowed_sections) const;

  const std::string& source() const { return source_; }

 private:
  const Entry* find(const std::string& section, const std::string& key);

  std::string source_;
  std::map<std::string, std::map<std::string, Entry>> sections_;
  std::map<std::string, int> section_lines_;
  std::set<std::pair<std::string, std::string>> used_;
};

}  // namespace convrates
