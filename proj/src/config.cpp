// SPDX-License-Identifier: Apache-2.0
#include "convrates/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "convrates/error.hpp"

namespace convrates {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string field_name(const std::string& section, const std::string& key) { return section + "." + key; }

double to_double(const std::string& text, const std::string& field, int line) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE) {
    throw ParseError(field, line, "expected a number, got '" + text + "'");
  }
  if (std::isnan(v)) throw ParseError(field, line, "NaN is not allowed");
  return v;
}

std::int64_t to_int(const std::string& text, const std::string& field, int line) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0' || errno == ERANGE) {
    throw ParseError(field, line, "expected an integer, got '" + text + "'");
  }
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(trim(item));
  return parts;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& source) {
  Config cfg;
  cfg.source_ = source;
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find_first_of("#;");
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) throw ParseError("[section]", line, "malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (cfg.section_lines_.count(section)) throw ParseError(section, line, "duplicate section");
      cfg.section_lines_[section] = line;
      cfg.sections_[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError(s, line, "expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ParseError("", line, "empty key");
    if (section.empty()) throw ParseError(key, line, "key outside of any [section]");
    auto& entries = cfg.sections_[section];
    if (entries.count(key)) throw ParseError(field_name(section, key), line, "duplicate key");
    if (value.empty()) throw ParseError(field_name(section, key), line, "empty value");
    entries[key] = {value, line};
  }
  if (cfg.sections_.empty()) throw ParseError("<file>", line, "configuration is empty");
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("<file>", 0, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto it = sections_.find(section);
  return it != sections_.end() && it->second.count(key) > 0;
}

std::vector<std::string> Config::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, entries] : sections_) out.push_back(name);
  return out;
}

std::vector<std::string> Config::keys(const std::string& section) const {
  std::vector<std::string> out;
  const auto it = sections_.find(section);
  if (it != sections_.end()) {
    for (const auto& [key, entry] : it->second) out.push_back(key);
  }
  return out;
}

int Config::line(const std::string& section, const std::string& key) const {
  const auto it = sections_.find(section);
  if (it != sections_.end()) {
    const auto jt = it->second.find(key);
    if (jt != it->second.end()) return jt->second.line;
  }
  const auto st = section_lines_.find(section);
  return st == section_lines_.end() ? 0 : st->second;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = {value, 0};
}

const Config::Entry* Config::find(const std::string& section, const std::string& key) {
  used_.insert({section, key});
  const auto it = sections_.find(section);
  if (it == sections_.end()) return nullptr;
  const auto jt = it->second.find(key);
  return jt == it->second.end() ? nullptr : &jt->second;
}

std::string Config::get_string(const std::string& section, const std::string& key, const std::string& fallback) {
  const Entry* e = find(section, key);
  return e ? e->value : fallback;
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) {
  const Entry* e = find(section, key);
  return e ? to_double(e->value, field_name(section, key), e->line) : fallback;
}

std::int64_t Config::get_int(const std::string& section, const std::string& key, std::int64_t fallback) {
  const Entry* e = find(section, key);
  return e ? to_int(e->value, field_name(section, key), e->line) : fallback;
}

std::uint64_t Config::get_uint(const std::string& section, const std::string& key, std::uint64_t fallback) {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  const std::string field = field_name(section, key);
  if (e->value.empty() || e->value.front() == '-') throw ParseError(field, e->line, "expected a nonnegative integer");
  const char* begin = e->value.c_str();
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(begin, &end, 10);
  if (end == begin || *end != '\0' || errno == ERANGE) {
    throw ParseError(field, e->line, "expected a nonnegative integer, got '" + e->value + "'");
  }
  return v;
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  const std::string& v = e->value;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError(field_name(section, key), e->line, "expected true or false, got '" + v + "'");
}

std::vector<std::int64_t> Config::get_int_list(const std::string& section, const std::string& key,
                                               const std::vector<std::int64_t>& fallback) {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  const std::string field = field_name(section, key);
  std::vector<std::int64_t> out;
  for (const std::string& item : split_list(e->value)) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(to_int(item, field, e->line));
      continue;
    }
    const std::string lhs = trim(item.substr(0, dots));
    const std::int64_t hi = to_int(trim(item.substr(dots + 2)), field, e->line);
    const auto caret = lhs.find('^');
    if (caret == std::string::npos) {
      const std::int64_t lo = to_int(lhs, field, e->line);
      if (hi < lo || hi - lo > 1000000) throw ParseError(field, e->line, "bad range '" + item + "'");
      for (std::int64_t v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      const std::int64_t base = to_int(trim(lhs.substr(0, caret)), field, e->line);
      const std::int64_t lo = to_int(trim(lhs.substr(caret + 1)), field, e->line);
      if (base < 2 || lo < 0 || hi < lo || hi > 62) throw ParseError(field, e->line, "bad power range '" + item + "'");
      for (std::int64_t k = lo; k <= hi; ++k) {
        const double v = std::pow(static_cast<double>(base), static_cast<double>(k));
        if (v > 9.2e18) throw ParseError(field, e->line, "power range overflows");
        out.push_back(static_cast<std::int64_t>(std::llround(v)));
      }
    }
  }
  if (out.empty()) throw ParseError(field, e->line, "empty list");
  return out;
}

std::vector<double> Config::get_double_list(const std::string& section, const std::string& key,
                                            const std::vector<double>& fallback) {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  const std::string field = field_name(section, key);
  std::vector<double> out;
  for (const std::string& item : split_list(e->value)) out.push_back(to_double(item, field, e->line));
  if (out.empty()) throw ParseError(field, e->line, "empty list");
  return out;
}

void Config::finish(const std::set<std::string>& allowed_sections) const {
  for (const auto& [section, entries] : sections_) {
    if (!allowed_sections.count(section)) {
      const auto it = section_lines_.find(section);
      throw ParseError(section, it == section_lines_.end() ? 0 : it->second, "unknown section");
    }
    for (const auto& [key, entry] : entries) {
      if (!used_.count({section, key})) throw ParseError(field_name(section, key), entry.line, "unknown key");
    }
  }
}

}  // namespace convrates
