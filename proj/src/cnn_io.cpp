// SPDX-License-Identifier: Apache-2.0
#include "convrates/cnn_io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "convrates/error.hpp"

namespace convrates {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void write_row(std::ostream& os, const char* key, const std::vector<double>& values) {
  os << key;
  for (double v : values) os << ' ' << format_double(v);
  os << '\n';
}

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  /// Next non-blank line split into a key and the remaining tokens.
  std::vector<std::string> next(const std::string& expected) {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_;
      std::istringstream ss(line);
      std::vector<std::string> tokens;
      for (std::string t; ss >> t;) tokens.push_back(t);
      if (tokens.empty()) continue;
      if (tokens[0] != expected) {
        throw ParseError(expected, line_, "expected '" + expected + "', found '" + tokens[0] + "'");
      }
      return tokens;
    }
    throw ParseError(expected, line_ + 1, "unexpected end of input");
  }

  int line() const { return line_; }

 private:
  std::istream& is_;
  int line_ = 0;
};

double parse_number(const std::string& token, const std::string& field, int line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0' || errno == ERANGE) {
    throw ParseError(field, line, "not a number: '" + token + "'");
  }
  return v;
}

int parse_int_field(LineReader& in, const std::string& key) {
  const auto tokens = in.next(key);
  if (tokens.size() != 2) throw ParseError(key, in.line(), "expected one integer");
  const double v = parse_number(tokens[1], key, in.line());
  if (v != static_cast<int>(v)) throw ParseError(key, in.line(), "expected an integer");
  return static_cast<int>(v);
}

void parse_values(LineReader& in, const std::string& key, std::vector<double>& dst) {
  const auto tokens = in.next(key);
  if (tokens.size() != dst.size() + 1) {
    throw ParseError(key, in.line(),
                     "expected " + std::to_string(dst.size()) + " values, found " +
                         std::to_string(tokens.size() - 1));
  }
  for (std::size_t t = 0; t < dst.size(); ++t) dst[t] = parse_number(tokens[t + 1], key, in.line());
}

}  // namespace

void write_cnn(std::ostream& os, const CnnParams& p) {
  validate(p);
  os << "convrates-cnn 1\n";
  os << "d " << p.d << "\ns " << p.s << "\nJ " << p.J << "\nL " << p.depth() << '\n';
  for (int l = 0; l < p.depth(); ++l) {
    os << "layer " << l << '\n';
    write_row(os, "filter", p.layers[l].filter.w);
    write_row(os, "bias", p.layers[l].bias);
  }
  write_row(os, "output", p.output_weights);
}

std::string to_text(const CnnParams& p) {
  std::ostringstream os;
  write_cnn(os, p);
  return os.str();
}

CnnParams read_cnn(std::istream& is) {
  LineReader in(is);
  const auto header = in.next("convrates-cnn");
  if (header.size() != 2 || header[1] != "1") throw ParseError("convrates-cnn", in.line(), "unsupported version");
  const int d = parse_int_field(in, "d");
  const int s = parse_int_field(in, "s");
  const int J = parse_int_field(in, "J");
  const int L = parse_int_field(in, "L");
  CnnParams p;
  try {
    p = CnnParams::zeros(d, s, J, L);
  } catch (const PreconditionError& e) {
    throw ParseError("header", in.line(), e.what());
  }
  for (int l = 0; l < L; ++l) {
    const auto tokens = in.next("layer");
    if (tokens.size() != 2 || tokens[1] != std::to_string(l)) {
      throw ParseError("layer", in.line(), "expected layer index " + std::to_string(l));
    }
    parse_values(in, "filter", p.layers[l].filter.w);
    parse_values(in, "bias", p.layers[l].bias);
  }
  parse_values(in, "output", p.output_weights);
  try {
    validate(p);
  } catch (const PreconditionError& e) {
    throw ParseError("output", in.line(), e.what());
  }
  return p;
}

CnnParams from_text(const std::string& text) {
  std::istringstream is(text);
  return read_cnn(is);
}

void save_cnn(const std::string& path, const CnnParams& p) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_cnn(os, p);
  if (!os) throw Error("write failed: " + path);
}

CnnParams load_cnn(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  return read_cnn(is);
}

}  // namespace convrates
