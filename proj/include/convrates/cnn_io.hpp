// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>

#include "convrates/cnn.hpp"

namespace convrates {

/// Text format:
///
///   convrates-cnn 1
///   d <d>
///   s <s>
///   J <J>
///   L <L>
///   layer <l>
///   filter <s*J*in numbers, index order k, j', j>
///   bias <J numbers>
///   ...
///   output <d*J numbers, row-major>
///
/// Numbers use 17 significant digits, so finite doubles round-trip exactly.
void write_cnn(std::ostream& os, const CnnParams& p);
std::string to_text(const CnnParams& p);

/// Throws ParseError with the line number and field on malformed input.
CnnParams read_cnn(std::istream& is);
CnnParams from_text(const std::string& text);

void save_cnn(const std::string& path, const CnnParams& p);
CnnParams load_cnn(const std::string& path);

/// Shortest "%.17g" rendering shared by every text and CSV writer.
std::string format_double(double v);

}  // namespace convrates
