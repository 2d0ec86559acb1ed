#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace obb {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_real(double value);

struct Token {
  std::string_view text;
  std::size_t column = 0;  // 1-based
};

/// Splits on ASCII whitespace, remembering each token's column.
std::vector<Token> tokenize(std::string_view line);

/// Parses a complete token as a finite double; throws ParseError on failure.
double parse_real(const Token& token, std::size_t line);
int parse_int(const Token& token, std::size_t line);

/// Splits text into lines; a trailing '\r' is dropped from each line.
std::vector<std::string_view> split_lines(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace obb
