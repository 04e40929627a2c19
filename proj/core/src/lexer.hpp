#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "nesy/parser.hpp"

namespace nesy::detail {

enum class Tok : std::uint8_t {
  ident,
  number,
  string,  // "quoted" node id
  param,   // $name
  macro,   // @name
  lparen,
  rparen,
  lbracket,
  rbracket,
  comma,
  semicolon,
  assign,  // := (a bare = is `equals`)
  equals,
  not_equals,
  plus,
  minus,
  star,
  amp,
  pipe,
  bang,
  eof,
};

struct Token {
  Tok kind = Tok::eof;
  std::string text;
  double number = 0.0;
  SourceSpan span;

  /// Case-insensitive keyword test for identifiers.
  bool is_keyword(std::string_view kw) const;
};

/// Splits text into tokens. Bad characters become lex errors and are
/// skipped. `l-reg` and `log-reg` are single identifiers.
std::vector<Token> tokenize(std::string_view text, std::vector<ParseError>& errors);

const char* token_name(Tok kind);

}  // namespace nesy::detail
