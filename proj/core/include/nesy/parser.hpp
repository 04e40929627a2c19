#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nesy/error.hpp"
#include "nesy/formula.hpp"
#include "nesy/model.hpp"

namespace nesy {

enum class ParseErrorKind : std::uint8_t { lex, syntax, unknown_name, arity, cycle, range };

const char* kind_name(ParseErrorKind kind);

struct ParseError {
  SourceSpan span;
  ParseErrorKind kind = ParseErrorKind::syntax;
  std::string message;
};

struct ParseOptions {
  /// Name resolution, arity, range and acyclicity checks against the
  /// signature. Without them only the grammar is enforced and definitions
  /// keep their source order.
  bool semantic_checks = true;
};

struct ParseResult {
  RBNModel model;
  std::vector<ParseError> errors;
  bool ok() const { return errors.empty(); }
};

/// Parses model text. Keywords are case-insensitive, identifiers are
/// case-sensitive ASCII. Parsing continues after an error at the next `;`,
/// so one call can report several errors.
ParseResult parse_model(std::string_view text, const Signature& sig,
                        const ParseOptions& options = {});

/// Throws ParseFailure carrying all errors when parsing fails.
RBNModel parse_model_or_throw(std::string_view text, const Signature& sig,
                              const std::string& filename = "<model>");

class ParseFailure : public Error {
 public:
  ParseFailure(std::string what, std::vector<ParseError> errors)
      : Error(std::move(what)), errors_(std::move(errors)) {}
  const std::vector<ParseError>& errors() const { return errors_; }

 private:
  std::vector<ParseError> errors_;
};

/// `file:line:col: kind: message`
std::string format_error(const std::string& filename, const ParseError& error);

/// Canonical text; parse_model(format_model(m)) is structurally equal to m.
std::string format_model(const RBNModel& model);
std::string format_formula(const Formula& formula);

}  // namespace nesy
