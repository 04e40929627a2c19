#include "lexer.hpp"

#include <cctype>
#include <charconv>

namespace nesy::detail {

bool Token::is_keyword(std::string_view kw) const {
  if (kind != Tok::ident || text.size() != kw.size()) return false;
  for (std::size_t i = 0; i < kw.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[i])) !=
        std::tolower(static_cast<unsigned char>(kw[i]))) {
      return false;
    }
  }
  return true;
}

const char* token_name(Tok kind) {
  switch (kind) {
    case Tok::ident:
      return "identifier";
    case Tok::number:
      return "number";
    case Tok::string:
      return "quoted node id";
    case Tok::param:
      return "parameter";
    case Tok::macro:
      return "macro name";
    case Tok::lparen:
      return "'('";
    case Tok::rparen:
      return "')'";
    case Tok::lbracket:
      return "'['";
    case Tok::rbracket:
      return "']'";
    case Tok::comma:
      return "','";
    case Tok::semicolon:
      return "';'";
    case Tok::assign:
      return "':='";
    case Tok::equals:
      return "'='";
    case Tok::not_equals:
      return "'!='";
    case Tok::plus:
      return "'+'";
    case Tok::minus:
      return "'-'";
    case Tok::star:
      return "'*'";
    case Tok::amp:
      return "'&'";
    case Tok::pipe:
      return "'|'";
    case Tok::bang:
      return "'!'";
    case Tok::eof:
      return "end of input";
  }
  return "token";
}

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

class Lexer {
 public:
  Lexer(std::string_view text, std::vector<ParseError>& errors) : text_(text), errors_(errors) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      Token t;
      t.span = here();
      if (pos_ >= text_.size()) {
        t.kind = Tok::eof;
        out.push_back(t);
        return out;
      }
      const char c = text_[pos_];
      if (ident_start(c)) {
        t.kind = Tok::ident;
        t.text = read_ident();
        if ((iequals(t.text, "l") || iequals(t.text, "log")) && pos_ + 4 <= text_.size() &&
            iequals(text_.substr(pos_, 4), "-reg")) {
          t.text += text_.substr(pos_, 4);
          advance(4);
        }
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '.' && pos_ + 1 < text_.size() &&
                  std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
        if (!read_number(t)) continue;
      } else if (c == '"') {
        advance(1);
        const std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != '"' && text_[pos_] != '\n') advance(1);
        if (pos_ >= text_.size() || text_[pos_] != '"') {
          error(t.span, "unterminated quoted node id");
          continue;
        }
        t.kind = Tok::string;
        t.text = std::string(text_.substr(start, pos_ - start));
        advance(1);
      } else if (c == '$' || c == '@') {
        advance(1);
        if (pos_ >= text_.size() || !ident_start(text_[pos_])) {
          error(t.span, std::string("expected a name after '") + c + "'");
          continue;
        }
        t.kind = c == '$' ? Tok::param : Tok::macro;
        t.text = read_ident();
      } else {
        if (!read_punct(t)) continue;
      }
      out.push_back(std::move(t));
    }
  }

 private:
  SourceSpan here() const { return {line_, col_, pos_}; }

  void advance(std::size_t n) {
    for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i) {
      if (text_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else if ((static_cast<unsigned char>(text_[pos_]) & 0xC0) != 0x80) {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance(1);
      } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance(1);
      } else {
        return;
      }
    }
  }

  std::string read_ident() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && ident_char(text_[pos_])) advance(1);
    return std::string(text_.substr(start, pos_ - start));
  }

  bool read_number(Token& t) {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
                                   text_[pos_] == '.')) {
      advance(1);
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        advance(p - pos_);
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
          advance(1);
        }
      }
    }
    const std::string_view lexeme = text_.substr(start, pos_ - start);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(lexeme.data(), lexeme.data() + lexeme.size(), value);
    if (ec != std::errc() || ptr != lexeme.data() + lexeme.size()) {
      error(t.span, "malformed number '" + std::string(lexeme) + "'");
      return false;
    }
    t.kind = Tok::number;
    t.text = std::string(lexeme);
    t.number = value;
    return true;
  }

  bool read_punct(Token& t) {
    const char c = text_[pos_];
    const char n = pos_ + 1 < text_.size() ? text_[pos_ + 1] : '\0';
    std::size_t len = 1;
    switch (c) {
      case '(':
        t.kind = Tok::lparen;
        break;
      case ')':
        t.kind = Tok::rparen;
        break;
      case '[':
        t.kind = Tok::lbracket;
        break;
      case ']':
        t.kind = Tok::rbracket;
        break;
      case ',':
        t.kind = Tok::comma;
        break;
      case ';':
        t.kind = Tok::semicolon;
        break;
      case '+':
        t.kind = Tok::plus;
        break;
      case '-':
        t.kind = Tok::minus;
        break;
      case '*':
        t.kind = Tok::star;
        break;
      case '&':
        t.kind = Tok::amp;
        break;
      case '|':
        t.kind = Tok::pipe;
        break;
      case '=':
        t.kind = Tok::equals;
        break;
      case '!':
        if (n == '=') {
          t.kind = Tok::not_equals;
          len = 2;
        } else {
          t.kind = Tok::bang;
        }
        break;
      case ':':
        if (n == '=') {
          t.kind = Tok::assign;
          len = 2;
          break;
        }
        [[fallthrough]];
      default: {
        const auto byte = static_cast<unsigned char>(c);
        if (byte >= 0x80) {
          std::size_t len_bad = 1;
          while (pos_ + len_bad < text_.size() &&
                 (static_cast<unsigned char>(text_[pos_ + len_bad]) & 0xC0) == 0x80) {
            ++len_bad;
          }
          error(t.span, "non-ASCII character '" + std::string(text_.substr(pos_, len_bad)) +
                            "'; identifiers are ASCII");
          advance(len_bad);
        } else {
          error(t.span, std::string("unexpected character '") + c + "'");
          advance(1);
        }
        return false;
      }
    }
    t.text = std::string(text_.substr(pos_, len));
    advance(len);
    return true;
  }

  void error(SourceSpan span, std::string message) {
    errors_.push_back({span, ParseErrorKind::lex, std::move(message)});
  }

  std::string_view text_;
  std::vector<ParseError>& errors_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

}  // namespace

std::vector<Token> tokenize(std::string_view text, std::vector<ParseError>& errors) {
  return Lexer(text, errors).run();
}

}  // namespace nesy::detail
