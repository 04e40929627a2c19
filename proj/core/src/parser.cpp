#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "lexer.hpp"
#include "nesy/parser.hpp"

namespace nesy {

const char* kind_name(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::lex:
      return "lex";
    case ParseErrorKind::syntax:
      return "syntax";
    case ParseErrorKind::unknown_name:
      return "unknown-name";
    case ParseErrorKind::arity:
      return "arity";
    case ParseErrorKind::cycle:
      return "cycle";
    case ParseErrorKind::range:
      return "range";
  }
  return "error";
}

std::string format_error(const std::string& filename, const ParseError& error) {
  std::ostringstream os;
  os << filename << ':' << error.span.line << ':' << error.span.column << ": "
     << kind_name(error.kind) << ": " << error.message;
  return os.str();
}

namespace {

using detail::Tok;
using detail::Token;

constexpr const char* kKeywords[] = {
    "softmax", "wif",   "then",           "else",          "combine",     "with",
    "forall",  "where", "computewithgnn", "withnumvalues", "forfreevars", "usinggnn",
    "true",    "false",
};

bool is_reserved(const Token& t) {
  if (t.kind != Tok::ident) return false;
  for (const char* kw : kKeywords) {
    if (t.is_keyword(kw)) return true;
  }
  return false;
}

std::shared_ptr<Formula> mut(FormulaPtr p) { return std::const_pointer_cast<Formula>(p); }

FormulaPtr spanned(FormulaPtr p, SourceSpan span) {
  mut(p)->span = span;
  return p;
}

struct Recover {};

/// A parsed operand: a formula, or a bare term that is only valid as an
/// operand of `=` / `!=`.
struct Operand {
  FormulaPtr formula;
  std::optional<Term> term;
  SourceSpan span;
};

class Parser {
 public:
  Parser(std::vector<Token> tokens, std::vector<ParseError>& errors)
      : toks_(std::move(tokens)), errors_(errors) {}

  RBNModel run() {
    RBNModel model;
    while (peek().kind != Tok::eof) {
      try {
        statement(model);
      } catch (const Recover&) {
        sync();
      }
    }
    return model;
  }

 private:
  const Token& peek(std::size_t k = 0) const {
    const std::size_t i = std::min(pos_ + k, toks_.size() - 1);
    return toks_[i];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool at(Tok kind) const { return peek().kind == kind; }
  bool at_kw(std::string_view kw) const { return peek().is_keyword(kw); }

  [[noreturn]] void fail(const Token& t, std::string message) {
    errors_.push_back({t.span, ParseErrorKind::syntax, std::move(message)});
    throw Recover{};
  }

  std::string describe(const Token& t) const {
    if (t.kind == Tok::eof) return "end of input";
    return "'" + t.text + "'";
  }

  const Token& expect(Tok kind, const char* context) {
    if (!at(kind)) {
      fail(peek(), std::string("expected ") + detail::token_name(kind) + " " + context +
                       ", found " + describe(peek()));
    }
    return next();
  }

  void expect_kw(std::string_view kw, const char* context) {
    if (!at_kw(kw)) {
      std::string upper(kw);
      std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
      fail(peek(), "expected " + upper + " " + context + ", found " + describe(peek()));
    }
    next();
  }

  void sync() {
    while (!at(Tok::eof)) {
      if (next().kind == Tok::semicolon) return;
    }
  }

  void end_statement() {
    if (at(Tok::semicolon)) {
      next();
      return;
    }
    if (at(Tok::eof)) return;
    fail(peek(), "expected ';' after definition, found " + describe(peek()));
  }

  void expect_assign() {
    if (at(Tok::equals) || at(Tok::assign)) {
      next();
      return;
    }
    fail(peek(), "expected '=' or ':=' in definition, found " + describe(peek()));
  }

  std::string name_token(const char* what) {
    if (!at(Tok::ident) || is_reserved(peek())) {
      fail(peek(), std::string("expected ") + what + ", found " + describe(peek()));
    }
    return next().text;
  }

  double signed_number(const char* context) {
    bool neg = false;
    if (at(Tok::minus)) {
      next();
      neg = true;
    }
    const double v = expect(Tok::number, context).number;
    return neg ? -v : v;
  }

  void statement(RBNModel& model) {
    const Token& head = peek();
    if (head.kind == Tok::param) {
      next();
      ParamDecl decl;
      decl.name = head.text;
      expect_assign();
      decl.value = signed_number("as parameter value");
      if (at(Tok::lbracket)) {
        next();
        decl.lo = signed_number("as lower bound");
        expect(Tok::comma, "between parameter bounds");
        decl.hi = signed_number("as upper bound");
        expect(Tok::rbracket, "after parameter bounds");
      }
      end_statement();
      model.params.push_back(std::move(decl));
      return;
    }
    if (head.kind == Tok::macro) {
      next();
      MacroDef m;
      m.name = head.text;
      m.span = head.span;
      if (at(Tok::lparen)) m.params = param_list();
      expect_assign();
      m.body = formula();
      end_statement();
      model.macros.push_back(std::move(m));
      return;
    }
    if (head.kind == Tok::ident && !is_reserved(head)) {
      next();
      RelationDef d;
      d.relation = head.text;
      d.span = head.span;
      if (at(Tok::lparen)) d.params = param_list();
      expect_assign();
      d.body = formula();
      end_statement();
      model.definitions.push_back(std::move(d));
      return;
    }
    fail(head, "expected a definition, found " + describe(head));
  }

  std::vector<TypedVar> param_list() {
    expect(Tok::lparen, "to open the parameter list");
    std::vector<TypedVar> out;
    if (at(Tok::rparen)) {
      next();
      return out;
    }
    while (true) {
      out.push_back(typed_var());
      if (at(Tok::comma)) {
        next();
        continue;
      }
      expect(Tok::rparen, "to close the parameter list");
      return out;
    }
  }

  TypedVar typed_var() {
    TypedVar v;
    if (at(Tok::lbracket)) {
      next();
      v.type = name_token("a node type");
      expect(Tok::rbracket, "after the node type");
    }
    v.name = name_token("a variable name");
    return v;
  }

  /// True when the token after `, ` continues a FORALL variable list.
  bool forall_continues() const {
    if (!at(Tok::comma)) return false;
    const Token& t = peek(1);
    if (t.kind == Tok::lbracket) return true;
    if (t.kind != Tok::ident || is_reserved(t)) return false;
    const Token& after = peek(2);
    switch (after.kind) {
      case Tok::comma:
      case Tok::semicolon:
      case Tok::rparen:
      case Tok::eof:
        return true;
      default:
        return after.is_keyword("where") || after.is_keyword("with") ||
               after.is_keyword("then") || after.is_keyword("else");
    }
  }

  std::vector<TypedVar> forall_vars() {
    std::vector<TypedVar> out;
    if (!(at(Tok::lbracket) || (at(Tok::ident) && !is_reserved(peek())))) return out;
    out.push_back(typed_var());
    while (forall_continues()) {
      next();
      out.push_back(typed_var());
    }
    return out;
  }

  std::vector<Term> term_list() {
    expect(Tok::lparen, "to open the argument list");
    std::vector<Term> out;
    if (at(Tok::rparen)) {
      next();
      return out;
    }
    while (true) {
      out.push_back(term());
      if (at(Tok::comma)) {
        next();
        continue;
      }
      expect(Tok::rparen, "to close the argument list");
      return out;
    }
  }

  Term term() {
    if (at(Tok::string)) return Term::node(next().text);
    return Term::var(name_token("a variable or quoted node id"));
  }

  // formula := or
  FormulaPtr formula() {
    FormulaPtr lhs = conj_expr();
    while (at(Tok::pipe)) {
      const SourceSpan s = next().span;
      lhs = spanned(f::disj(lhs, conj_expr()), s);
    }
    return lhs;
  }

  FormulaPtr conj_expr() {
    FormulaPtr lhs = add_expr();
    while (at(Tok::amp)) {
      const SourceSpan s = next().span;
      lhs = spanned(f::conj(lhs, add_expr()), s);
    }
    return lhs;
  }

  FormulaPtr add_expr() {
    FormulaPtr lhs = mul_expr();
    while (at(Tok::plus) || at(Tok::minus)) {
      const Token& op = next();
      FormulaPtr rhs = mul_expr();
      if (op.kind == Tok::minus) rhs = spanned(f::scale(-1.0, rhs), op.span);
      lhs = spanned(f::add(lhs, rhs), op.span);
    }
    return lhs;
  }

  FormulaPtr mul_expr() {
    FormulaPtr lhs = unary();
    while (at(Tok::star)) {
      const SourceSpan s = next().span;
      lhs = spanned(f::mul(lhs, unary()), s);
    }
    return lhs;
  }

  FormulaPtr unary() {
    if (at(Tok::bang)) {
      const SourceSpan s = next().span;
      return spanned(f::negate(unary()), s);
    }
    if (at(Tok::minus)) {
      const SourceSpan s = next().span;
      if (at(Tok::number)) return spanned(f::constant(-next().number), s);
      return spanned(f::scale(-1.0, unary()), s);
    }
    return comparison();
  }

  FormulaPtr comparison() {
    Operand lhs = primary();
    if (at(Tok::equals) || at(Tok::not_equals)) {
      const Token& op = next();
      const bool negated = op.kind == Tok::not_equals;
      if (lhs.term) {
        Operand rhs = primary();
        if (!rhs.term) fail(op, "a variable can only be compared with a variable or node id");
        return spanned(f::term_compare(*lhs.term, *rhs.term, negated), op.span);
      }
      if (!lhs.formula || lhs.formula->kind != FormulaKind::atom) {
        fail(op, "left side of a comparison must be an atom or a variable");
      }
      FormulaPtr result;
      const Token& t = peek();
      if (t.kind == Tok::ident && peek(1).kind != Tok::lparen &&
          (!is_reserved(t) || t.is_keyword("true") || t.is_keyword("false"))) {
        next();
        std::string category = t.text;
        if (t.is_keyword("true") || t.is_keyword("false")) {
          std::transform(category.begin(), category.end(), category.begin(), ::tolower);
        }
        result = spanned(f::equals_value(lhs.formula->name, lhs.formula->terms, category),
                         lhs.span);
      } else {
        Operand rhs = primary();
        if (!rhs.formula || rhs.formula->kind != FormulaKind::atom) {
          fail(op, "right side of an atom comparison must be a value name or an atom");
        }
        result = spanned(f::equals_atom(lhs.formula, rhs.formula), lhs.span);
      }
      return negated ? spanned(f::negate(result), op.span) : result;
    }
    if (lhs.term) {
      errors_.push_back({lhs.span, ParseErrorKind::syntax,
                         "variable '" + lhs.term->name + "' used where a formula is expected"});
      throw Recover{};
    }
    return lhs.formula;
  }

  Operand primary() {
    const Token& t = peek();
    Operand out;
    out.span = t.span;
    switch (t.kind) {
      case Tok::number:
        next();
        out.formula = spanned(f::constant(t.number), t.span);
        return out;
      case Tok::param:
        next();
        out.formula = spanned(f::param(t.text), t.span);
        return out;
      case Tok::macro: {
        next();
        std::vector<Term> args;
        if (at(Tok::lparen)) args = term_list();
        out.formula = spanned(f::macro(t.text, std::move(args)), t.span);
        return out;
      }
      case Tok::string:
        next();
        out.term = Term::node(t.text);
        return out;
      case Tok::lparen: {
        next();
        out.formula = formula();
        expect(Tok::rparen, "to close the parenthesis");
        return out;
      }
      case Tok::ident:
        break;
      default:
        fail(t, "expected a formula, found " + describe(t));
    }
    if (t.is_keyword("true") || t.is_keyword("false")) {
      next();
      out.formula = spanned(f::constant(t.is_keyword("true") ? 1.0 : 0.0), t.span);
      return out;
    }
    if (t.is_keyword("wif")) {
      next();
      FormulaPtr c = formula();
      expect_kw("then", "after the WIF condition");
      FormulaPtr a = formula();
      expect_kw("else", "after the THEN branch");
      FormulaPtr b = formula();
      out.formula = spanned(f::wif(c, a, b), t.span);
      return out;
    }
    if (t.is_keyword("combine")) {
      next();
      out.formula = combine_rest(t.span);
      return out;
    }
    if (t.is_keyword("softmax")) {
      next();
      std::vector<FormulaPtr> parts{formula()};
      while (at(Tok::comma)) {
        next();
        parts.push_back(formula());
      }
      out.formula = spanned(f::softmax(std::move(parts)), t.span);
      return out;
    }
    if (t.is_keyword("computewithgnn")) {
      next();
      out.formula = gnn_rest(t.span);
      return out;
    }
    if (is_reserved(t)) fail(t, "unexpected keyword " + describe(t));
    next();
    if (at(Tok::lparen)) {
      out.formula = spanned(f::atom(t.text, term_list()), t.span);
      return out;
    }
    out.term = Term::var(t.text);
    return out;
  }

  Combiner combiner() {
    const Token& t = peek();
    if (t.is_keyword("sum")) {
      next();
      return Combiner::sum;
    }
    if (t.is_keyword("mean")) {
      next();
      return Combiner::mean;
    }
    if (t.is_keyword("l-reg") || t.is_keyword("log-reg") || t.is_keyword("lreg")) {
      next();
      return Combiner::lreg;
    }
    if (t.is_keyword("invsum")) {
      next();
      return Combiner::invsum;
    }
    fail(t, "expected a combiner (sum, mean, l-reg, invsum), found " + describe(t));
  }

  FormulaPtr combine_rest(SourceSpan span) {
    std::vector<FormulaPtr> body{formula()};
    while (at(Tok::comma)) {
      next();
      body.push_back(formula());
    }
    expect_kw("with", "after the COMBINE body");
    const Combiner c = combiner();
    std::vector<TypedVar> vars;
    FormulaPtr where;
    if (at_kw("forall")) {
      next();
      vars = forall_vars();
    }
    if (at_kw("where")) {
      next();
      where = formula();
    }
    return spanned(f::combine(std::move(body), c, std::move(vars), where), span);
  }

  FormulaPtr gnn_rest(SourceSpan span) {
    const std::string id = name_token("a GNN model id");
    expect_kw("withnumvalues", "after the GNN model id");
    const Token& k = expect(Tok::number, "as the number of values");
    if (k.number != std::floor(k.number) || k.number < 1) fail(k, "value count must be a positive integer");
    expect_kw("forfreevars", "after the value count");
    expect(Tok::lparen, "to open the free variable list");
    std::vector<std::string> free;
    if (!at(Tok::rparen)) {
      free.push_back(name_token("a variable name"));
      while (at(Tok::comma)) {
        next();
        free.push_back(name_token("a variable name"));
      }
    }
    expect(Tok::rparen, "to close the free variable list");
    std::vector<GnnClause> clauses;
    do {
      if (!clauses.empty()) next();
      clauses.push_back(gnn_clause());
    } while (at(Tok::comma) && peek(1).is_keyword("combine"));
    return spanned(f::gnn(id, static_cast<int>(k.number), std::move(free), std::move(clauses)),
                   span);
  }

  GnnClause gnn_clause() {
    expect_kw("combine", "to start a GNN input clause");
    GnnClause clause;
    while (true) {
      Operand a = primary();
      if (!a.formula || a.formula->kind != FormulaKind::atom) {
        errors_.push_back({a.span, ParseErrorKind::syntax, "GNN inputs must be atoms"});
        throw Recover{};
      }
      clause.atoms.push_back(a.formula);
      if (!at(Tok::comma)) break;
      next();
    }
    expect_kw("usinggnn", "after the GNN input atoms");
    if (at_kw("forall")) {
      next();
      clause.forall = forall_vars();
    }
    if (at_kw("where")) {
      next();
      clause.where = formula();
    }
    return clause;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<ParseError>& errors_;
};

// --- semantic checks -------------------------------------------------------------

class Checker {
 public:
  Checker(RBNModel& model, std::vector<ParseError>& errors) : model_(model), errors_(errors) {}

  void run() {
    const Signature& sig = model_.signature;
    std::set<std::string> defined;
    for (const auto& d : model_.definitions) {
      if (!defined.insert(d.relation).second) {
        error(d.span, ParseErrorKind::syntax, "relation '" + d.relation + "' is defined twice");
      }
      check_types(d.params, d.span);
      auto id = sig.find(d.relation);
      if (!id) {
        error(d.span, ParseErrorKind::unknown_name,
              "relation '" + d.relation + "' is not in the signature");
        continue;
      }
      const Relation& r = sig.relation(*id);
      if (static_cast<int>(d.params.size()) != r.arity) {
        error(d.span, ParseErrorKind::arity,
              "relation '" + r.name + "' has arity " + std::to_string(r.arity) + ", definition has " +
                  std::to_string(d.params.size()) + " parameters");
      }
      check_body(d, r);
      std::vector<std::string> scope;
      for (const auto& p : d.params) scope.push_back(p.name);
      walk(*d.body, scope, true);
    }
    std::set<std::string> macro_names;
    for (const auto& m : model_.macros) {
      if (!macro_names.insert(m.name).second) {
        error(m.span, ParseErrorKind::syntax, "macro @" + m.name + " is defined twice");
      }
      check_types(m.params, m.span);
      std::vector<std::string> scope;
      for (const auto& p : m.params) scope.push_back(p.name);
      walk(*m.body, scope, false);
    }
    check_macro_cycles();
    if (errors_.empty()) order_definitions();
    if (errors_.empty()) apply_arg_types();
  }

 private:
  void error(SourceSpan span, ParseErrorKind kind, std::string message) {
    errors_.push_back({span, kind, std::move(message)});
  }

  void check_types(const std::vector<TypedVar>& params, SourceSpan span) {
    const Signature& sig = model_.signature;
    for (const auto& p : params) {
      if (!p.type.empty() && !sig.node_types().empty() && !sig.has_node_type(p.type)) {
        error(span, ParseErrorKind::unknown_name, "unknown node type '" + p.type + "'");
      }
    }
  }

  void check_body(const RelationDef& d, const Relation& r) {
    const Formula& body = *d.body;
    if (r.range.kind == RangeKind::numeric) {
      error(d.span, ParseErrorKind::range,
            "numeric relation '" + r.name + "' is an input and cannot be defined");
      return;
    }
    const std::size_t k = r.range.cardinality();
    if (body.kind == FormulaKind::softmax && body.children.size() != k) {
      error(body.span, ParseErrorKind::arity,
            "SOFTMAX for '" + r.name + "' has " + std::to_string(body.children.size()) +
                " parts, the relation has " + std::to_string(k) + " values");
    } else if (body.kind == FormulaKind::gnn) {
      if (static_cast<std::size_t>(body.num_values) != k) {
        error(body.span, ParseErrorKind::arity,
              "COMPUTEWITHGNN declares " + std::to_string(body.num_values) + " values, '" + r.name +
                  "' has " + std::to_string(k));
      }
      if (body.free_vars.size() != 1 || r.arity != 1) {
        error(body.span, ParseErrorKind::arity,
              "COMPUTEWITHGNN defines unary relations over one free variable");
      }
    } else if (body.kind != FormulaKind::softmax && r.range.kind == RangeKind::categorical) {
      error(d.span, ParseErrorKind::range,
            "categorical relation '" + r.name + "' must be defined by SOFTMAX or COMPUTEWITHGNN");
    }
  }

  const Relation* relation(const Formula& atom) {
    auto id = model_.signature.find(atom.name);
    if (!id) {
      error(atom.span, ParseErrorKind::unknown_name, "unknown relation '" + atom.name + "'");
      return nullptr;
    }
    const Relation& r = model_.signature.relation(*id);
    if (static_cast<int>(atom.terms.size()) != r.arity) {
      error(atom.span, ParseErrorKind::arity,
            "relation '" + r.name + "' expects " + std::to_string(r.arity) + " arguments, got " +
                std::to_string(atom.terms.size()));
      return nullptr;
    }
    return &r;
  }

  void check_terms(const Formula& fm, const std::vector<std::string>& scope) {
    for (const auto& t : fm.terms) {
      if (t.is_var() && std::find(scope.begin(), scope.end(), t.name) == scope.end()) {
        error(fm.span, ParseErrorKind::unknown_name, "unbound variable '" + t.name + "'");
      }
    }
  }

  void walk(const Formula& fm, std::vector<std::string>& scope, bool top) {
    switch (fm.kind) {
      case FormulaKind::atom: {
        check_terms(fm, scope);
        if (const Relation* r = relation(fm); r && r->range.kind == RangeKind::categorical) {
          error(fm.span, ParseErrorKind::range,
                "categorical atom " + fm.name + "(...) must be compared with a value");
        }
        return;
      }
      case FormulaKind::equals_value: {
        check_terms(fm, scope);
        const Relation* r = relation(fm);
        if (r == nullptr) return;
        if (!r->range.is_discrete()) {
          error(fm.span, ParseErrorKind::range, "numeric relation '" + r->name + "' compared with a value");
        } else if (!r->range.index_of(fm.category)) {
          error(fm.span, ParseErrorKind::unknown_name,
                "'" + fm.category + "' is not a value of relation '" + r->name + "'");
        }
        return;
      }
      case FormulaKind::equals_atom: {
        for (const auto& c : fm.children) {
          check_terms(*c, scope);
          const Relation* r = relation(*c);
          if (r && !r->range.is_discrete()) {
            error(c->span, ParseErrorKind::range,
                  "numeric relation '" + r->name + "' cannot be compared for equality");
          }
        }
        return;
      }
      case FormulaKind::term_compare:
        check_terms(fm, scope);
        return;
      case FormulaKind::macro: {
        check_terms(fm, scope);
        const MacroDef* m = model_.find_macro(fm.name);
        if (m == nullptr) {
          error(fm.span, ParseErrorKind::unknown_name, "unknown macro @" + fm.name);
        } else if (m->params.size() != fm.terms.size()) {
          error(fm.span, ParseErrorKind::arity,
                "macro @" + fm.name + " expects " + std::to_string(m->params.size()) +
                    " arguments, got " + std::to_string(fm.terms.size()));
        }
        return;
      }
      case FormulaKind::softmax:
      case FormulaKind::gnn:
        if (!top) {
          error(fm.span, ParseErrorKind::syntax,
                std::string(fm.kind == FormulaKind::softmax ? "SOFTMAX" : "COMPUTEWITHGNN") +
                    " may only appear as a whole relation definition");
        }
        if (fm.kind == FormulaKind::gnn) {
          for (const auto& v : fm.free_vars) {
            if (std::find(scope.begin(), scope.end(), v) == scope.end()) {
              error(fm.span, ParseErrorKind::unknown_name, "unbound variable '" + v + "'");
            }
          }
          for (const auto& clause : fm.clauses) {
            for (const auto& a : clause.atoms) relation(*a);
          }
          return;
        }
        for (const auto& c : fm.children) walk(*c, scope, false);
        return;
      case FormulaKind::combine: {
        const std::size_t mark = scope.size();
        for (const auto& v : fm.forall) scope.push_back(v.name);
        check_types(fm.forall, fm.span);
        for (const auto& c : fm.children) walk(*c, scope, false);
        if (fm.where) walk(*fm.where, scope, false);
        scope.resize(mark);
        return;
      }
      default:
        for (const auto& c : fm.children) walk(*c, scope, false);
        return;
    }
  }

  void check_macro_cycles() {
    std::map<std::string, int> state;  // 1 = on stack, 2 = done
    std::function<bool(const MacroDef&)> dfs = [&](const MacroDef& m) -> bool {
      state[m.name] = 1;
      bool cyclic = false;
      visit(*m.body, [&](const Formula& fm) {
        if (cyclic || fm.kind != FormulaKind::macro) return;
        const MacroDef* callee = model_.find_macro(fm.name);
        if (callee == nullptr) return;
        const int s = state[callee->name];
        if (s == 1) {
          error(fm.span, ParseErrorKind::cycle,
                "macro @" + callee->name + " is recursive (called from @" + m.name + ")");
          cyclic = true;
        } else if (s == 0 && dfs(*callee)) {
          cyclic = true;
        }
      });
      state[m.name] = 2;
      return cyclic;
    };
    for (const auto& m : model_.macros) {
      if (state[m.name] == 0) dfs(m);
    }
  }

  void order_definitions() {
    auto& defs = model_.definitions;
    const std::size_t n = defs.size();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) index[defs[i].relation] = i;
    std::vector<std::vector<std::size_t>> deps(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& rel : referenced_relations(model_, *defs[i].body)) {
        auto it = index.find(rel);
        if (it == index.end()) continue;
        if (it->second == i) {
          error(defs[i].span, ParseErrorKind::cycle,
                "relation '" + defs[i].relation + "' depends on itself");
          return;
        }
        deps[i].push_back(it->second);
      }
    }
    std::vector<bool> placed(n, false);
    std::vector<RelationDef> ordered;
    while (ordered.size() < n) {
      bool progress = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (placed[i]) continue;
        const bool ready = std::all_of(deps[i].begin(), deps[i].end(),
                                       [&](std::size_t j) { return placed[j]; });
        if (ready) {
          placed[i] = true;
          ordered.push_back(defs[i]);
          progress = true;
          break;
        }
      }
      if (!progress) {
        std::string cycle;
        for (std::size_t i = 0; i < n; ++i) {
          if (!placed[i]) cycle += (cycle.empty() ? "" : ", ") + defs[i].relation;
        }
        for (std::size_t i = 0; i < n; ++i) {
          if (!placed[i]) {
            error(defs[i].span, ParseErrorKind::cycle,
                  "cyclic dependency between relations: " + cycle);
            return;
          }
        }
      }
    }
    defs = std::move(ordered);
  }

  void apply_arg_types() {
    Signature& sig = model_.signature;
    for (const auto& d : model_.definitions) {
      const bool typed = std::any_of(d.params.begin(), d.params.end(),
                                     [](const TypedVar& v) { return !v.type.empty(); });
      if (!typed) continue;
      Relation& r = sig.relation_mut(sig.id_of(d.relation));
      r.arg_types.clear();
      for (const auto& p : d.params) r.arg_types.push_back(p.type);
    }
  }

  RBNModel& model_;
  std::vector<ParseError>& errors_;
};

}  // namespace

ParseResult parse_model(std::string_view text, const Signature& sig, const ParseOptions& options) {
  ParseResult result;
  auto tokens = detail::tokenize(text, result.errors);
  result.model = Parser(std::move(tokens), result.errors).run();
  result.model.signature = sig;
  if (options.semantic_checks && result.errors.empty()) {
    Checker(result.model, result.errors).run();
  }
  std::stable_sort(result.errors.begin(), result.errors.end(),
                   [](const ParseError& a, const ParseError& b) {
                     return a.span.offset < b.span.offset;
                   });
  return result;
}

RBNModel parse_model_or_throw(std::string_view text, const Signature& sig,
                              const std::string& filename) {
  ParseResult r = parse_model(text, sig);
  if (!r.ok()) {
    std::string msg;
    for (const auto& e : r.errors) msg += (msg.empty() ? "" : "\n") + format_error(filename, e);
    throw ParseFailure(msg, std::move(r.errors));
  }
  return std::move(r.model);
}

}  // namespace nesy
