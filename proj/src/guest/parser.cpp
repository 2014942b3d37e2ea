#include "halbench/guest_syntax.hpp"

#include <algorithm>
#include <cctype>
#include <utility>

namespace halbench::guest {

namespace {

struct Failure {
  std::string message;
  std::size_t token_index;
};

void reposition(Expr &e, Position pos) {
  e.pos = pos;
  for (auto &kid : e.kids)
    if (kid)
      reposition(*kid, pos);
  for (auto &clause : e.clauses) {
    reposition(*clause.target, pos);
    reposition(*clause.iter, pos);
    for (auto &c : clause.conditions)
      reposition(*c, pos);
  }
  for (auto &param : e.params) {
    param.pos = pos;
    if (param.default_value)
      reposition(*param.default_value, pos);
  }
}

ExprPtr make(ExprKind kind, Position pos, std::string text = {}) {
  auto e = std::make_unique<Expr>();
  e->kind = kind;
  e->pos = pos;
  e->text = std::move(text);
  return e;
}

class Parser {
public:
  Parser(const TokenStream &stream, std::size_t line_offset = 0)
      : tokens_(stream.tokens), comments_(stream.comment_lines),
        line_offset_(line_offset) {
    indents_.push_back(0);
  }

  Module parse_file() {
    Module module;
    while (!at(TokenKind::End)) {
      if (at(TokenKind::Newline)) {
        ++i_;
        continue;
      }
      if (at(TokenKind::Indent))
        fail("unexpected indent");
      parse_statement(module.body);
    }
    return module;
  }

  ExprPtr parse_standalone_expression() {
    auto e = parse_testlist_star();
    while (at(TokenKind::Newline))
      ++i_;
    if (!at(TokenKind::End))
      fail("unexpected token in expression");
    return e;
  }

  SyntaxFailure describe(const Failure &f) const {
    const Token &t = tokens_[std::min(f.token_index, tokens_.size() - 1)];
    SyntaxFailure out;
    out.pos = t.pos;
    out.pos.line += line_offset_;
    if (t.kind == TokenKind::Error) {
      out.message = t.text;
      out.incomplete = t.incomplete;
      return out;
    }
    out.message = f.message;
    out.incomplete = t.at_eof || ends_input(f.token_index);
    return out;
  }

private:
  // A real NEWLINE followed only by synthesized end-of-input tokens.
  bool ends_input(std::size_t index) const {
    if (tokens_[index].kind != TokenKind::Newline)
      return false;
    for (std::size_t k = index + 1; k < tokens_.size(); ++k)
      if (!tokens_[k].at_eof)
        return false;
    return true;
  }

  const Token &cur() const { return tokens_[i_]; }
  const Token &ahead(std::size_t n) const {
    return tokens_[std::min(i_ + n, tokens_.size() - 1)];
  }
  bool at(TokenKind kind) const { return cur().kind == kind; }
  bool at_op(std::string_view op) const {
    return cur().kind == TokenKind::Op && cur().text == op;
  }
  bool at_kw(std::string_view kw) const {
    return cur().kind == TokenKind::Name && cur().text == kw;
  }
  bool at_name() const {
    return cur().kind == TokenKind::Name && !is_keyword(cur().text);
  }
  Position pos() const { return cur().pos; }

  [[noreturn]] void fail(const std::string &message) const {
    throw Failure{message, i_};
  }

  void check_error() const {
    if (at(TokenKind::Error))
      fail(cur().text);
  }

  void expect_op(std::string_view op) {
    check_error();
    if (!at_op(op))
      fail("expected '" + std::string(op) + "'");
    ++i_;
  }
  void expect_kw(std::string_view kw) {
    check_error();
    if (!at_kw(kw))
      fail("expected '" + std::string(kw) + "'");
    ++i_;
  }
  std::string expect_name() {
    check_error();
    if (!at_name())
      fail("expected a name");
    return tokens_[i_++].text;
  }
  bool accept_op(std::string_view op) {
    if (at_op(op)) {
      ++i_;
      return true;
    }
    return false;
  }
  bool accept_kw(std::string_view kw) {
    if (at_kw(kw)) {
      ++i_;
      return true;
    }
    return false;
  }
  void expect_newline() {
    check_error();
    if (!at(TokenKind::Newline))
      fail("invalid syntax");
    ++i_;
  }

  bool can_start_expr() const {
    const Token &t = cur();
    switch (t.kind) {
    case TokenKind::Number:
    case TokenKind::String:
      return true;
    case TokenKind::Name:
      return !is_keyword(t.text) || t.text == "None" || t.text == "True" ||
             t.text == "False" || t.text == "not" || t.text == "lambda" ||
             t.text == "await" || t.text == "yield";
    case TokenKind::Op:
      return t.text == "(" || t.text == "[" || t.text == "{" || t.text == "-" ||
             t.text == "+" || t.text == "~" || t.text == "*" || t.text == "..." ||
             t.text == "**";
    default:
      return false;
    }
  }

  // ---- statements --------------------------------------------------------

  void parse_statement(Suite &out) {
    check_error();
    if (at_op("@") || at_kw("def") || at_kw("class") || at_kw("if") ||
        at_kw("while") || at_kw("for") || at_kw("try") || at_kw("with") ||
        (at_kw("async") && (ahead(1).text == "def" || ahead(1).text == "for" ||
                            ahead(1).text == "with"))) {
      out.push_back(parse_compound());
      return;
    }
    parse_simple_statements(out);
  }

  Suite parse_suite(std::size_t header_line) {
    check_error();
    Suite body;
    if (!at(TokenKind::Newline)) {
      parse_simple_statements(body);
      return body;
    }
    ++i_;
    check_error();
    if (at(TokenKind::Indent)) {
      indents_.push_back(cur().width);
      ++i_;
      while (!at(TokenKind::Dedent) && !at(TokenKind::End)) {
        if (at(TokenKind::Newline)) {
          ++i_;
          continue;
        }
        if (at(TokenKind::Indent))
          fail("unexpected indent");
        parse_statement(body);
      }
      if (at(TokenKind::Dedent))
        ++i_;
      indents_.pop_back();
      return body;
    }
    // A block holding nothing but comments is an empty placeholder body.
    std::size_t next_line = cur().pos.line;
    for (const auto &comment : comments_)
      if (comment.line > header_line && comment.line < next_line &&
          comment.indent > indents_.back())
        return body;
    fail("expected an indented block");
  }

  StmtPtr new_stmt(StmtKind kind, Position p) {
    auto s = std::make_unique<Stmt>();
    s->kind = kind;
    s->pos = p;
    return s;
  }

  StmtPtr parse_compound() {
    Position start = pos();
    if (at_op("@")) {
      std::vector<ExprPtr> decorators;
      while (accept_op("@")) {
        decorators.push_back(parse_namedexpr_test());
        expect_newline();
      }
      check_error();
      if (!(at_kw("def") || at_kw("class") ||
            (at_kw("async") && ahead(1).text == "def")))
        fail("expected a function or class after decorator");
      auto s = parse_compound();
      s->decorators = std::move(decorators);
      s->pos = start;
      return s;
    }
    bool is_async = accept_kw("async");
    if (at_kw("def")) {
      ++i_;
      auto s = new_stmt(StmtKind::FunctionDef, start);
      s->is_async = is_async;
      s->name = expect_name();
      expect_op("(");
      s->params = parse_params(")");
      expect_op(")");
      if (accept_op("->"))
        s->returns = parse_test();
      std::size_t header = cur().pos.line;
      expect_op(":");
      s->body = parse_suite(header);
      return s;
    }
    if (at_kw("for")) {
      ++i_;
      auto s = new_stmt(StmtKind::For, start);
      s->is_async = is_async;
      s->targets.push_back(parse_exprlist());
      check_target(*s->targets.back());
      expect_kw("in");
      s->value = parse_testlist();
      std::size_t header = cur().pos.line;
      expect_op(":");
      s->body = parse_suite(header);
      parse_else(*s);
      return s;
    }
    if (at_kw("with")) {
      ++i_;
      auto s = new_stmt(StmtKind::With, start);
      s->is_async = is_async;
      do {
        WithItem item;
        item.context = parse_test();
        if (accept_kw("as")) {
          item.target = parse_expr();
          check_target(*item.target);
        }
        s->items.push_back(std::move(item));
      } while (accept_op(","));
      std::size_t header = cur().pos.line;
      expect_op(":");
      s->body = parse_suite(header);
      return s;
    }
    if (is_async)
      fail("expected 'def', 'for' or 'with' after 'async'");
    if (accept_kw("class")) {
      auto s = new_stmt(StmtKind::ClassDef, start);
      s->name = expect_name();
      if (accept_op("(")) {
        s->bases = parse_arguments(")");
        expect_op(")");
      }
      std::size_t header = cur().pos.line;
      expect_op(":");
      s->body = parse_suite(header);
      return s;
    }
    if (accept_kw("if")) {
      auto s = new_stmt(StmtKind::If, start);
      s->value = parse_namedexpr_test();
      std::size_t header = cur().pos.line;
      expect_op(":");
      s->body = parse_suite(header);
      Stmt *tail = s.get();
      while (at_kw("elif")) {
        Position elif_pos = pos();
        ++i_;
        auto branch = new_stmt(StmtKind::If, elif_pos);
        branch->value = parse_namedexpr_test();
        std::size_t elif_header = cur().pos.line;
        expect_op(":");
        branch->body = parse_suite(elif_header);
        Stmt *next = branch.get();
        tail->orelse.push_back(std::move(branch));
        tail = next;
      }
      parse_else(*tail);
      return s;
    }
    if (accept_kw("while")) {
      auto s = new_stmt(StmtKind::While, start);
      s->value = parse_namedexpr_test();
      std::size_t header = cur().pos.line;
      expect_op(":");
      s->body = parse_suite(header);
      parse_else(*s);
      return s;
    }
    if (accept_kw("try")) {
      auto s = new_stmt(StmtKind::Try, start);
      std::size_t header = cur().pos.line;
      expect_op(":");
      s->body = parse_suite(header);
      while (at_kw("except")) {
        ExceptHandler handler;
        handler.pos = pos();
        ++i_;
        if (!at_op(":")) {
          handler.type = parse_test();
          if (accept_kw("as"))
            handler.name = expect_name();
        }
        std::size_t handler_header = cur().pos.line;
        expect_op(":");
        handler.body = parse_suite(handler_header);
        s->handlers.push_back(std::move(handler));
      }
      if (!s->handlers.empty())
        parse_else(*s);
      bool has_finally = false;
      if (at_kw("finally")) {
        ++i_;
        has_finally = true;
        std::size_t finally_header = cur().pos.line;
        expect_op(":");
        s->finalbody = parse_suite(finally_header);
      }
      if (s->handlers.empty() && !has_finally)
        fail("expected 'except' or 'finally' block");
      return s;
    }
    fail("invalid syntax");
  }

  void parse_else(Stmt &s) {
    if (at_kw("else")) {
      ++i_;
      std::size_t header = cur().pos.line;
      expect_op(":");
      s.orelse = parse_suite(header);
    }
  }

  std::vector<Param> parse_params(std::string_view close) {
    std::vector<Param> params;
    bool keyword_only = false;
    bool annotations = close == ")";
    while (!at_op(close)) {
      check_error();
      Param p;
      p.pos = pos();
      if (accept_op("/")) {
        if (!accept_op(","))
          if (!at_op(close))
            fail("expected ',' after '/'");
        continue;
      }
      if (accept_op("**")) {
        p.kind = ParamKind::KwArgs;
        p.name = expect_name();
      } else if (accept_op("*")) {
        if (at_op(",") || at_op(close)) {
          keyword_only = true;
          if (!accept_op(","))
            break;
          continue;
        }
        p.kind = ParamKind::VarArgs;
        p.name = expect_name();
        keyword_only = true;
      } else {
        p.kind = keyword_only ? ParamKind::KeywordOnly : ParamKind::Positional;
        p.name = expect_name();
      }
      if (annotations && accept_op(":"))
        p.annotation = parse_test();
      if (accept_op("=")) {
        if (p.kind == ParamKind::VarArgs || p.kind == ParamKind::KwArgs)
          fail("var-positional or var-keyword parameter cannot have a default");
        p.default_value = parse_test();
      }
      params.push_back(std::move(p));
      if (!accept_op(","))
        break;
    }
    return params;
  }

  void parse_simple_statements(Suite &out) {
    while (true) {
      out.push_back(parse_small_statement());
      if (!accept_op(";"))
        break;
      if (at(TokenKind::Newline))
        break;
    }
    expect_newline();
  }

  StmtPtr parse_small_statement() {
    check_error();
    Position start = pos();
    if (accept_kw("pass"))
      return new_stmt(StmtKind::Pass, start);
    if (accept_kw("break"))
      return new_stmt(StmtKind::Break, start);
    if (accept_kw("continue"))
      return new_stmt(StmtKind::Continue, start);
    if (accept_kw("return")) {
      auto s = new_stmt(StmtKind::Return, start);
      if (can_start_expr())
        s->value = parse_testlist_star();
      return s;
    }
    if (accept_kw("raise")) {
      auto s = new_stmt(StmtKind::Raise, start);
      if (can_start_expr()) {
        s->value = parse_test();
        if (accept_kw("from"))
          s->extra = parse_test();
      }
      return s;
    }
    if (at_kw("global") || at_kw("nonlocal")) {
      auto s = new_stmt(at_kw("global") ? StmtKind::Global : StmtKind::Nonlocal,
                        start);
      ++i_;
      do
        s->names.push_back(expect_name());
      while (accept_op(","));
      return s;
    }
    if (accept_kw("del")) {
      auto s = new_stmt(StmtKind::Del, start);
      s->targets.push_back(parse_exprlist());
      return s;
    }
    if (accept_kw("assert")) {
      auto s = new_stmt(StmtKind::Assert, start);
      s->value = parse_test();
      if (accept_op(","))
        s->extra = parse_test();
      return s;
    }
    if (accept_kw("import")) {
      auto s = new_stmt(StmtKind::Import, start);
      do {
        ImportAlias alias;
        alias.pos = pos();
        alias.name = parse_dotted_name();
        if (accept_kw("as"))
          alias.asname = expect_name();
        s->aliases.push_back(std::move(alias));
      } while (accept_op(","));
      return s;
    }
    if (accept_kw("from")) {
      auto s = new_stmt(StmtKind::ImportFrom, start);
      while (at_op(".") || at_op("...")) {
        s->import_level += cur().text.size();
        ++i_;
      }
      if (!at_kw("import"))
        s->name = parse_dotted_name();
      else if (s->import_level == 0)
        fail("expected a module name");
      expect_kw("import");
      if (at_op("*")) {
        ImportAlias alias;
        alias.pos = pos();
        alias.name = "*";
        ++i_;
        s->aliases.push_back(std::move(alias));
        return s;
      }
      bool parenthesized = accept_op("(");
      do {
        if (parenthesized && at_op(")"))
          break;
        ImportAlias alias;
        alias.pos = pos();
        alias.name = expect_name();
        if (accept_kw("as"))
          alias.asname = expect_name();
        s->aliases.push_back(std::move(alias));
      } while (accept_op(","));
      if (parenthesized)
        expect_op(")");
      if (s->aliases.empty())
        fail("expected names to import");
      return s;
    }
    return parse_expression_statement();
  }

  std::string parse_dotted_name() {
    std::string name = expect_name();
    while (accept_op("."))
      name += "." + expect_name();
    return name;
  }

  StmtPtr parse_expression_statement() {
    Position start = pos();
    ExprPtr first = at_kw("yield") ? parse_yield() : parse_testlist_star();
    if (at_op(":") ) {
      ++i_;
      auto s = new_stmt(StmtKind::AnnAssign, start);
      check_target(*first);
      s->annotation = parse_test();
      s->targets.push_back(std::move(first));
      if (accept_op("="))
        s->value = at_kw("yield") ? parse_yield() : parse_testlist_star();
      return s;
    }
    static constexpr std::string_view augmented[] = {
        "+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<=", "&=", "|=",
        "^=", "@="};
    for (auto op : augmented) {
      if (at_op(op)) {
        ++i_;
        auto s = new_stmt(StmtKind::AugAssign, start);
        if (first->kind != ExprKind::Name && first->kind != ExprKind::Attribute &&
            first->kind != ExprKind::Subscript)
          fail("illegal expression for augmented assignment");
        s->name = std::string(op);
        s->targets.push_back(std::move(first));
        s->value = at_kw("yield") ? parse_yield() : parse_testlist();
        return s;
      }
    }
    if (at_op("=")) {
      auto s = new_stmt(StmtKind::Assign, start);
      ExprPtr value = std::move(first);
      while (accept_op("=")) {
        check_target(*value);
        s->targets.push_back(std::move(value));
        value = at_kw("yield") ? parse_yield() : parse_testlist_star();
      }
      s->value = std::move(value);
      return s;
    }
    auto s = new_stmt(StmtKind::Expr, start);
    s->value = std::move(first);
    return s;
  }

  void check_target(const Expr &e) {
    switch (e.kind) {
    case ExprKind::Name:
    case ExprKind::Attribute:
    case ExprKind::Subscript:
      return;
    case ExprKind::Starred:
      check_target(*e.kids[0]);
      return;
    case ExprKind::Tuple:
    case ExprKind::List:
      for (const auto &kid : e.kids)
        check_target(*kid);
      return;
    default:
      throw Failure{"cannot assign to expression", target_index(e)};
    }
  }

  std::size_t target_index(const Expr &e) const {
    for (std::size_t k = 0; k < tokens_.size(); ++k)
      if (tokens_[k].pos.line == e.pos.line && tokens_[k].pos.column == e.pos.column)
        return k;
    return i_;
  }

  // ---- expressions -------------------------------------------------------

  ExprPtr parse_yield() {
    Position start = pos();
    expect_kw("yield");
    auto e = make(ExprKind::Yield, start);
    if (accept_kw("from")) {
      e->text = "from";
      e->kids.push_back(parse_test());
    } else if (can_start_expr()) {
      e->kids.push_back(parse_testlist_star());
    }
    return e;
  }

  ExprPtr parse_testlist_star() {
    Position start = pos();
    auto first = at_op("*") ? parse_star_expr() : parse_test();
    if (!at_op(","))
      return first;
    auto tuple = make(ExprKind::Tuple, start);
    tuple->kids.push_back(std::move(first));
    while (accept_op(",")) {
      if (!can_start_expr())
        break;
      tuple->kids.push_back(at_op("*") ? parse_star_expr() : parse_test());
    }
    return tuple;
  }

  ExprPtr parse_testlist() {
    Position start = pos();
    auto first = parse_test();
    if (!at_op(","))
      return first;
    auto tuple = make(ExprKind::Tuple, start);
    tuple->kids.push_back(std::move(first));
    while (accept_op(",")) {
      if (!can_start_expr())
        break;
      tuple->kids.push_back(parse_test());
    }
    return tuple;
  }

  ExprPtr parse_exprlist() {
    Position start = pos();
    auto first = at_op("*") ? parse_star_expr() : parse_expr();
    if (!at_op(","))
      return first;
    auto tuple = make(ExprKind::Tuple, start);
    tuple->kids.push_back(std::move(first));
    while (accept_op(",")) {
      if (!can_start_expr())
        break;
      tuple->kids.push_back(at_op("*") ? parse_star_expr() : parse_expr());
    }
    return tuple;
  }

  ExprPtr parse_star_expr() {
    Position start = pos();
    expect_op("*");
    auto e = make(ExprKind::Starred, start);
    e->kids.push_back(parse_expr());
    return e;
  }

  ExprPtr parse_namedexpr_test() {
    Position start = pos();
    auto e = parse_test();
    if (at_op(":=")) {
      if (e->kind != ExprKind::Name)
        fail("cannot use assignment expression with this target");
      ++i_;
      auto named = make(ExprKind::NamedExpr, start);
      named->kids.push_back(std::move(e));
      named->kids.push_back(parse_test());
      return named;
    }
    return e;
  }

  ExprPtr parse_test() {
    check_error();
    if (at_kw("lambda"))
      return parse_lambda();
    Position start = pos();
    auto body = parse_or();
    if (at_kw("if")) {
      ++i_;
      auto e = make(ExprKind::IfExp, start);
      auto test = parse_or();
      expect_kw("else");
      auto orelse = parse_test();
      e->kids.push_back(std::move(body));
      e->kids.push_back(std::move(test));
      e->kids.push_back(std::move(orelse));
      return e;
    }
    return body;
  }

  ExprPtr parse_test_nocond() {
    if (at_kw("lambda"))
      return parse_lambda();
    return parse_or();
  }

  ExprPtr parse_lambda() {
    Position start = pos();
    expect_kw("lambda");
    auto e = make(ExprKind::Lambda, start);
    e->params = parse_params(":");
    expect_op(":");
    e->kids.push_back(parse_test());
    return e;
  }

  ExprPtr parse_or() {
    Position start = pos();
    auto left = parse_and();
    if (!at_kw("or"))
      return left;
    auto e = make(ExprKind::BoolOp, start, "or");
    e->kids.push_back(std::move(left));
    while (accept_kw("or"))
      e->kids.push_back(parse_and());
    return e;
  }

  ExprPtr parse_and() {
    Position start = pos();
    auto left = parse_not();
    if (!at_kw("and"))
      return left;
    auto e = make(ExprKind::BoolOp, start, "and");
    e->kids.push_back(std::move(left));
    while (accept_kw("and"))
      e->kids.push_back(parse_not());
    return e;
  }

  ExprPtr parse_not() {
    Position start = pos();
    if (accept_kw("not")) {
      auto e = make(ExprKind::Not, start);
      e->kids.push_back(parse_not());
      return e;
    }
    return parse_comparison();
  }

  bool at_comparison() const {
    if (cur().kind == TokenKind::Op) {
      const auto &t = cur().text;
      return t == "<" || t == ">" || t == "==" || t == ">=" || t == "<=" ||
             t == "!=";
    }
    return at_kw("in") || at_kw("is") ||
           (at_kw("not") && ahead(1).kind == TokenKind::Name &&
            ahead(1).text == "in");
  }

  ExprPtr parse_comparison() {
    Position start = pos();
    auto left = parse_expr();
    if (!at_comparison())
      return left;
    auto e = make(ExprKind::Compare, start);
    e->kids.push_back(std::move(left));
    while (at_comparison()) {
      if (accept_kw("not")) {
        expect_kw("in");
      } else if (accept_kw("is")) {
        accept_kw("not");
      } else {
        ++i_;
      }
      e->kids.push_back(parse_expr());
    }
    return e;
  }

  ExprPtr parse_binary(int level) {
    static const std::vector<std::vector<std::string_view>> levels = {
        {"|"}, {"^"}, {"&"}, {"<<", ">>"}, {"+", "-"}, {"*", "@", "/", "%", "//"}};
    if (level == static_cast<int>(levels.size()))
      return parse_factor();
    Position start = pos();
    auto left = parse_binary(level + 1);
    while (cur().kind == TokenKind::Op &&
           std::find(levels[level].begin(), levels[level].end(), cur().text) !=
               levels[level].end()) {
      auto e = make(ExprKind::Operation, start, cur().text);
      ++i_;
      e->kids.push_back(std::move(left));
      e->kids.push_back(parse_binary(level + 1));
      left = std::move(e);
    }
    return left;
  }

  ExprPtr parse_expr() { return parse_binary(0); }

  ExprPtr parse_factor() {
    Position start = pos();
    if (at_op("+") || at_op("-") || at_op("~")) {
      auto e = make(ExprKind::Operation, start, cur().text);
      ++i_;
      e->kids.push_back(parse_factor());
      return e;
    }
    return parse_power();
  }

  ExprPtr parse_power() {
    Position start = pos();
    ExprPtr base;
    if (accept_kw("await")) {
      base = make(ExprKind::Await, start);
      base->kids.push_back(parse_trailers(parse_atom()));
    } else {
      base = parse_trailers(parse_atom());
    }
    if (at_op("**")) {
      ++i_;
      auto e = make(ExprKind::Operation, start, "**");
      e->kids.push_back(std::move(base));
      e->kids.push_back(parse_factor());
      return e;
    }
    return base;
  }

  ExprPtr parse_trailers(ExprPtr e) {
    while (true) {
      Position p = pos();
      if (accept_op("(")) {
        auto call = make(ExprKind::Call, e->pos);
        call->kids.push_back(std::move(e));
        for (auto &arg : parse_arguments(")"))
          call->kids.push_back(std::move(arg));
        expect_op(")");
        e = std::move(call);
      } else if (accept_op("[")) {
        auto sub = make(ExprKind::Subscript, e->pos);
        sub->kids.push_back(std::move(e));
        sub->kids.push_back(parse_subscripts());
        expect_op("]");
        e = std::move(sub);
      } else if (accept_op(".")) {
        auto attr = make(ExprKind::Attribute, p);
        attr->text = expect_name();
        attr->kids.push_back(std::move(e));
        e = std::move(attr);
      } else {
        return e;
      }
    }
  }

  std::vector<ExprPtr> parse_arguments(std::string_view close) {
    std::vector<ExprPtr> args;
    while (!at_op(close)) {
      check_error();
      Position start = pos();
      if (accept_op("**")) {
        auto e = make(ExprKind::DoubleStarred, start);
        e->kids.push_back(parse_test());
        args.push_back(std::move(e));
      } else if (accept_op("*")) {
        auto e = make(ExprKind::Starred, start);
        e->kids.push_back(parse_test());
        args.push_back(std::move(e));
      } else {
        auto value = parse_test();
        if (at_op("=")) {
          if (value->kind != ExprKind::Name)
            fail("expression cannot contain assignment");
          ++i_;
          auto kw = make(ExprKind::Keyword, start, value->text);
          kw->kids.push_back(parse_test());
          args.push_back(std::move(kw));
        } else if (at_op(":=")) {
          if (value->kind != ExprKind::Name)
            fail("cannot use assignment expression with this target");
          ++i_;
          auto named = make(ExprKind::NamedExpr, start);
          named->kids.push_back(std::move(value));
          named->kids.push_back(parse_test());
          args.push_back(std::move(named));
        } else if (at_kw("for") || (at_kw("async") && ahead(1).text == "for")) {
          args.push_back(parse_comprehension(std::move(value), "generator", start));
        } else {
          args.push_back(std::move(value));
        }
      }
      if (!accept_op(","))
        break;
    }
    return args;
  }

  ExprPtr parse_subscripts() {
    Position start = pos();
    auto first = parse_subscript();
    if (!at_op(","))
      return first;
    auto tuple = make(ExprKind::Tuple, start);
    tuple->kids.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_op("]"))
        break;
      tuple->kids.push_back(parse_subscript());
    }
    return tuple;
  }

  ExprPtr parse_subscript() {
    Position start = pos();
    ExprPtr lower;
    if (!at_op(":"))
      lower = at_op("*") ? parse_star_expr() : parse_namedexpr_test();
    if (!at_op(":"))
      return lower;
    auto slice = make(ExprKind::Slice, start);
    if (lower)
      slice->kids.push_back(std::move(lower));
    while (accept_op(":")) {
      if (!at_op(":") && !at_op("]") && !at_op(","))
        slice->kids.push_back(parse_test());
    }
    return slice;
  }

  ExprPtr parse_comprehension(ExprPtr element, std::string kind, Position start) {
    auto comp = make(ExprKind::Comprehension, start, std::move(kind));
    comp->kids.push_back(std::move(element));
    while (at_kw("for") || (at_kw("async") && ahead(1).text == "for")) {
      ComprehensionClause clause;
      clause.is_async = accept_kw("async");
      expect_kw("for");
      clause.target = parse_exprlist();
      check_target(*clause.target);
      expect_kw("in");
      clause.iter = parse_or();
      while (accept_kw("if"))
        clause.conditions.push_back(parse_test_nocond());
      comp->clauses.push_back(std::move(clause));
    }
    return comp;
  }

  ExprPtr parse_atom() {
    check_error();
    const Token &t = cur();
    Position start = t.pos;
    switch (t.kind) {
    case TokenKind::Number:
      ++i_;
      return make(ExprKind::Constant, start, t.text);
    case TokenKind::String:
      return parse_strings();
    case TokenKind::Name:
      if (t.text == "None" || t.text == "True" || t.text == "False") {
        ++i_;
        return make(ExprKind::Constant, start, t.text);
      }
      if (is_keyword(t.text))
        fail("invalid syntax");
      ++i_;
      return make(ExprKind::Name, start, t.text);
    case TokenKind::Op:
      if (t.text == "...") {
        ++i_;
        return make(ExprKind::Constant, start, "...");
      }
      if (t.text == "(")
        return parse_paren();
      if (t.text == "[")
        return parse_list();
      if (t.text == "{")
        return parse_brace();
      fail("invalid syntax");
    default:
      fail(t.kind == TokenKind::Indent ? "unexpected indent" : "invalid syntax");
    }
  }

  ExprPtr parse_paren() {
    Position start = pos();
    expect_op("(");
    if (accept_op(")"))
      return make(ExprKind::Tuple, start);
    if (at_kw("yield")) {
      auto y = parse_yield();
      expect_op(")");
      return y;
    }
    auto first = at_op("*") ? parse_star_expr() : parse_namedexpr_test();
    if (at_kw("for") || (at_kw("async") && ahead(1).text == "for")) {
      auto comp = parse_comprehension(std::move(first), "generator", start);
      expect_op(")");
      return comp;
    }
    if (!at_op(",")) {
      expect_op(")");
      return first;
    }
    auto tuple = make(ExprKind::Tuple, start);
    tuple->kids.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_op(")"))
        break;
      tuple->kids.push_back(at_op("*") ? parse_star_expr() : parse_namedexpr_test());
    }
    expect_op(")");
    return tuple;
  }

  ExprPtr parse_list() {
    Position start = pos();
    expect_op("[");
    auto list = make(ExprKind::List, start);
    if (accept_op("]"))
      return list;
    auto first = at_op("*") ? parse_star_expr() : parse_namedexpr_test();
    if (at_kw("for") || (at_kw("async") && ahead(1).text == "for")) {
      auto comp = parse_comprehension(std::move(first), "list", start);
      expect_op("]");
      return comp;
    }
    list->kids.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_op("]"))
        break;
      list->kids.push_back(at_op("*") ? parse_star_expr() : parse_namedexpr_test());
    }
    expect_op("]");
    return list;
  }

  ExprPtr parse_brace() {
    Position start = pos();
    expect_op("{");
    if (accept_op("}"))
      return make(ExprKind::Dict, start);
    auto parse_dict_entry = [&](Expr &dict) {
      if (at_op("**")) {
        Position p = pos();
        ++i_;
        auto spread = make(ExprKind::DoubleStarred, p);
        spread->kids.push_back(parse_expr());
        dict.kids.push_back(std::move(spread));
        return;
      }
      dict.kids.push_back(parse_test());
      expect_op(":");
      dict.kids.push_back(parse_test());
    };
    if (at_op("**")) {
      auto dict = make(ExprKind::Dict, start);
      parse_dict_entry(*dict);
      while (accept_op(",") && !at_op("}"))
        parse_dict_entry(*dict);
      expect_op("}");
      return dict;
    }
    auto first = at_op("*") ? parse_star_expr() : parse_namedexpr_test();
    if (accept_op(":")) {
      auto value = parse_test();
      if (at_kw("for") || (at_kw("async") && ahead(1).text == "for")) {
        auto comp = parse_comprehension(std::move(first), "dict", start);
        comp->kids.push_back(std::move(value));
        expect_op("}");
        return comp;
      }
      auto dict = make(ExprKind::Dict, start);
      dict->kids.push_back(std::move(first));
      dict->kids.push_back(std::move(value));
      while (accept_op(",") && !at_op("}"))
        parse_dict_entry(*dict);
      expect_op("}");
      return dict;
    }
    if (at_kw("for") || (at_kw("async") && ahead(1).text == "for")) {
      auto comp = parse_comprehension(std::move(first), "set", start);
      expect_op("}");
      return comp;
    }
    auto set = make(ExprKind::Set, start);
    set->kids.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_op("}"))
        break;
      set->kids.push_back(at_op("*") ? parse_star_expr() : parse_namedexpr_test());
    }
    expect_op("}");
    return set;
  }

  ExprPtr parse_strings() {
    Position start = pos();
    auto e = make(ExprKind::String, start);
    while (at(TokenKind::String)) {
      const Token &t = cur();
      e->text += t.text;
      parse_fstring_fields(t, *e);
      ++i_;
    }
    return e;
  }

  void parse_fstring_fields(const Token &t, Expr &out);

  const std::vector<Token> &tokens_;
  const std::vector<CommentLine> &comments_;
  std::size_t line_offset_ = 0;
  std::size_t i_ = 0;
  std::vector<std::size_t> indents_;
};

// Replacement fields of an f-string are parsed as standalone expressions so
// that names inside them take part in reference resolution.
void Parser::parse_fstring_fields(const Token &t, Expr &out) {
  std::size_t quote = t.text.find_first_of("'\"");
  std::string prefix = t.text.substr(0, quote);
  if (prefix.find('f') == std::string::npos && prefix.find('F') == std::string::npos)
    return;
  std::size_t quote_len =
      t.text.compare(quote, 3, std::string(3, t.text[quote])) == 0 ? 3 : 1;
  std::string body = t.text.substr(quote + quote_len,
                                   t.text.size() - quote - 2 * quote_len);
  std::size_t k = 0;
  while (k < body.size()) {
    if (body[k] == '{' && k + 1 < body.size() && body[k + 1] == '{') {
      k += 2;
      continue;
    }
    if (body[k] != '{') {
      ++k;
      continue;
    }
    std::size_t depth = 0;
    std::size_t begin = k + 1;
    std::size_t end = begin;
    char in_quote = 0;
    for (; end < body.size(); ++end) {
      char c = body[end];
      if (in_quote) {
        if (c == in_quote)
          in_quote = 0;
        continue;
      }
      if (c == '\'' || c == '"') {
        in_quote = c;
      } else if (c == '(' || c == '[' || c == '{') {
        ++depth;
      } else if (c == ')' || c == ']' || (c == '}' && depth > 0)) {
        --depth;
      } else if (depth == 0 && (c == '}' || c == '!' || c == ':')) {
        if (c == '!' && end + 1 < body.size() && body[end + 1] == '=')
          continue;
        break;
      }
    }
    std::string field = body.substr(begin, end - begin);
    while (!field.empty() && (field.back() == '=' || std::isspace(static_cast<unsigned char>(field.back()))))
      field.pop_back();
    auto sub_tokens = tokenize("(" + field + ")");
    Parser sub(sub_tokens);
    try {
      out.kids.push_back(sub.parse_standalone_expression());
    } catch (const Failure &) {
      fail("f-string: invalid expression");
    }
    reposition(*out.kids.back(), t.pos);
    // Skip to the closing brace of this field.
    std::size_t nest = 0;
    k = end;
    for (; k < body.size(); ++k) {
      if (body[k] == '{')
        ++nest;
      else if (body[k] == '}') {
        if (nest == 0)
          break;
        --nest;
      }
    }
    ++k;
  }
}

} // namespace

ParseResult parse(std::string_view source) {
  auto stream = tokenize(source);
  Parser parser(stream);
  ParseResult result;
  try {
    result.module = parser.parse_file();
  } catch (const Failure &f) {
    result.failure = parser.describe(f);
  }
  return result;
}

} // namespace halbench::guest
