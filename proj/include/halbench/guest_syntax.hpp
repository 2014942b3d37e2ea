#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

/// Lexer, parser and syntax tree for the guest language, a Python 3 subset
/// (no `match` statements, no type-parameter syntax). Suites consisting only
/// of comments are accepted as empty placeholder bodies.
namespace halbench::guest {

struct Position {
  std::size_t line = 0;
  std::size_t column = 0;
};

enum class TokenKind { Name, Number, String, Op, Newline, Indent, Dedent, End, Error };

struct Token {
  TokenKind kind = TokenKind::End;
  std::string text;
  Position pos;
  /// Indentation width for Indent tokens.
  std::size_t width = 0;
  /// Synthesized when input ended without the construct being closed.
  bool at_eof = false;
  /// For Error tokens: the failure is an unterminated construct at end of input.
  bool incomplete = false;
};

struct CommentLine {
  std::size_t line = 0;
  std::size_t indent = 0;
};

struct TokenStream {
  std::vector<Token> tokens;
  std::vector<CommentLine> comment_lines;
};

TokenStream tokenize(std::string_view source);

struct Expr;
struct Stmt;
using ExprPtr = std::unique_ptr<Expr>;
using StmtPtr = std::unique_ptr<Stmt>;
using Suite = std::vector<StmtPtr>;

enum class ExprKind {
  Name,
  Attribute,  // kids[0].text
  Call,       // kids[0](kids[1..])
  Subscript,  // kids[0][kids[1]]
  Constant,   // numbers, None, True, False, ...
  String,     // kids hold f-string replacement fields
  Operation,  // binary and unary arithmetic, text = operator
  BoolOp,
  Compare,
  Not,
  Lambda,
  IfExp,      // kids: body, test, orelse
  Await,
  Yield,
  Tuple,
  List,
  Set,
  Dict,       // alternating key/value; DoubleStarred for **spread
  Comprehension, // text = "list" | "set" | "dict" | "generator"
  Starred,
  DoubleStarred,
  Keyword,    // call argument name=value
  NamedExpr,  // kids: target Name, value
  Slice,
};

enum class ParamKind { Positional, VarArgs, KeywordOnly, KwArgs };

struct Param {
  std::string name;
  ParamKind kind = ParamKind::Positional;
  ExprPtr annotation;
  ExprPtr default_value;
  Position pos;
};

struct ComprehensionClause {
  ExprPtr target;
  ExprPtr iter;
  std::vector<ExprPtr> conditions;
  bool is_async = false;
};

struct Expr {
  ExprKind kind = ExprKind::Constant;
  std::string text;
  std::vector<ExprPtr> kids;
  std::vector<Param> params;
  std::vector<ComprehensionClause> clauses;
  Position pos;
};

enum class StmtKind {
  Expr,
  Assign,
  AugAssign,
  AnnAssign,
  Import,
  ImportFrom,
  FunctionDef,
  ClassDef,
  If,
  While,
  For,
  Try,
  With,
  Return,
  Pass,
  Break,
  Continue,
  Raise,
  Global,
  Nonlocal,
  Del,
  Assert,
};

struct ImportAlias {
  std::string name;
  std::optional<std::string> asname;
  Position pos;
};

struct ExceptHandler {
  ExprPtr type;
  std::optional<std::string> name;
  Suite body;
  Position pos;
};

struct WithItem {
  ExprPtr context;
  ExprPtr target;
};

struct Stmt {
  StmtKind kind = StmtKind::Pass;
  Position pos;
  std::string name;                 // def/class name, import module, aug op
  std::size_t import_level = 0;     // leading dots of a relative import
  std::vector<ImportAlias> aliases; // import names
  std::vector<std::string> names;   // global / nonlocal
  std::vector<ExprPtr> targets;     // assignment / for / del targets
  ExprPtr value;                    // rhs, test, iterator, return value
  ExprPtr annotation;
  ExprPtr extra;                    // raise cause, assert message
  std::vector<Param> params;
  std::vector<ExprPtr> bases;       // class bases and keywords
  std::vector<ExprPtr> decorators;
  ExprPtr returns;
  std::vector<WithItem> items;
  std::vector<ExceptHandler> handlers;
  Suite body;
  Suite orelse;
  Suite finalbody;
  bool is_async = false;
};

struct Module {
  Suite body;
};

struct SyntaxFailure {
  std::string message;
  Position pos;
  /// Input ended inside an open block, bracket or string.
  bool incomplete = false;
};

struct ParseResult {
  std::optional<Module> module;
  std::optional<SyntaxFailure> failure;
};

ParseResult parse(std::string_view source);

bool is_keyword(std::string_view word);

} // namespace halbench::guest
