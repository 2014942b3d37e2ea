#include "halbench/guest_syntax.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <string>

namespace halbench::guest {

bool is_keyword(std::string_view word) {
  static constexpr std::array<std::string_view, 35> keywords = {
      "False",  "None",     "True",   "and",   "as",     "assert", "async",
      "await",  "break",    "class",  "continue", "def", "del",    "elif",
      "else",   "except",   "finally", "for",  "from",   "global", "if",
      "import", "in",       "is",     "lambda", "nonlocal", "not", "or",
      "pass",   "raise",    "return", "try",   "while",  "with",   "yield"};
  return std::find(keywords.begin(), keywords.end(), word) != keywords.end();
}

namespace {

constexpr std::array<std::string_view, 47> kOperators = {
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "==", "!=", "<=", ">=",
    "**",  "//",  "<<",  ">>",  "+=",  "-=", "*=", "/=", "%=", "&=", "|=",
    "^=",  "@=",  "+",   "-",   "*",   "/",  "%",  "@",  "&",  "|",  "^",
    "~",   "<",   ">",   "(",   ")",   "[",  "]",  "{",  "}",  ",",  ":",
    ".",   ";",   "="};

bool is_ident_start(unsigned char c) {
  return std::isalpha(c) || c == '_' || c >= 0x80;
}
bool is_ident_char(unsigned char c) {
  return std::isalnum(c) || c == '_' || c >= 0x80;
}

bool is_string_prefix(std::string word) {
  std::transform(word.begin(), word.end(), word.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return word == "r" || word == "u" || word == "b" || word == "f" ||
         word == "br" || word == "rb" || word == "fr" || word == "rf";
}

class Lexer {
public:
  explicit Lexer(std::string_view src) : src_(src) {}

  TokenStream run() {
    indents_.push_back(0);
    while (!failed_ && i_ < src_.size()) {
      if (line_start_ && brackets_.empty()) {
        handle_line_start();
        continue;
      }
      step();
    }
    if (!failed_)
      finish();
    return std::move(out_);
  }

private:
  char peek(std::size_t ahead = 0) const {
    return i_ + ahead < src_.size() ? src_[i_ + ahead] : '\0';
  }

  void advance(std::size_t n = 1) {
    for (std::size_t k = 0; k < n && i_ < src_.size(); ++k) {
      if (src_[i_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++i_;
    }
  }

  void emit(TokenKind kind, std::string text, Position pos) {
    Token t;
    t.kind = kind;
    t.text = std::move(text);
    t.pos = pos;
    out_.tokens.push_back(std::move(t));
  }

  void fail(const std::string &message, Position pos, bool incomplete) {
    Token t;
    t.kind = TokenKind::Error;
    t.text = message;
    t.pos = pos;
    t.incomplete = incomplete;
    out_.tokens.push_back(std::move(t));
    Token end;
    end.kind = TokenKind::End;
    end.pos = pos;
    end.at_eof = true;
    out_.tokens.push_back(std::move(end));
    failed_ = true;
  }

  void handle_line_start() {
    std::size_t width = 0;
    while (i_ < src_.size()) {
      char c = peek();
      if (c == ' ') {
        ++width;
      } else if (c == '\t') {
        width = (width / 8 + 1) * 8;
      } else if (c == '\f') {
        width = 0;
      } else {
        break;
      }
      advance();
    }
    char c = peek();
    if (i_ >= src_.size())
      return;
    if (c == '\n' || c == '\r') {
      advance();
      return;
    }
    if (c == '#') {
      out_.comment_lines.push_back({line_, width});
      while (i_ < src_.size() && peek() != '\n')
        advance();
      return;
    }
    if (c == '\\' && (peek(1) == '\n' || (peek(1) == '\r' && peek(2) == '\n'))) {
      advance(peek(1) == '\r' ? 3 : 2);
      return;
    }
    line_start_ = false;
    Position pos{line_, col_};
    if (width > indents_.back()) {
      indents_.push_back(width);
      Token t;
      t.kind = TokenKind::Indent;
      t.pos = pos;
      t.width = width;
      out_.tokens.push_back(std::move(t));
    } else {
      while (width < indents_.back()) {
        indents_.pop_back();
        emit(TokenKind::Dedent, "", pos);
      }
      if (width != indents_.back())
        fail("unindent does not match any outer indentation level", pos, false);
    }
  }

  void step() {
    char c = peek();
    Position pos{line_, col_};
    if (c == ' ' || c == '\t' || c == '\f' || c == '\r') {
      advance();
      return;
    }
    if (c == '\n') {
      advance();
      if (brackets_.empty()) {
        emit(TokenKind::Newline, "\n", pos);
        line_start_ = true;
      }
      return;
    }
    if (c == '#') {
      while (i_ < src_.size() && peek() != '\n')
        advance();
      return;
    }
    if (c == '\\') {
      if (peek(1) == '\n') {
        advance(2);
        return;
      }
      if (peek(1) == '\r' && peek(2) == '\n') {
        advance(3);
        return;
      }
      if (i_ + 1 >= src_.size()) {
        fail("unexpected end of input after line continuation", pos, true);
        return;
      }
      fail("unexpected character after line continuation", pos, false);
      return;
    }
    if (is_ident_start(static_cast<unsigned char>(c))) {
      std::size_t start = i_;
      while (i_ < src_.size() && is_ident_char(static_cast<unsigned char>(peek())))
        advance();
      std::string word(src_.substr(start, i_ - start));
      if ((peek() == '\'' || peek() == '"') && is_string_prefix(word)) {
        lex_string(start, pos);
        return;
      }
      emit(TokenKind::Name, std::move(word), pos);
      return;
    }
    if (c == '\'' || c == '"') {
      lex_string(i_, pos);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      lex_number(pos);
      return;
    }
    for (auto op : kOperators) {
      if (src_.substr(i_, op.size()) == op) {
        advance(op.size());
        if (op == "(" || op == "[" || op == "{") {
          brackets_.push_back(op[0]);
        } else if (op == ")" || op == "]" || op == "}") {
          char open = op == ")" ? '(' : op == "]" ? '[' : '{';
          if (brackets_.empty() || brackets_.back() != open) {
            fail("unmatched '" + std::string(op) + "'", pos, false);
            return;
          }
          brackets_.pop_back();
        }
        emit(TokenKind::Op, std::string(op), pos);
        return;
      }
    }
    fail(std::string("invalid character '") + c + "'", pos, false);
  }

  void lex_string(std::size_t start, Position pos) {
    char quote = peek();
    bool triple = peek(1) == quote && peek(2) == quote;
    advance(triple ? 3 : 1);
    while (true) {
      if (i_ >= src_.size()) {
        fail(triple ? "unterminated triple-quoted string literal"
                    : "unterminated string literal",
             pos, true);
        return;
      }
      char c = peek();
      if (c == '\\') {
        advance(2);
        continue;
      }
      if (!triple && c == '\n') {
        fail("unterminated string literal", pos, false);
        return;
      }
      if (c == quote) {
        if (!triple) {
          advance();
          break;
        }
        if (peek(1) == quote && peek(2) == quote) {
          advance(3);
          break;
        }
      }
      advance();
    }
    emit(TokenKind::String, std::string(src_.substr(start, i_ - start)), pos);
  }

  void lex_number(Position pos) {
    std::size_t start = i_;
    bool hex = peek() == '0' && (peek(1) == 'x' || peek(1) == 'X');
    while (i_ < src_.size()) {
      char c = peek();
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
        bool exponent = !hex && (c == 'e' || c == 'E');
        advance();
        if (exponent && (peek() == '+' || peek() == '-'))
          advance();
        continue;
      }
      break;
    }
    emit(TokenKind::Number, std::string(src_.substr(start, i_ - start)), pos);
  }

  void finish() {
    Position pos{line_, col_};
    auto push_eof = [&](TokenKind kind) {
      Token t;
      t.kind = kind;
      t.pos = pos;
      t.at_eof = true;
      out_.tokens.push_back(std::move(t));
    };
    if (!out_.tokens.empty() && out_.tokens.back().kind != TokenKind::Newline &&
        out_.tokens.back().kind != TokenKind::Dedent)
      push_eof(TokenKind::Newline);
    while (indents_.size() > 1) {
      indents_.pop_back();
      push_eof(TokenKind::Dedent);
    }
    push_eof(TokenKind::End);
  }

  std::string_view src_;
  std::size_t i_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
  bool line_start_ = true;
  bool failed_ = false;
  std::vector<std::size_t> indents_;
  std::vector<char> brackets_;
  TokenStream out_;
};

} // namespace

TokenStream tokenize(std::string_view source) { return Lexer(source).run(); }

} // namespace halbench::guest
