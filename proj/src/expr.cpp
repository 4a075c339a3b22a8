#include "finsler_forge/expr.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>

namespace finsler {
namespace {

enum class Tok { number, ident, plus, minus, star, slash, caret, lparen, rparen, end };

struct Token {
  Tok kind = Tok::end;
  double num = 0.0;
  std::string text;
  int line = 1;
  int col = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& s) : s_(s) { advance(); }

  const Token& peek() const { return cur_; }
  Token take() {
    Token t = cur_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r' ||
                                s_[pos_] == '\n')) {
      if (s_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
    cur_.line = line_;
    cur_.col = col_;
    cur_.text.clear();
    if (pos_ >= s_.size()) {
      cur_.kind = Tok::end;
      return;
    }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && pos_ + 1 < s_.size() &&
         std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])))) {
      char* endp = nullptr;
      cur_.num = std::strtod(s_.c_str() + pos_, &endp);
      const std::size_t len = static_cast<std::size_t>(endp - (s_.c_str() + pos_));
      consume(len);
      cur_.kind = Tok::number;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t e = pos_;
      while (e < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[e])) || s_[e] == '_'))
        ++e;
      cur_.text = s_.substr(pos_, e - pos_);
      consume(e - pos_);
      cur_.kind = Tok::ident;
      return;
    }
    // typeset operator glyphs
    if (starts("\xe2\x88\x92")) {  // minus sign
      consume(3);
      cur_.kind = Tok::minus;
      return;
    }
    if (starts("\xc3\x97")) {  // multiplication sign
      consume(2);
      cur_.kind = Tok::star;
      return;
    }
    if (starts("\xc3\xb7")) {  // division sign
      consume(2);
      cur_.kind = Tok::slash;
      return;
    }
    switch (c) {
      case '+': cur_.kind = Tok::plus; break;
      case '-': cur_.kind = Tok::minus; break;
      case '*': cur_.kind = Tok::star; break;
      case '/': cur_.kind = Tok::slash; break;
      case '^': cur_.kind = Tok::caret; break;
      case '(': cur_.kind = Tok::lparen; break;
      case ')': cur_.kind = Tok::rparen; break;
      default:
        throw ExprError(std::string("unexpected character '") + c + "'", line_, col_);
    }
    consume(1);
  }

  bool starts(const char* pat) const { return s_.compare(pos_, std::strlen(pat), pat) == 0; }
  void consume(std::size_t k) {
    pos_ += k;
    col_ += static_cast<int>(k);
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  Token cur_;
};

enum class Fn { sin, cos, exp, log, sqrt, sech };

struct Node {
  enum Kind { number, coord, add, sub, mul, divide, power, neg, call } kind = number;
  double value = 0.0;
  int index = 0;
  Fn fn = Fn::sin;
  std::unique_ptr<Node> a, b;
};

class Parser {
 public:
  Parser(const std::string& text, const std::vector<std::string>& coords)
      : lex_(text), coords_(coords) {}

  std::unique_ptr<Node> parse() {
    auto e = expr();
    const Token& t = lex_.peek();
    if (t.kind != Tok::end)
      throw ExprError("unexpected trailing input", t.line, t.col);
    return e;
  }

 private:
  std::unique_ptr<Node> expr() {
    auto e = term();
    while (lex_.peek().kind == Tok::plus || lex_.peek().kind == Tok::minus) {
      const Tok op = lex_.take().kind;
      auto n = std::make_unique<Node>();
      n->kind = (op == Tok::plus) ? Node::add : Node::sub;
      n->a = std::move(e);
      n->b = term();
      e = std::move(n);
    }
    return e;
  }

  std::unique_ptr<Node> term() {
    auto e = unary();
    while (lex_.peek().kind == Tok::star || lex_.peek().kind == Tok::slash) {
      const Tok op = lex_.take().kind;
      auto n = std::make_unique<Node>();
      n->kind = (op == Tok::star) ? Node::mul : Node::divide;
      n->a = std::move(e);
      n->b = unary();
      e = std::move(n);
    }
    return e;
  }

  std::unique_ptr<Node> unary() {
    if (lex_.peek().kind == Tok::minus) {
      lex_.take();
      auto n = std::make_unique<Node>();
      n->kind = Node::neg;
      n->a = unary();
      return n;
    }
    return factor();
  }

  // right-associative exponentiation
  std::unique_ptr<Node> factor() {
    auto base = primary();
    if (lex_.peek().kind == Tok::caret) {
      lex_.take();
      auto n = std::make_unique<Node>();
      n->kind = Node::power;
      n->a = std::move(base);
      n->b = unary();
      return n;
    }
    return base;
  }

  std::unique_ptr<Node> primary() {
    const Token t = lex_.take();
    switch (t.kind) {
      case Tok::number: {
        auto n = std::make_unique<Node>();
        n->kind = Node::number;
        n->value = t.num;
        return n;
      }
      case Tok::lparen: {
        auto e = expr();
        expect(Tok::rparen, "expected ')'");
        return e;
      }
      case Tok::ident: {
        for (std::size_t i = 0; i < coords_.size(); ++i)
          if (coords_[i] == t.text) {
            auto n = std::make_unique<Node>();
            n->kind = Node::coord;
            n->index = static_cast<int>(i);
            return n;
          }
        Fn fn;
        if (t.text == "sin") fn = Fn::sin;
        else if (t.text == "cos") fn = Fn::cos;
        else if (t.text == "exp") fn = Fn::exp;
        else if (t.text == "log") fn = Fn::log;
        else if (t.text == "sqrt") fn = Fn::sqrt;
        else if (t.text == "sech") fn = Fn::sech;
        else
          throw ExprError("unknown identifier '" + t.text + "'", t.line, t.col);
        expect(Tok::lparen, "expected '(' after function name");
        auto arg = expr();
        expect(Tok::rparen, "expected ')' closing function argument");
        auto n = std::make_unique<Node>();
        n->kind = Node::call;
        n->fn = fn;
        n->a = std::move(arg);
        return n;
      }
      case Tok::end:
        throw ExprError("unexpected end of expression", t.line, t.col);
      default:
        throw ExprError("unexpected token", t.line, t.col);
    }
  }

  void expect(Tok k, const char* msg) {
    const Token& t = lex_.peek();
    if (t.kind != k) throw ExprError(msg, t.line, t.col);
    lex_.take();
  }

  Lexer lex_;
  const std::vector<std::string>& coords_;
};

template <class T>
T eval(const Node& n, std::span<const T> u) {
  switch (n.kind) {
    case Node::number: return T(n.value);
    case Node::coord: return u[static_cast<std::size_t>(n.index)];
    case Node::add: return eval(*n.a, u) + eval(*n.b, u);
    case Node::sub: return eval(*n.a, u) - eval(*n.b, u);
    case Node::mul: return eval(*n.a, u) * eval(*n.b, u);
    case Node::divide: return eval(*n.a, u) / eval(*n.b, u);
    case Node::neg: return -eval(*n.a, u);
    case Node::power: {
      // integer literal exponents by repeated multiplication so negative
      // bases stay differentiable
      if (n.b->kind == Node::number && n.b->value == std::floor(n.b->value) &&
          std::abs(n.b->value) <= 64.0) {
        const int p = static_cast<int>(n.b->value);
        const T base = eval(*n.a, u);
        T r(1.0);
        for (int k = 0; k < std::abs(p); ++k) r = r * base;
        return p >= 0 ? r : T(1.0) / r;
      }
      return pow(eval(*n.a, u), eval(*n.b, u));
    }
    case Node::call: {
      const T x = eval(*n.a, u);
      switch (n.fn) {
        case Fn::sin: return sin(x);
        case Fn::cos: return cos(x);
        case Fn::exp: return exp(x);
        case Fn::log: return log(x);
        case Fn::sqrt: return sqrt(x);
        case Fn::sech: return sech(x);
      }
    }
  }
  return T(0.0);
}

}  // namespace

ScalarField parse_expression(const std::string& text,
                             const std::vector<std::string>& coords) {
  Parser p(text, coords);
  std::shared_ptr<const Node> root = p.parse();
  return make_field(static_cast<int>(coords.size()),
                    [root](auto u) { return eval(*root, u); });
}

}  // namespace finsler
