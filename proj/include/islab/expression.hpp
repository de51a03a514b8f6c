#pragma once

// Minimal arithmetic expression evaluator for vector-field component strings,
// e.g. "-sin(2*pi*y)" or "1 - 0.5*tanh(x0)".  Variables are x0..x{n-1} with
// x,y,z accepted as aliases for the first three coordinates.

#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "islab/errors.hpp"
#include "islab/geometry.hpp"

namespace islab {

class Expression {
 public:
  // Parses `text` over an n-dimensional variable space.  Throws ConfigError
  // with a character position on malformed input or unknown identifiers.
  Expression(const std::string& text, int dim) : text_(text), dim_(dim) {
    pos_ = 0;
    root_ = parse_sum();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
  }

  double eval(const Vec& x) const { return root_->eval(x); }
  const std::string& text() const { return text_; }

 private:
  struct Node {
    virtual ~Node() = default;
    virtual double eval(const Vec& x) const = 0;
  };
  using NodePtr = std::unique_ptr<Node>;

  struct Const : Node {
    double v;
    explicit Const(double v) : v(v) {}
    double eval(const Vec&) const override { return v; }
  };
  struct Var : Node {
    int idx;
    explicit Var(int idx) : idx(idx) {}
    double eval(const Vec& x) const override { return x[idx]; }
  };
  struct Unary : Node {
    double (*fn)(double);
    NodePtr a;
    Unary(double (*fn)(double), NodePtr a) : fn(fn), a(std::move(a)) {}
    double eval(const Vec& x) const override { return fn(a->eval(x)); }
  };
  struct Binary : Node {
    char op;
    NodePtr a, b;
    Binary(char op, NodePtr a, NodePtr b) : op(op), a(std::move(a)), b(std::move(b)) {}
    double eval(const Vec& x) const override {
      double u = a->eval(x), v = b->eval(x);
      switch (op) {
        case '+': return u + v;
        case '-': return u - v;
        case '*': return u * v;
        case '/': return u / v;
        default: return std::pow(u, v);
      }
    }
  };

  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError("expression \"" + text_ + "\" at position " +
                      std::to_string(pos_) + ": " + why);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  NodePtr parse_sum() {
    NodePtr lhs = parse_product();
    for (;;) {
      if (eat('+')) lhs = std::make_unique<Binary>('+', std::move(lhs), parse_product());
      else if (eat('-')) lhs = std::make_unique<Binary>('-', std::move(lhs), parse_product());
      else return lhs;
    }
  }

  NodePtr parse_product() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (eat('*')) lhs = std::make_unique<Binary>('*', std::move(lhs), parse_unary());
      else if (eat('/')) lhs = std::make_unique<Binary>('/', std::move(lhs), parse_unary());
      else return lhs;
    }
  }

  NodePtr parse_unary() {
    if (eat('-')) {
      NodePtr a = parse_unary();
      return std::make_unique<Binary>('-', std::make_unique<Const>(0.0), std::move(a));
    }
    if (eat('+')) return parse_unary();
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (eat('^')) {
      // right-associative; exponent may carry its own sign
      NodePtr expn = parse_unary();
      return std::make_unique<Binary>('^', std::move(base), std::move(expn));
    }
    return base;
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    if (eat('(')) {
      NodePtr inner = parse_sum();
      if (!eat(')')) fail("missing ')'");
      return inner;
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr parse_number() {
    size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
      ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    try {
      return std::make_unique<Const>(std::stod(text_.substr(start, pos_ - start)));
    } catch (const std::exception&) {
      pos_ = start;
      fail("malformed number");
    }
  }

  NodePtr parse_ident() {
    size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    std::string name = text_.substr(start, pos_ - start);

    static const std::map<std::string, double (*)(double)> kFunctions = {
        {"sin", std::sin},     {"cos", std::cos},     {"tan", std::tan},
        {"asin", std::asin},   {"acos", std::acos},   {"atan", std::atan},
        {"sinh", std::sinh},   {"cosh", std::cosh},   {"tanh", std::tanh},
        {"asinh", std::asinh}, {"acosh", std::acosh}, {"atanh", std::atanh},
        {"exp", std::exp},     {"log", std::log},     {"sqrt", std::sqrt},
        {"abs", std::fabs},
    };

    if (auto it = kFunctions.find(name); it != kFunctions.end()) {
      if (!eat('(')) fail("function '" + name + "' needs '('");
      NodePtr arg = parse_sum();
      if (!eat(')')) fail("missing ')' after argument of '" + name + "'");
      return std::make_unique<Unary>(it->second, std::move(arg));
    }
    if (name == "pi") return std::make_unique<Const>(M_PI);
    if (name == "e") return std::make_unique<Const>(M_E);

    int idx = -1;
    if (name.size() >= 2 && name[0] == 'x' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      idx = std::stoi(name.substr(1));
    } else if (name == "x") idx = 0;
    else if (name == "y") idx = 1;
    else if (name == "z") idx = 2;

    if (idx < 0 || idx >= dim_) fail("unknown identifier '" + name + "' (dim " +
                                     std::to_string(dim_) + ")");
    return std::make_unique<Var>(idx);
  }

  std::string text_;
  int dim_;
  size_t pos_;
  NodePtr root_;
};

}  // namespace islab
