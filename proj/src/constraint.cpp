#include "pixie/constraint.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <system_error>

namespace pixie::constraint {

namespace {

enum class Tok {
  Number, Ident, Dot, LParen, RParen, Plus, Minus, Star, Slash,
  Lt, Le, Gt, Ge, EqEq, Ne, AndAnd, OrOr, Bang, End,
};

struct Token {
  Tok kind = Tok::End;
  std::string_view text;
  std::size_t offset = 0;
  double number = 0.0;
};

// Counted per grammar level, so roughly 150 levels of parentheses.
constexpr std::size_t kMaxDepth = 1000;

bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      if (pos_ >= src_.size()) {
        out.push_back({Tok::End, {}, pos_, 0.0});
        return out;
      }
      out.push_back(next());
    }
  }

 private:
  void skip_space() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
                                  src_[pos_] == '\r')) {
      ++pos_;
    }
  }

  bool starts_with(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }

  Token make(Tok k, std::size_t len) {
    Token t{k, src_.substr(pos_, len), pos_, 0.0};
    pos_ += len;
    return t;
  }

  Token next() {
    const char c = src_[pos_];
    if (is_digit(c) || (c == '.' && pos_ + 1 < src_.size() && is_digit(src_[pos_ + 1]))) return number();
    if (is_ident_start(c)) {
      std::size_t end = pos_;
      while (end < src_.size() && is_ident_char(src_[end])) ++end;
      return make(Tok::Ident, end - pos_);
    }
    // Multi-byte UTF-8 spellings.
    if (starts_with("\xE2\x89\xA4")) return make(Tok::Le, 3);  // ≤
    if (starts_with("\xE2\x89\xA5")) return make(Tok::Ge, 3);  // ≥
    if (starts_with("\xE2\x89\xA0")) return make(Tok::Ne, 3);  // ≠
    if (starts_with("\xCF\x81")) return make(Tok::Ident, 2);    // ρ
    if (starts_with("\xCE\xBD")) return make(Tok::Ident, 2);    // ν
    if (starts_with("<=")) return make(Tok::Le, 2);
    if (starts_with(">=")) return make(Tok::Ge, 2);
    if (starts_with("==")) return make(Tok::EqEq, 2);
    if (starts_with("!=")) return make(Tok::Ne, 2);
    if (starts_with("&&")) return make(Tok::AndAnd, 2);
    if (starts_with("||")) return make(Tok::OrOr, 2);
    switch (c) {
      case '.': return make(Tok::Dot, 1);
      case '(': return make(Tok::LParen, 1);
      case ')': return make(Tok::RParen, 1);
      case '+': return make(Tok::Plus, 1);
      case '-': return make(Tok::Minus, 1);
      case '*': return make(Tok::Star, 1);
      case '/': return make(Tok::Slash, 1);
      case '<': return make(Tok::Lt, 1);
      case '>': return make(Tok::Gt, 1);
      case '!': return make(Tok::Bang, 1);
      default: break;
    }
    throw ParseError(ParseError::Kind::Lexical, pos_, "unexpected character");
  }

  Token number() {
    std::size_t end = pos_;
    while (end < src_.size() && is_digit(src_[end])) ++end;
    if (end < src_.size() && src_[end] == '.') {
      ++end;
      while (end < src_.size() && is_digit(src_[end])) ++end;
    }
    if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
      std::size_t e = end + 1;
      if (e < src_.size() && (src_[e] == '+' || src_[e] == '-')) ++e;
      if (e >= src_.size() || !is_digit(src_[e])) {
        throw ParseError(ParseError::Kind::Lexical, end, "malformed exponent");
      }
      while (e < src_.size() && is_digit(src_[e])) ++e;
      end = e;
    }
    if (end < src_.size() && is_ident_start(src_[end])) {
      throw ParseError(ParseError::Kind::Lexical, end, "identifier directly after number");
    }
    double value = 0.0;
    const char* first = src_.data() + pos_;
    const char* last = src_.data() + end;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
      throw ParseError(ParseError::Kind::Lexical, pos_, "numeric literal out of range");
    }
    Token t = make(Tok::Number, end - pos_);
    t.number = value;
    return t;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

std::optional<Param> param_from(std::string_view s) {
  if (s == "E" || s == "young_modulus" || s == "youngs_modulus") return Param::E;
  if (s == "nu" || s == "poisson_ratio" || s == "\xCE\xBD") return Param::Nu;
  if (s == "density" || s == "rho" || s == "\xCF\x81") return Param::Density;
  return std::nullopt;
}

bool is_keyword(std::string_view s) { return s == "and" || s == "or" || s == "not"; }

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  ExprPtr parse_all() {
    ExprPtr e = parse_or();
    if (peek().kind != Tok::End) {
      throw ParseError(ParseError::Kind::TrailingInput, peek().offset, "trailing input");
    }
    if (e->type != Type::Boolean) {
      throw ParseError(ParseError::Kind::Type, e->offset, "constraint must be a boolean expression");
    }
    return e;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  Token take() { return toks_[pos_++]; }

  bool peek_keyword(std::string_view kw) const { return peek().kind == Tok::Ident && peek().text == kw; }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p_(p) {
      if (++p_.depth_ > kMaxDepth) {
        throw ParseError(ParseError::Kind::TooDeep, p_.peek().offset, "expression nested too deeply");
      }
    }
    ~DepthGuard() { --p_.depth_; }
    Parser& p_;
  };

  static void require(const Expr& e, Type t, std::string_view what) {
    if (e.type != t) {
      throw ParseError(ParseError::Kind::Type, e.offset,
                       std::string(what) + (t == Type::Number ? " expects a numeric operand"
                                                              : " expects a boolean operand"));
    }
  }

  static ExprPtr binary(Op op, ExprPtr l, ExprPtr r, Type result, std::size_t offset) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Binary;
    e->op = op;
    e->type = result;
    e->offset = offset;
    e->lhs = std::move(l);
    e->rhs = std::move(r);
    return e;
  }

  ExprPtr parse_or() {
    DepthGuard g(*this);
    ExprPtr lhs = parse_and();
    while (peek().kind == Tok::OrOr || peek_keyword("or")) {
      const Token t = take();
      ExprPtr rhs = parse_and();
      require(*lhs, Type::Boolean, "or");
      require(*rhs, Type::Boolean, "or");
      lhs = binary(Op::Or, lhs, rhs, Type::Boolean, t.offset);
    }
    return lhs;
  }

  ExprPtr parse_and() {
    DepthGuard g(*this);
    ExprPtr lhs = parse_comparison();
    while (peek().kind == Tok::AndAnd || peek_keyword("and")) {
      const Token t = take();
      ExprPtr rhs = parse_comparison();
      require(*lhs, Type::Boolean, "and");
      require(*rhs, Type::Boolean, "and");
      lhs = binary(Op::And, lhs, rhs, Type::Boolean, t.offset);
    }
    return lhs;
  }

  ExprPtr parse_comparison() {
    DepthGuard g(*this);
    ExprPtr lhs = parse_additive();
    while (true) {
      Op op;
      switch (peek().kind) {
        case Tok::Lt: op = Op::Lt; break;
        case Tok::Le: op = Op::Le; break;
        case Tok::Gt: op = Op::Gt; break;
        case Tok::Ge: op = Op::Ge; break;
        case Tok::EqEq: op = Op::Eq; break;
        case Tok::Ne: op = Op::Ne; break;
        default: return lhs;
      }
      const Token t = take();
      ExprPtr rhs = parse_additive();
      require(*lhs, Type::Number, "comparison");
      require(*rhs, Type::Number, "comparison");
      lhs = binary(op, lhs, rhs, Type::Boolean, t.offset);
    }
  }

  ExprPtr parse_additive() {
    DepthGuard g(*this);
    ExprPtr lhs = parse_multiplicative();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      const Token t = take();
      ExprPtr rhs = parse_multiplicative();
      require(*lhs, Type::Number, "arithmetic");
      require(*rhs, Type::Number, "arithmetic");
      lhs = binary(t.kind == Tok::Plus ? Op::Add : Op::Sub, lhs, rhs, Type::Number, t.offset);
    }
    return lhs;
  }

  ExprPtr parse_multiplicative() {
    DepthGuard g(*this);
    ExprPtr lhs = parse_unary();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      const Token t = take();
      ExprPtr rhs = parse_unary();
      require(*lhs, Type::Number, "arithmetic");
      require(*rhs, Type::Number, "arithmetic");
      lhs = binary(t.kind == Tok::Star ? Op::Mul : Op::Div, lhs, rhs, Type::Number, t.offset);
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    DepthGuard g(*this);
    if (peek().kind == Tok::Bang || peek_keyword("not") || peek().kind == Tok::Minus) {
      const Token t = take();
      const bool negate = t.kind == Tok::Minus;
      ExprPtr operand = parse_unary();
      require(*operand, negate ? Type::Number : Type::Boolean, negate ? "unary minus" : "not");
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::Unary;
      e->op = negate ? Op::Neg : Op::Not;
      e->type = operand->type;
      e->offset = t.offset;
      e->lhs = std::move(operand);
      return e;
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    const Token t = peek();
    switch (t.kind) {
      case Tok::Number: {
        take();
        auto e = std::make_shared<Expr>();
        e->kind = Expr::Kind::Number;
        e->value = t.number;
        e->offset = t.offset;
        return e;
      }
      case Tok::LParen: {
        take();
        ExprPtr inner = parse_or();
        if (peek().kind != Tok::RParen) {
          throw ParseError(ParseError::Kind::UnexpectedToken, peek().offset, "expected ')'");
        }
        take();
        return inner;
      }
      case Tok::Ident: {
        if (is_keyword(t.text)) {
          throw ParseError(ParseError::Kind::UnexpectedToken, t.offset,
                           "unexpected keyword '" + std::string(t.text) + "'");
        }
        take();
        if (peek().kind != Tok::Dot) {
          throw ParseError(ParseError::Kind::UnexpectedToken, peek().offset,
                           "expected '.' after part name (references look like part.param)");
        }
        take();
        const Token p = peek();
        if (p.kind != Tok::Ident) {
          throw ParseError(ParseError::Kind::UnexpectedToken, p.offset, "expected parameter name");
        }
        auto param = param_from(p.text);
        if (!param) {
          throw ParseError(ParseError::Kind::UnexpectedToken, p.offset,
                           "unknown parameter '" + std::string(p.text) + "' (expected E, nu or density)");
        }
        take();
        auto e = std::make_shared<Expr>();
        e->kind = Expr::Kind::Ref;
        e->part = std::string(t.text);
        e->param = *param;
        e->offset = t.offset;
        return e;
      }
      case Tok::End:
        throw ParseError(ParseError::Kind::UnexpectedToken, t.offset, "unexpected end of input");
      default:
        throw ParseError(ParseError::Kind::UnexpectedToken, t.offset,
                         "unexpected token '" + std::string(t.text) + "'");
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::size_t depth_ = 0;
};

std::string_view op_text(Op op) {
  switch (op) {
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Lt: return "<";
    case Op::Le: return "<=";
    case Op::Gt: return ">";
    case Op::Ge: return ">=";
    case Op::Eq: return "==";
    case Op::Ne: return "!=";
    case Op::And: return "and";
    case Op::Or: return "or";
    case Op::Not: return "not ";
    case Op::Neg: return "-";
  }
  return "?";
}

void print(const Expr& e, std::string& out) {
  switch (e.kind) {
    case Expr::Kind::Number: {
      char buf[64];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), e.value);
      out.append(buf, ptr);
      return;
    }
    case Expr::Kind::Ref:
      out += e.part;
      out += '.';
      out += param_name(e.param);
      return;
    case Expr::Kind::Unary:
      out += '(';
      out += op_text(e.op);
      print(*e.lhs, out);
      out += ')';
      return;
    case Expr::Kind::Binary:
      out += '(';
      print(*e.lhs, out);
      out += ' ';
      out += op_text(e.op);
      out += ' ';
      print(*e.rhs, out);
      out += ')';
      return;
  }
}

struct Value {
  double number = 0.0;
  bool boolean = false;
};

double lookup(const Expr& e, const ParamSample& sample) {
  auto it = sample.find(e.part);
  if (it == sample.end()) {
    throw Error(ErrorCode::EvalError, "unresolved reference '" + to_string(e) + "'");
  }
  switch (e.param) {
    case Param::E: return it->second.young_modulus;
    case Param::Nu: return it->second.poisson_ratio;
    case Param::Density: return it->second.density;
  }
  return 0.0;
}

Value eval(const Expr& e, const ParamSample& sample) {
  switch (e.kind) {
    case Expr::Kind::Number: return {e.value, false};
    case Expr::Kind::Ref: return {lookup(e, sample), false};
    case Expr::Kind::Unary: {
      const Value v = eval(*e.lhs, sample);
      if (e.op == Op::Neg) return {-v.number, false};
      return {0.0, !v.boolean};
    }
    case Expr::Kind::Binary: break;
  }
  // Short-circuit boolean operators.
  if (e.op == Op::And) {
    if (!eval(*e.lhs, sample).boolean) return {0.0, false};
    return {0.0, eval(*e.rhs, sample).boolean};
  }
  if (e.op == Op::Or) {
    if (eval(*e.lhs, sample).boolean) return {0.0, true};
    return {0.0, eval(*e.rhs, sample).boolean};
  }
  const double a = eval(*e.lhs, sample).number;
  const double b = eval(*e.rhs, sample).number;
  switch (e.op) {
    case Op::Add: return {a + b, false};
    case Op::Sub: return {a - b, false};
    case Op::Mul: return {a * b, false};
    case Op::Div:
      if (b == 0.0) throw Error(ErrorCode::EvalError, "division by zero in '" + to_string(e) + "'");
      return {a / b, false};
    case Op::Lt: return {0.0, a < b};
    case Op::Le: return {0.0, a <= b};
    case Op::Gt: return {0.0, a > b};
    case Op::Ge: return {0.0, a >= b};
    case Op::Eq: return {0.0, a == b};
    case Op::Ne: return {0.0, a != b};
    default: break;
  }
  throw Error(ErrorCode::EvalError, "malformed expression node");
}

void collect_parts(const Expr& e, std::set<std::string>& out) {
  if (e.kind == Expr::Kind::Ref) out.insert(e.part);
  if (e.lhs) collect_parts(*e.lhs, out);
  if (e.rhs) collect_parts(*e.rhs, out);
}

}  // namespace

bool Expr::operator==(const Expr& o) const {
  if (kind != o.kind || type != o.type) return false;
  switch (kind) {
    case Kind::Number: return value == o.value;
    case Kind::Ref: return part == o.part && param == o.param;
    case Kind::Unary: return op == o.op && *lhs == *o.lhs;
    case Kind::Binary: return op == o.op && *lhs == *o.lhs && *rhs == *o.rhs;
  }
  return false;
}

ParseError::ParseError(Kind kind, std::size_t offset, const std::string& message)
    : Error(ErrorCode::ParseError, message + " at byte " + std::to_string(offset)),
      kind_(kind),
      offset_(offset) {}

ExprPtr parse(std::string_view text) {
  if (text.size() > kMaxSourceBytes) {
    throw ParseError(ParseError::Kind::TooLarge, kMaxSourceBytes, "constraint source exceeds 64 KiB");
  }
  Parser parser(Lexer(text).run());
  return parser.parse_all();
}

std::string to_string(const Expr& expr) {
  std::string out;
  print(expr, out);
  return out;
}

std::string_view param_name(Param p) {
  switch (p) {
    case Param::E: return "E";
    case Param::Nu: return "nu";
    case Param::Density: return "density";
  }
  return "?";
}

bool evaluate(const Expr& expr, const ParamSample& sample) {
  if (expr.type != Type::Boolean) throw Error(ErrorCode::EvalError, "expression is not boolean");
  return eval(expr, sample).boolean;
}

double evaluate_number(const Expr& expr, const ParamSample& sample) {
  if (expr.type != Type::Number) throw Error(ErrorCode::EvalError, "expression is not numeric");
  return eval(expr, sample).number;
}

std::vector<std::string> referenced_parts(const Expr& expr) {
  std::set<std::string> parts;
  collect_parts(expr, parts);
  return {parts.begin(), parts.end()};
}

}  // namespace pixie::constraint
