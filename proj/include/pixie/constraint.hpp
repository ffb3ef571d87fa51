#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "pixie/error.hpp"
#include "pixie/material_types.hpp"

namespace pixie::constraint {

// Closed constraint language over part parameters, e.g.
//   leaves.density < trunk.density and pot.E >= 10 * trunk.E
//
// Precedence, tightest first: unary (not, -), * /, + -, comparisons, and, or.
// Binary operators are left-associative. Aliases: E = young_modulus,
// nu = poisson_ratio, density = rho. Comparisons and boolean operators also
// accept <= >= (or the unicode forms), &&, ||, !.

enum class Param { E, Nu, Density };
enum class Op { Add, Sub, Mul, Div, Lt, Le, Gt, Ge, Eq, Ne, And, Or, Not, Neg };
enum class Type { Number, Boolean };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { Number, Ref, Unary, Binary };

  Kind kind = Kind::Number;
  Type type = Type::Number;
  double value = 0.0;  // Number
  std::string part;    // Ref
  Param param = Param::E;
  Op op = Op::Add;  // Unary/Binary
  ExprPtr lhs, rhs;  // Unary uses lhs only
  std::size_t offset = 0;  // byte offset in source, ignored by ==

  bool operator==(const Expr& other) const;
};

class ParseError : public Error {
 public:
  enum class Kind { Lexical, UnexpectedToken, TrailingInput, Type, TooLarge, TooDeep };
  ParseError(Kind kind, std::size_t offset, const std::string& message);
  Kind kind() const { return kind_; }
  std::size_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

inline constexpr std::size_t kMaxSourceBytes = 64 * 1024;

// Parses a boolean constraint. Throws ParseError.
ExprPtr parse(std::string_view text);

// Fully parenthesised canonical form; parse(to_string(e)) == e.
std::string to_string(const Expr& expr);
std::string_view param_name(Param p);

// Throws Error(EvalError) on unresolved references or division by zero.
bool evaluate(const Expr& expr, const ParamSample& sample);
double evaluate_number(const Expr& expr, const ParamSample& sample);

// Distinct part names referenced, sorted.
std::vector<std::string> referenced_parts(const Expr& expr);

}  // namespace pixie::constraint
