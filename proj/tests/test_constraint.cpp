#include <random>
#include <string>

#include "doctest.h"
#include "pixie/constraint.hpp"

using namespace pixie;
using namespace pixie::constraint;

namespace {

ParamSample tree_sample() {
  ParamSample s;
  s["leaves"] = {2e4, 0.4, 200};
  s["trunk"] = {2e6, 0.4, 400};
  s["pot"] = {2e8, 0.4, 400};
  return s;
}

// Random well-formed source text drawn from the full surface syntax.
class ExprGen {
 public:
  explicit ExprGen(std::uint64_t seed) : rng_(seed) {}

  std::string boolean(int depth) {
    const int pick = depth <= 0 ? 0 : static_cast<int>(rng_() % 5);
    switch (pick) {
      case 1: return boolean(depth - 1) + " " + one({"and", "&&"}) + " " + boolean(depth - 1);
      case 2: return boolean(depth - 1) + " " + one({"or", "||"}) + " " + boolean(depth - 1);
      case 3: return one({"not ", "!"}) + "(" + boolean(depth - 1) + ")";
      case 4: return "(" + ws() + boolean(depth - 1) + ws() + ")";
      default:
        return number(depth - 1) + ws() + one({"<", "<=", ">", ">=", "==", "!=", "\xE2\x89\xA4", "\xE2\x89\xA5", "\xE2\x89\xA0"}) +
               ws() + number(depth - 1);
    }
  }

  std::string number(int depth) {
    const int pick = depth <= 0 ? static_cast<int>(rng_() % 2) : static_cast<int>(rng_() % 6);
    switch (pick) {
      case 0: return literal();
      case 1: return ref();
      case 2: return number(depth - 1) + ws() + one({"+", "-"}) + ws() + number(depth - 1);
      case 3: return number(depth - 1) + ws() + one({"*", "/"}) + ws() + number(depth - 1);
      case 4: return "-" + number(depth - 1);
      default: return "(" + number(depth - 1) + ")";
    }
  }

 private:
  std::string one(std::initializer_list<const char*> xs) {
    auto it = xs.begin();
    std::advance(it, rng_() % xs.size());
    return *it;
  }
  std::string ws() { return rng_() % 3 == 0 ? "" : std::string(1 + rng_() % 2, ' '); }
  std::string literal() {
    switch (rng_() % 4) {
      case 0: return std::to_string(rng_() % 1000);
      case 1: return std::to_string(rng_() % 100) + "." + std::to_string(rng_() % 1000);
      case 2: return std::to_string(1 + rng_() % 9) + "e" + std::to_string(rng_() % 12);
      default: return "2.5E-" + std::to_string(rng_() % 5);
    }
  }
  std::string ref() {
    return one({"leaves", "trunk", "pot", "a_1"}) + "." +
           one({"E", "nu", "density", "young_modulus", "poisson_ratio", "rho", "\xCF\x81", "\xCE\xBD"});
  }
  std::mt19937_64 rng_;
};

}  // namespace

TEST_CASE("comparison of two references") {
  const auto e = parse("leaves.density < trunk.density");
  CHECK(e->kind == Expr::Kind::Binary);
  CHECK(e->op == Op::Lt);
  CHECK(e->lhs->kind == Expr::Kind::Ref);
  CHECK(e->lhs->part == "leaves");
  CHECK(e->lhs->param == Param::Density);
  CHECK(e->rhs->part == "trunk");
  CHECK(evaluate(*e, tree_sample()));
}

TEST_CASE("multiplication binds tighter than comparison") {
  const auto e = parse("pot.E >= 10 * trunk.E");
  CHECK(e->op == Op::Ge);
  CHECK(e->rhs->op == Op::Mul);
  CHECK(e->rhs->lhs->value == 10.0);
  CHECK(to_string(*e) == "(pot.E >= (10 * trunk.E))");
  CHECK(*parse(to_string(*e)) == *e);
  CHECK(evaluate(*e, tree_sample()));
}

TEST_CASE("precedence and associativity") {
  CHECK(to_string(*parse("1 + 2 * 3 - 4 < 5")) == "(((1 + (2 * 3)) - 4) < 5)");
  CHECK(to_string(*parse("a.E < 1 or a.E > 2 and a.nu < 3")) == "((a.E < 1) or ((a.E > 2) and (a.nu < 3)))");
  CHECK(to_string(*parse("not (a.E < 1) and a.E > 0")) == "((not (a.E < 1)) and (a.E > 0))");
  CHECK(to_string(*parse("8 / 4 / 2 == 1")) == "(((8 / 4) / 2) == 1)");
  CHECK(evaluate(*parse("8 / 4 / 2 == 1"), {}));
  CHECK(evaluate(*parse("-2 * 3 == -6"), {}));
}

TEST_CASE("reflexive comparisons") {
  ParamSample s;
  s["a"] = {1, 0.3, 1};
  CHECK(evaluate(*parse("a.E == a.E"), s));
  CHECK_FALSE(evaluate(*parse("a.E != a.E"), s));
}

TEST_CASE("aliases and alternative spellings") {
  const auto s = tree_sample();
  CHECK(*parse("leaves.rho < trunk.density") == *parse("leaves.density < trunk.density"));
  CHECK(*parse("leaves.\xCF\x81 \xE2\x89\xA4 trunk.density") == *parse("leaves.density <= trunk.density"));
  CHECK(*parse("pot.young_modulus > 1 && !(pot.poisson_ratio > 1)") == *parse("pot.E > 1 and not (pot.nu > 1)"));
  CHECK(evaluate(*parse("1.5e3 == 1500 and 2E-1 == 0.2"), s));
}

TEST_CASE("evaluation errors name the subexpression") {
  ParamSample s;
  s["x"] = {5, 0.3, 1};
  try {
    evaluate(*parse("x.E / (x.nu - x.nu) > 0"), s);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EvalError);
    CHECK(std::string(e.what()).find("(x.E / (x.nu - x.nu))") != std::string::npos);
  }
  try {
    evaluate(*parse("y.E > 0"), s);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EvalError);
    CHECK(std::string(e.what()).find("y.E") != std::string::npos);
  }
}

TEST_CASE("parse errors carry kind and byte offset") {
  auto fails = [](const std::string& text, ParseError::Kind kind, std::size_t offset) {
    try {
      parse(text);
      FAIL("expected ParseError for " << text);
    } catch (const ParseError& e) {
      CHECK(e.kind() == kind);
      CHECK(e.offset() == offset);
      CHECK(e.code() == ErrorCode::ParseError);
    }
  };
  fails("a.E < $", ParseError::Kind::Lexical, 6);
  fails("a.E < ", ParseError::Kind::UnexpectedToken, 6);
  fails("a.E < 1 2", ParseError::Kind::TrailingInput, 8);
  fails("a.E + 1", ParseError::Kind::Type, 4);
  fails("a.X < 1", ParseError::Kind::UnexpectedToken, 2);
  fails("(a.E < 1", ParseError::Kind::UnexpectedToken, 8);
  fails(std::string(70000, ' ') + "1 < 2", ParseError::Kind::TooLarge, 65536);
  CHECK_THROWS_AS(parse(std::string(5000, '(') + "1 < 2" + std::string(5000, ')')), ParseError);
}

TEST_CASE("referenced parts are distinct and sorted") {
  CHECK(referenced_parts(*parse("trunk.E > leaves.E and leaves.nu < pot.nu")) ==
        std::vector<std::string>{"leaves", "pot", "trunk"});
}

TEST_CASE("print/parse round trip over 1000 generated expressions") {
  ExprGen gen(17);
  const ParamSample s = [] {
    ParamSample p = tree_sample();
    p["a_1"] = {3.5, 0.25, 7};
    return p;
  }();
  int evaluated = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::string text = gen.boolean(4);
    ExprPtr e;
    INFO(text);
    REQUIRE_NOTHROW(e = parse(text));
    const std::string printed = to_string(*e);
    const auto again = parse(printed);
    CHECK(*again == *e);
    CHECK(to_string(*again) == printed);
    try {
      const bool r = evaluate(*e, s);
      CHECK(evaluate(*again, s) == r);
      ++evaluated;
    } catch (const Error& err) {
      CHECK(err.code() == ErrorCode::EvalError);
    }
  }
  CHECK(evaluated > 500);
}

TEST_CASE("fuzzed input yields structured errors only") {
  std::mt19937_64 rng(23);
  const std::string alphabet = "ab.EnudsityrhoE0123456789+-*/<>=!()&|  \t\xCF\x81\xE2\x89\xA4" "e";
  ExprGen gen(5);
  for (int i = 0; i < 5000; ++i) {
    std::string text;
    if (i % 2 == 0) {
      const std::size_t len = rng() % 40;
      for (std::size_t k = 0; k < len; ++k) text += alphabet[rng() % alphabet.size()];
    } else {
      text = gen.boolean(3);
      const std::size_t cuts = 1 + rng() % 3;
      for (std::size_t k = 0; k < cuts && !text.empty(); ++k) {
        const std::size_t at = rng() % text.size();
        if (rng() % 2) text.erase(at, 1);
        else text.insert(at, 1, static_cast<char>(rng() % 256));
      }
    }
    try {
      parse(text);
    } catch (const ParseError&) {
    } catch (...) {
      FAIL("unstructured exception for input: " << text);
    }
  }
}
