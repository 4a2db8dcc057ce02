#pragma once

#include "mrplan/world.hpp"

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mrplan::dsl {

// Position-carrying error for tokenize/parse/eval failures. `pos` is a
// 1-based column in the source text (0 when not applicable).
struct DslError : std::runtime_error {
  int pos;
  DslError(const std::string& msg, int pos_ = 0) : std::runtime_error(msg), pos(pos_) {}
};

enum class TokKind {
  Number, Ident, LParen, RParen, LBracket, RBracket, Comma,
  Plus, Minus, Star, Slash, Lt, Le, Gt, Ge, EqEq, Ne,
};

struct Token {
  TokKind kind = TokKind::Number;
  double number = 0.0;
  std::string text;
  int pos = 0;  // 1-based column
};

// Longest-match, whitespace-insensitive. Throws DslError on illegal input.
std::vector<Token> tokenize(std::string_view text);

enum class Type { Num, Bool, Robot, Object, Region, Point };
enum class BinOp { Add, Sub, Mul, Div, Mod, Lt, Le, Gt, Ge, Eq, Ne, And, Or };
enum class UnOp { Neg, Not };
enum class Quant { All, Any };
enum class Domain { Robots, Objects };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { Literal, Var, Call, Unary, Binary, Quantifier };
  Kind kind = Kind::Literal;
  Type type = Type::Num;
  double literal = 0.0;
  std::string name;  // Var name or Call target
  UnOp uop = UnOp::Neg;
  BinOp bop = BinOp::Add;
  Quant quant = Quant::All;
  Domain domain = Domain::Robots;
  std::vector<int> quant_ids;
  std::vector<ExprPtr> args;  // call args / operands / quantifier body (single)
  int pos = 0;
};

// Recursive-descent parse with parse-time type checking.
// Precedence: unary not/neg > * / mod > + - > comparisons > and > or.
ExprPtr parse_expr(std::string_view text);

// parse_expr plus a Bool result-type requirement (trigger/finish conditions).
ExprPtr parse_condition(std::string_view text);

// Canonical text; parse(print(e)) is structurally equal to e and printing is a
// fixpoint under reparse.
std::string print_expr(const ExprPtr& e);

bool expr_equal(const ExprPtr& a, const ExprPtr& b);

struct EvalContext {
  const WorldState* world = nullptr;
  double node_start_time = 0.0;
  std::optional<double> t;  // parametric-path binding
  bool mission_tasks_done = false;
};

struct Value {
  Type type = Type::Num;
  double num = 0.0;
  bool boolean = false;
  int entity_id = 0;
  Vec2 point{0.0, 0.0};
};

// Pure and deterministic; comparisons use |a-b| <= 1e-9 for equality.
// Throws DslError on unknown ids, division by zero, or unbound variables.
Value eval(const ExprPtr& e, const EvalContext& ctx);
double eval_num(const ExprPtr& e, const EvalContext& ctx);
bool eval_bool(const ExprPtr& e, const EvalContext& ctx);

struct WorldIds {
  std::set<int> robots, objects, regions;
  static WorldIds from(const WorldState& w);
};

// Static id check: literal robot(k)/object(k)/region(k) arguments and
// quantifier id lists must resolve. Non-literal accessor arguments are left to
// evaluation. Returns human-readable diagnostics, empty when clean.
std::vector<std::string> check_entity_ids(const ExprPtr& e, const WorldIds& ids);

inline constexpr double kEqualityTolerance = 1e-9;

}  // namespace mrplan::dsl
