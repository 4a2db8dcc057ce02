#include "mrplan/dsl.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <map>

namespace mrplan::dsl {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return is_ident_start(c) || std::isdigit(static_cast<unsigned char>(c)); }

std::string type_name(Type t) {
  switch (t) {
    case Type::Num: return "number";
    case Type::Bool: return "boolean";
    case Type::Robot: return "robot";
    case Type::Object: return "object";
    case Type::Region: return "region";
    case Type::Point: return "point";
  }
  return "?";
}

bool is_entity(Type t) { return t == Type::Robot || t == Type::Object || t == Type::Point || t == Type::Region; }
bool is_positional(Type t) { return t == Type::Robot || t == Type::Object || t == Type::Point; }

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    const int col = static_cast<int>(i) + 1;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      if (j < text.size() && text[j] == '.') {
        ++j;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      }
      if (j < text.size() && (text[j] == 'e' || text[j] == 'E')) {
        size_t k = j + 1;
        if (k < text.size() && (text[k] == '+' || text[k] == '-')) ++k;
        if (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) {
          j = k;
          while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
        }
      }
      double value = 0.0;
      const auto res = std::from_chars(text.data() + i, text.data() + j, value);
      if (res.ec != std::errc{})
        throw DslError("malformed number at column " + std::to_string(col), col);
      out.push_back({TokKind::Number, value, std::string(text.substr(i, j - i)), col});
      i = j;
      continue;
    }
    if (is_ident_start(c)) {
      size_t j = i;
      while (j < text.size() && is_ident_char(text[j])) ++j;
      out.push_back({TokKind::Ident, 0.0, std::string(text.substr(i, j - i)), col});
      i = j;
      continue;
    }
    auto push1 = [&](TokKind k, const char* s) {
      out.push_back({k, 0.0, s, col});
      ++i;
    };
    switch (c) {
      case '(': push1(TokKind::LParen, "("); break;
      case ')': push1(TokKind::RParen, ")"); break;
      case '[': push1(TokKind::LBracket, "["); break;
      case ']': push1(TokKind::RBracket, "]"); break;
      case ',': push1(TokKind::Comma, ","); break;
      case '+': push1(TokKind::Plus, "+"); break;
      case '-': push1(TokKind::Minus, "-"); break;
      case '*': push1(TokKind::Star, "*"); break;
      case '/': push1(TokKind::Slash, "/"); break;
      case '<':
        if (i + 1 < text.size() && text[i + 1] == '=') {
          out.push_back({TokKind::Le, 0.0, "<=", col});
          i += 2;
        } else {
          push1(TokKind::Lt, "<");
        }
        break;
      case '>':
        if (i + 1 < text.size() && text[i + 1] == '=') {
          out.push_back({TokKind::Ge, 0.0, ">=", col});
          i += 2;
        } else {
          push1(TokKind::Gt, ">");
        }
        break;
      case '=':
        if (i + 1 < text.size() && text[i + 1] == '=') {
          out.push_back({TokKind::EqEq, 0.0, "==", col});
          i += 2;
        } else {
          throw DslError("illegal character '=' at column " + std::to_string(col) +
                             " (did you mean '==')",
                         col);
        }
        break;
      case '!':
        if (i + 1 < text.size() && text[i + 1] == '=') {
          out.push_back({TokKind::Ne, 0.0, "!=", col});
          i += 2;
        } else {
          throw DslError("illegal character '!' at column " + std::to_string(col), col);
        }
        break;
      default:
        throw DslError(std::string("illegal character '") + c + "' at column " +
                           std::to_string(col),
                       col);
    }
  }
  return out;
}

namespace {

struct FuncSig {
  std::vector<std::vector<Type>> params;  // acceptable types per argument
  Type result;
};

const std::map<std::string, FuncSig>& func_table() {
  static const std::vector<Type> kNum{Type::Num};
  static const std::vector<Type> kPositional{Type::Robot, Type::Object, Type::Point};
  static const std::vector<Type> kEntityAny{Type::Robot, Type::Object, Type::Point, Type::Region};
  static const std::vector<Type> kMobile{Type::Robot, Type::Object};
  static const std::vector<Type> kRegion{Type::Region};
  static const std::map<std::string, FuncSig> table{
      {"robot", {{kNum}, Type::Robot}},
      {"object", {{kNum}, Type::Object}},
      {"region", {{kNum}, Type::Region}},
      {"point", {{kNum, kNum}, Type::Point}},
      {"dist", {{kEntityAny, kEntityAny}, Type::Num}},
      {"in_region", {{kPositional, kRegion}, Type::Bool}},
      {"coverage", {{kRegion}, Type::Num}},
      {"heading", {{kMobile}, Type::Num}},
      {"x", {{kPositional}, Type::Num}},
      {"y", {{kPositional}, Type::Num}},
      {"elapsed", {{}, Type::Num}},
      {"time", {{}, Type::Num}},
      {"mission_tasks_done", {{}, Type::Bool}},
      {"pi", {{}, Type::Num}},
      {"sin", {{kNum}, Type::Num}},
      {"cos", {{kNum}, Type::Num}},
      {"abs", {{kNum}, Type::Num}},
      {"sqrt", {{kNum}, Type::Num}},
      {"min", {{kNum, kNum}, Type::Num}},
      {"max", {{kNum, kNum}, Type::Num}},
      {"atan2", {{kNum, kNum}, Type::Num}},
  };
  return table;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  ExprPtr parse() {
    if (toks_.empty()) throw DslError("empty expression", 1);
    ExprPtr e = parse_or();
    if (pos_ < toks_.size())
      throw DslError("unexpected token '" + toks_[pos_].text + "' at column " +
                         std::to_string(toks_[pos_].pos),
                     toks_[pos_].pos);
    return e;
  }

 private:
  const Token* peek() const { return pos_ < toks_.size() ? &toks_[pos_] : nullptr; }
  const Token& next(const char* expected) {
    if (pos_ >= toks_.size())
      throw DslError(std::string("unexpected end of expression, expected ") + expected,
                     toks_.empty() ? 1 : toks_.back().pos + 1);
    return toks_[pos_++];
  }
  bool at_ident(const char* word) const {
    const Token* t = peek();
    return t && t->kind == TokKind::Ident && t->text == word;
  }
  void expect(TokKind k, const char* what) {
    const Token& t = next(what);
    if (t.kind != k)
      throw DslError(std::string("expected ") + what + " at column " + std::to_string(t.pos) +
                         ", got '" + t.text + "'",
                     t.pos);
  }
  [[noreturn]] void type_error(const std::string& msg, int pos) {
    throw DslError("type error: " + msg + " (column " + std::to_string(pos) + ")", pos);
  }
  void require(Type got, Type want, const std::string& what, int pos) {
    if (got != want) type_error(what + " must be " + type_name(want) + ", got " + type_name(got), pos);
  }

  ExprPtr parse_or() {
    ExprPtr lhs = parse_and();
    while (at_ident("or")) {
      const int p = peek()->pos;
      ++pos_;
      ExprPtr rhs = parse_and();
      require(lhs->type, Type::Bool, "'or' operand", p);
      require(rhs->type, Type::Bool, "'or' operand", p);
      lhs = make_binary(BinOp::Or, Type::Bool, lhs, rhs, p);
    }
    return lhs;
  }

  ExprPtr parse_and() {
    ExprPtr lhs = parse_cmp();
    while (at_ident("and")) {
      const int p = peek()->pos;
      ++pos_;
      ExprPtr rhs = parse_cmp();
      require(lhs->type, Type::Bool, "'and' operand", p);
      require(rhs->type, Type::Bool, "'and' operand", p);
      lhs = make_binary(BinOp::And, Type::Bool, lhs, rhs, p);
    }
    return lhs;
  }

  ExprPtr parse_cmp() {
    ExprPtr lhs = parse_add();
    const Token* t = peek();
    if (!t) return lhs;
    BinOp op;
    switch (t->kind) {
      case TokKind::Lt: op = BinOp::Lt; break;
      case TokKind::Le: op = BinOp::Le; break;
      case TokKind::Gt: op = BinOp::Gt; break;
      case TokKind::Ge: op = BinOp::Ge; break;
      case TokKind::EqEq: op = BinOp::Eq; break;
      case TokKind::Ne: op = BinOp::Ne; break;
      default: return lhs;
    }
    const int p = t->pos;
    ++pos_;
    ExprPtr rhs = parse_add();
    require(lhs->type, Type::Num, "comparison operand", p);
    require(rhs->type, Type::Num, "comparison operand", p);
    return make_binary(op, Type::Bool, lhs, rhs, p);
  }

  ExprPtr parse_add() {
    ExprPtr lhs = parse_mul();
    while (const Token* t = peek()) {
      BinOp op;
      if (t->kind == TokKind::Plus) op = BinOp::Add;
      else if (t->kind == TokKind::Minus) op = BinOp::Sub;
      else break;
      const int p = t->pos;
      ++pos_;
      ExprPtr rhs = parse_mul();
      require(lhs->type, Type::Num, "arithmetic operand", p);
      require(rhs->type, Type::Num, "arithmetic operand", p);
      lhs = make_binary(op, Type::Num, lhs, rhs, p);
    }
    return lhs;
  }

  ExprPtr parse_mul() {
    ExprPtr lhs = parse_unary();
    while (true) {
      const Token* t = peek();
      BinOp op;
      if (t && t->kind == TokKind::Star) op = BinOp::Mul;
      else if (t && t->kind == TokKind::Slash) op = BinOp::Div;
      else if (t && t->kind == TokKind::Ident && t->text == "mod") op = BinOp::Mod;
      else break;
      const int p = t->pos;
      ++pos_;
      ExprPtr rhs = parse_unary();
      require(lhs->type, Type::Num, "arithmetic operand", p);
      require(rhs->type, Type::Num, "arithmetic operand", p);
      lhs = make_binary(op, Type::Num, lhs, rhs, p);
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    const Token* t = peek();
    if (t && t->kind == TokKind::Minus) {
      const int p = t->pos;
      ++pos_;
      ExprPtr operand = parse_unary();
      require(operand->type, Type::Num, "negation operand", p);
      return make_unary(UnOp::Neg, Type::Num, operand, p);
    }
    if (t && t->kind == TokKind::Ident && t->text == "not") {
      const int p = t->pos;
      ++pos_;
      ExprPtr operand = parse_unary();
      require(operand->type, Type::Bool, "'not' operand", p);
      return make_unary(UnOp::Not, Type::Bool, operand, p);
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    const Token& t = next("an expression");
    if (t.kind == TokKind::Number) {
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::Literal;
      e->type = Type::Num;
      e->literal = t.number;
      e->pos = t.pos;
      return e;
    }
    if (t.kind == TokKind::LParen) {
      ExprPtr inner = parse_or();
      expect(TokKind::RParen, ")");
      return inner;
    }
    if (t.kind != TokKind::Ident)
      throw DslError("expected an expression at column " + std::to_string(t.pos) + ", got '" +
                         t.text + "'",
                     t.pos);

    if (t.text == "t" || t.text == "i") {
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::Var;
      e->type = Type::Num;
      e->name = t.text;
      e->pos = t.pos;
      return e;
    }
    if (t.text == "all" || t.text == "any") return parse_quantifier(t);
    if (t.text == "pi" && !(peek() && peek()->kind == TokKind::LParen)) {
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::Call;
      e->type = Type::Num;
      e->name = "pi";
      e->pos = t.pos;
      return e;
    }

    const auto it = func_table().find(t.text);
    if (it == func_table().end())
      throw DslError("unknown function '" + t.text + "' at column " + std::to_string(t.pos), t.pos);
    expect(TokKind::LParen, "(");
    std::vector<ExprPtr> args;
    if (peek() && peek()->kind != TokKind::RParen) {
      args.push_back(parse_or());
      while (peek() && peek()->kind == TokKind::Comma) {
        ++pos_;
        args.push_back(parse_or());
      }
    }
    expect(TokKind::RParen, ")");
    const FuncSig& sig = it->second;
    if (args.size() != sig.params.size())
      type_error(t.text + " takes " + std::to_string(sig.params.size()) + " argument(s), got " +
                     std::to_string(args.size()),
                 t.pos);
    for (size_t k = 0; k < args.size(); ++k) {
      const auto& allowed = sig.params[k];
      if (std::find(allowed.begin(), allowed.end(), args[k]->type) == allowed.end())
        type_error("argument " + std::to_string(k + 1) + " of " + t.text + " has type " +
                       type_name(args[k]->type),
                   t.pos);
    }
    if (t.text == "dist" && args[0]->type == Type::Region && args[1]->type == Type::Region)
      type_error("dist cannot take two regions", t.pos);
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Call;
    e->type = sig.result;
    e->name = t.text;
    e->args = std::move(args);
    e->pos = t.pos;
    return e;
  }

  ExprPtr parse_quantifier(const Token& head) {
    expect(TokKind::LParen, "(");
    const Token& dom = next("'robots' or 'objects'");
    if (dom.kind != TokKind::Ident || (dom.text != "robots" && dom.text != "objects"))
      throw DslError("quantifier domain must be 'robots' or 'objects' (column " +
                         std::to_string(dom.pos) + ")",
                     dom.pos);
    const Token& kw = next("'in'");
    if (kw.kind != TokKind::Ident || kw.text != "in")
      throw DslError("expected 'in' at column " + std::to_string(kw.pos), kw.pos);
    expect(TokKind::LBracket, "[");
    std::vector<int> ids;
    if (peek() && peek()->kind != TokKind::RBracket) {
      while (true) {
        const Token& id = next("an integer id");
        if (id.kind != TokKind::Number || id.number != std::floor(id.number) || id.number < 0)
          throw DslError("quantifier ids must be nonnegative integers (column " +
                             std::to_string(id.pos) + ")",
                         id.pos);
        ids.push_back(static_cast<int>(id.number));
        if (peek() && peek()->kind == TokKind::Comma) {
          ++pos_;
          continue;
        }
        break;
      }
    }
    expect(TokKind::RBracket, "]");
    expect(TokKind::Comma, ",");
    ExprPtr body = parse_or();
    expect(TokKind::RParen, ")");
    if (body->type != Type::Bool)
      type_error("quantifier body must be boolean, got " + type_name(body->type), head.pos);
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Quantifier;
    e->type = Type::Bool;
    e->quant = head.text == "all" ? Quant::All : Quant::Any;
    e->domain = dom.text == "robots" ? Domain::Robots : Domain::Objects;
    e->quant_ids = std::move(ids);
    e->args = {body};
    e->pos = head.pos;
    return e;
  }

  static ExprPtr make_binary(BinOp op, Type type, ExprPtr a, ExprPtr b, int pos) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Binary;
    e->type = type;
    e->bop = op;
    e->args = {std::move(a), std::move(b)};
    e->pos = pos;
    return e;
  }
  static ExprPtr make_unary(UnOp op, Type type, ExprPtr a, int pos) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Unary;
    e->type = type;
    e->uop = op;
    e->args = {std::move(a)};
    e->pos = pos;
    return e;
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
};

}  // namespace

ExprPtr parse_expr(std::string_view text) { return Parser(tokenize(text)).parse(); }

ExprPtr parse_condition(std::string_view text) {
  ExprPtr e = parse_expr(text);
  if (e->type != Type::Bool)
    throw DslError("condition must be boolean, got " + type_name(e->type), e->pos);
  return e;
}

namespace {

// Precedence levels for printing; higher binds tighter.
int level(const ExprPtr& e) {
  switch (e->kind) {
    case Expr::Kind::Binary:
      switch (e->bop) {
        case BinOp::Or: return 1;
        case BinOp::And: return 2;
        case BinOp::Lt: case BinOp::Le: case BinOp::Gt:
        case BinOp::Ge: case BinOp::Eq: case BinOp::Ne: return 3;
        case BinOp::Add: case BinOp::Sub: return 4;
        case BinOp::Mul: case BinOp::Div: case BinOp::Mod: return 5;
      }
      return 7;
    case Expr::Kind::Unary: return 6;
    default: return 7;
  }
}

const char* binop_text(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Mod: return "mod";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::And: return "and";
    case BinOp::Or: return "or";
  }
  return "?";
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void print_into(const ExprPtr& e, std::string& out, int parent_level) {
  const int my = level(e);
  const bool parens = my < parent_level;
  if (parens) out += '(';
  switch (e->kind) {
    case Expr::Kind::Literal:
      out += format_number(e->literal);
      break;
    case Expr::Kind::Var:
      out += e->name;
      break;
    case Expr::Kind::Call:
      out += e->name;
      if (e->name != "pi") {
        out += '(';
        for (size_t i = 0; i < e->args.size(); ++i) {
          if (i) out += ", ";
          print_into(e->args[i], out, 0);
        }
        out += ')';
      }
      break;
    case Expr::Kind::Unary:
      if (e->uop == UnOp::Neg) {
        out += '-';
        print_into(e->args[0], out, 6);
      } else {
        out += "not ";
        print_into(e->args[0], out, 6);
      }
      break;
    case Expr::Kind::Binary: {
      print_into(e->args[0], out, my);
      out += ' ';
      out += binop_text(e->bop);
      out += ' ';
      // Left-associative: right operand needs one level more to force parens
      // on equal precedence; comparisons are non-associative either way.
      print_into(e->args[1], out, my + 1);
      break;
    }
    case Expr::Kind::Quantifier: {
      out += e->quant == Quant::All ? "all(" : "any(";
      out += e->domain == Domain::Robots ? "robots in [" : "objects in [";
      for (size_t i = 0; i < e->quant_ids.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(e->quant_ids[i]);
      }
      out += "], ";
      print_into(e->args[0], out, 0);
      out += ')';
      break;
    }
  }
  if (parens) out += ')';
}

}  // namespace

std::string print_expr(const ExprPtr& e) {
  std::string out;
  print_into(e, out, 0);
  return out;
}

bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a->kind != b->kind || a->type != b->type) return false;
  switch (a->kind) {
    case Expr::Kind::Literal:
      if (a->literal != b->literal) return false;
      break;
    case Expr::Kind::Var:
      if (a->name != b->name) return false;
      break;
    case Expr::Kind::Call:
      if (a->name != b->name) return false;
      break;
    case Expr::Kind::Unary:
      if (a->uop != b->uop) return false;
      break;
    case Expr::Kind::Binary:
      if (a->bop != b->bop) return false;
      break;
    case Expr::Kind::Quantifier:
      if (a->quant != b->quant || a->domain != b->domain || a->quant_ids != b->quant_ids)
        return false;
      break;
  }
  if (a->args.size() != b->args.size()) return false;
  for (size_t i = 0; i < a->args.size(); ++i)
    if (!expr_equal(a->args[i], b->args[i])) return false;
  return true;
}

namespace {

struct Bindings {
  const Bindings* parent = nullptr;
  std::string name;
  double value = 0.0;

  std::optional<double> lookup(const std::string& n) const {
    for (const Bindings* b = this; b; b = b->parent)
      if (b->name == n) return b->value;
    return std::nullopt;
  }
};

Value num_value(double v) {
  Value out;
  out.type = Type::Num;
  out.num = v;
  return out;
}

Value bool_value(bool v) {
  Value out;
  out.type = Type::Bool;
  out.boolean = v;
  return out;
}

Vec2 value_position(const Value& v, const EvalContext& ctx, int pos) {
  switch (v.type) {
    case Type::Point:
      return v.point;
    case Type::Robot: {
      const RobotState* r = ctx.world ? ctx.world->find_robot(v.entity_id) : nullptr;
      if (!r) throw DslError("unknown robot id " + std::to_string(v.entity_id), pos);
      return r->position;
    }
    case Type::Object: {
      const DynamicObject* o = ctx.world ? ctx.world->find_object(v.entity_id) : nullptr;
      if (!o) throw DslError("unknown object id " + std::to_string(v.entity_id), pos);
      return o->position;
    }
    default:
      throw DslError("entity has no position", pos);
  }
}

const Region& value_region(const Value& v, const EvalContext& ctx, int pos) {
  const Region* r = ctx.world ? ctx.world->find_region(v.entity_id) : nullptr;
  if (!r) throw DslError("unknown region id " + std::to_string(v.entity_id), pos);
  return *r;
}

int require_id(const Value& v, const char* what, int pos) {
  if (v.num != std::floor(v.num) || v.num < 0.0 || !std::isfinite(v.num))
    throw DslError(std::string(what) + " id must be a nonnegative integer", pos);
  return static_cast<int>(v.num);
}

Value eval_rec(const ExprPtr& e, const EvalContext& ctx, const Bindings* env);

Value eval_call(const ExprPtr& e, const EvalContext& ctx, const Bindings* env) {
  std::vector<Value> args;
  args.reserve(e->args.size());
  for (const auto& a : e->args) args.push_back(eval_rec(a, ctx, env));

  const std::string& f = e->name;
  if (f == "robot" || f == "object" || f == "region") {
    Value out;
    out.type = f == "robot" ? Type::Robot : f == "object" ? Type::Object : Type::Region;
    out.entity_id = require_id(args[0], f.c_str(), e->pos);
    if (ctx.world) {
      const bool known = f == "robot"    ? ctx.world->find_robot(out.entity_id) != nullptr
                         : f == "object" ? ctx.world->find_object(out.entity_id) != nullptr
                                         : ctx.world->find_region(out.entity_id) != nullptr;
      if (!known)
        throw DslError("unknown " + f + " id " + std::to_string(out.entity_id), e->pos);
    }
    return out;
  }
  if (f == "point") {
    Value out;
    out.type = Type::Point;
    out.point = Vec2{args[0].num, args[1].num};
    return out;
  }
  if (f == "dist") {
    if (args[0].type == Type::Region)
      return num_value(distance_to_region(value_position(args[1], ctx, e->pos),
                                          value_region(args[0], ctx, e->pos)));
    if (args[1].type == Type::Region)
      return num_value(distance_to_region(value_position(args[0], ctx, e->pos),
                                          value_region(args[1], ctx, e->pos)));
    return num_value(distance(value_position(args[0], ctx, e->pos),
                              value_position(args[1], ctx, e->pos)));
  }
  if (f == "in_region")
    return bool_value(point_in_region(value_position(args[0], ctx, e->pos),
                                      value_region(args[1], ctx, e->pos)));
  if (f == "coverage") {
    const Region& r = value_region(args[0], ctx, e->pos);
    if (!ctx.world->has_grid(r.id))
      throw DslError("region " + std::to_string(r.id) + " has no coverage grid", e->pos);
    return num_value(ctx.world->coverage_fraction(r.id));
  }
  if (f == "heading") {
    if (args[0].type == Type::Robot) {
      const RobotState* r = ctx.world ? ctx.world->find_robot(args[0].entity_id) : nullptr;
      if (!r) throw DslError("unknown robot id " + std::to_string(args[0].entity_id), e->pos);
      return num_value(r->last_heading);
    }
    const DynamicObject* o = ctx.world ? ctx.world->find_object(args[0].entity_id) : nullptr;
    if (!o) throw DslError("unknown object id " + std::to_string(args[0].entity_id), e->pos);
    return num_value(o->last_heading);
  }
  if (f == "x") return num_value(value_position(args[0], ctx, e->pos).x());
  if (f == "y") return num_value(value_position(args[0], ctx, e->pos).y());
  if (f == "elapsed") {
    if (!ctx.world) throw DslError("elapsed() requires a world", e->pos);
    return num_value(ctx.world->time - ctx.node_start_time);
  }
  if (f == "time") {
    if (!ctx.world) throw DslError("time() requires a world", e->pos);
    return num_value(ctx.world->time);
  }
  if (f == "mission_tasks_done") return bool_value(ctx.mission_tasks_done);
  if (f == "pi") return num_value(M_PI);
  if (f == "sin") return num_value(std::sin(args[0].num));
  if (f == "cos") return num_value(std::cos(args[0].num));
  if (f == "abs") return num_value(std::abs(args[0].num));
  if (f == "sqrt") {
    if (args[0].num < 0.0) throw DslError("sqrt of negative value", e->pos);
    return num_value(std::sqrt(args[0].num));
  }
  if (f == "min") return num_value(std::min(args[0].num, args[1].num));
  if (f == "max") return num_value(std::max(args[0].num, args[1].num));
  if (f == "atan2") return num_value(std::atan2(args[0].num, args[1].num));
  throw DslError("unknown function '" + f + "'", e->pos);
}

Value eval_rec(const ExprPtr& e, const EvalContext& ctx, const Bindings* env) {
  switch (e->kind) {
    case Expr::Kind::Literal:
      return num_value(e->literal);
    case Expr::Kind::Var: {
      if (e->name == "t") {
        if (env) {
          if (auto v = env->lookup("t")) return num_value(*v);
        }
        if (ctx.t) return num_value(*ctx.t);
        throw DslError("'t' referenced without binding", e->pos);
      }
      if (env) {
        if (auto v = env->lookup(e->name)) return num_value(*v);
      }
      throw DslError("'" + e->name + "' referenced outside a quantifier", e->pos);
    }
    case Expr::Kind::Call:
      return eval_call(e, ctx, env);
    case Expr::Kind::Unary: {
      Value a = eval_rec(e->args[0], ctx, env);
      return e->uop == UnOp::Neg ? num_value(-a.num) : bool_value(!a.boolean);
    }
    case Expr::Kind::Binary: {
      if (e->bop == BinOp::And) {
        Value a = eval_rec(e->args[0], ctx, env);
        if (!a.boolean) return bool_value(false);
        return bool_value(eval_rec(e->args[1], ctx, env).boolean);
      }
      if (e->bop == BinOp::Or) {
        Value a = eval_rec(e->args[0], ctx, env);
        if (a.boolean) return bool_value(true);
        return bool_value(eval_rec(e->args[1], ctx, env).boolean);
      }
      const double a = eval_rec(e->args[0], ctx, env).num;
      const double b = eval_rec(e->args[1], ctx, env).num;
      switch (e->bop) {
        case BinOp::Add: return num_value(a + b);
        case BinOp::Sub: return num_value(a - b);
        case BinOp::Mul: return num_value(a * b);
        case BinOp::Div:
          if (b == 0.0) throw DslError("division by zero", e->pos);
          return num_value(a / b);
        case BinOp::Mod:
          if (b == 0.0) throw DslError("mod by zero", e->pos);
          return num_value(std::fmod(a, b));
        case BinOp::Lt: return bool_value(a < b);
        case BinOp::Le: return bool_value(a <= b);
        case BinOp::Gt: return bool_value(a > b);
        case BinOp::Ge: return bool_value(a >= b);
        case BinOp::Eq: return bool_value(std::abs(a - b) <= kEqualityTolerance);
        case BinOp::Ne: return bool_value(std::abs(a - b) > kEqualityTolerance);
        default: break;
      }
      throw DslError("bad binary op", e->pos);
    }
    case Expr::Kind::Quantifier: {
      const bool want_all = e->quant == Quant::All;
      for (int id : e->quant_ids) {
        Bindings scope{env, "i", static_cast<double>(id)};
        const bool v = eval_rec(e->args[0], ctx, &scope).boolean;
        if (want_all && !v) return bool_value(false);
        if (!want_all && v) return bool_value(true);
      }
      return bool_value(want_all);
    }
  }
  throw DslError("bad expression node", e->pos);
}

}  // namespace

Value eval(const ExprPtr& e, const EvalContext& ctx) { return eval_rec(e, ctx, nullptr); }

double eval_num(const ExprPtr& e, const EvalContext& ctx) {
  const Value v = eval(e, ctx);
  if (v.type != Type::Num) throw DslError("expected numeric result", e->pos);
  return v.num;
}

bool eval_bool(const ExprPtr& e, const EvalContext& ctx) {
  const Value v = eval(e, ctx);
  if (v.type != Type::Bool) throw DslError("expected boolean result", e->pos);
  return v.boolean;
}

WorldIds WorldIds::from(const WorldState& w) {
  WorldIds ids;
  for (const auto& r : w.robots) ids.robots.insert(r.id);
  for (const auto& o : w.objects) ids.objects.insert(o.id);
  for (const auto& r : w.regions) ids.regions.insert(r.id);
  return ids;
}

namespace {

void check_ids_rec(const ExprPtr& e, const WorldIds& ids, std::vector<std::string>& out) {
  if (e->kind == Expr::Kind::Call &&
      (e->name == "robot" || e->name == "object" || e->name == "region") &&
      e->args[0]->kind == Expr::Kind::Literal) {
    const int id = static_cast<int>(e->args[0]->literal);
    const std::set<int>& known = e->name == "robot"    ? ids.robots
                                 : e->name == "object" ? ids.objects
                                                       : ids.regions;
    if (!known.count(id))
      out.push_back("unresolved " + e->name + " id " + std::to_string(id));
  }
  if (e->kind == Expr::Kind::Quantifier) {
    const std::set<int>& known = e->domain == Domain::Robots ? ids.robots : ids.objects;
    for (int id : e->quant_ids)
      if (!known.count(id))
        out.push_back(std::string("unresolved ") +
                      (e->domain == Domain::Robots ? "robot" : "object") + " id " +
                      std::to_string(id) + " in quantifier");
  }
  for (const auto& a : e->args) check_ids_rec(a, ids, out);
}

}  // namespace

std::vector<std::string> check_entity_ids(const ExprPtr& e, const WorldIds& ids) {
  std::vector<std::string> out;
  check_ids_rec(e, ids, out);
  return out;
}

}  // namespace mrplan::dsl
