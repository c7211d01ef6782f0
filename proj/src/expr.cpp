#include "srlab/expr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "srlab/errors.hpp"

namespace srlab {

struct Expr::Node {
  Kind kind;
  int var = 0;
  double value = 0.0;
  Op op = Op::Add;
  Expr lhs, rhs;  // unary child sits in lhs
};

Expr Expr::variable(int index) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Var;
  n->var = index;
  return Expr(std::move(n));
}

Expr Expr::constant(double value) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Const;
  n->value = value;
  return Expr(std::move(n));
}

Expr Expr::placeholder() {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Placeholder;
  return Expr(std::move(n));
}

Expr Expr::unary(Op op, Expr child) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Unary;
  n->op = op;
  n->lhs = std::move(child);
  return Expr(std::move(n));
}

Expr Expr::binary(Op op, Expr lhs, Expr rhs) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Binary;
  n->op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return Expr(std::move(n));
}

Expr::Kind Expr::kind() const { return node_->kind; }
int Expr::var_index() const { return node_->var; }
double Expr::value() const { return node_->value; }
Op Expr::op() const { return node_->op; }

const Expr& Expr::child(int i) const {
  return i == 0 ? node_->lhs : node_->rhs;
}

int Expr::arity() const {
  switch (node_->kind) {
    case Kind::Unary: return 1;
    case Kind::Binary: return 2;
    default: return 0;
  }
}

int Expr::node_count() const {
  int n = 1;
  for (int i = 0; i < arity(); ++i) n += child(i).node_count();
  return n;
}

int Expr::depth() const {
  int d = 0;
  for (int i = 0; i < arity(); ++i) d = std::max(d, child(i).depth());
  return d + 1;
}

bool Expr::has_placeholder() const {
  if (kind() == Kind::Placeholder) return true;
  for (int i = 0; i < arity(); ++i)
    if (child(i).has_placeholder()) return true;
  return false;
}

int Expr::placeholder_count() const {
  int n = kind() == Kind::Placeholder ? 1 : 0;
  for (int i = 0; i < arity(); ++i) n += child(i).placeholder_count();
  return n;
}

int Expr::constant_count() const {
  int n = (kind() == Kind::Const || kind() == Kind::Placeholder) ? 1 : 0;
  for (int i = 0; i < arity(); ++i) n += child(i).constant_count();
  return n;
}

namespace {

bool equal_impl(const Expr& a, const Expr& b, bool exact) {
  using K = Expr::Kind;
  K ka = a.kind(), kb = b.kind();
  if (!exact) {  // identify Const with Placeholder
    if (ka == K::Placeholder) ka = K::Const;
    if (kb == K::Placeholder) kb = K::Const;
  }
  if (ka != kb) return false;
  switch (ka) {
    case K::Var: return a.var_index() == b.var_index();
    case K::Const: return !exact || a.value() == b.value();
    case K::Placeholder: return true;
    case K::Unary:
      return a.op() == b.op() && equal_impl(a.child(0), b.child(0), exact);
    case K::Binary:
      return a.op() == b.op() && equal_impl(a.child(0), b.child(0), exact) &&
             equal_impl(a.child(1), b.child(1), exact);
  }
  return false;
}

}  // namespace

bool exact_equal(const Expr& a, const Expr& b) { return equal_impl(a, b, true); }
bool structurally_equal(const Expr& a, const Expr& b) {
  return equal_impl(a, b, false);
}

// --- serialization -----------------------------------------------------------

namespace {

void serialize_into(const Expr& e, TokenSeq& out, std::vector<double>* values,
                    bool reject_placeholder) {
  switch (e.kind()) {
    case Expr::Kind::Var:
      out.push_back(Token::variable(e.var_index()));
      return;
    case Expr::Kind::Const:
      out.push_back(Token::constant());
      if (values) values->push_back(e.value());
      return;
    case Expr::Kind::Placeholder:
      if (reject_placeholder)
        throw PlaceholderPresent("open constant has no value to serialize");
      out.push_back(Token::constant());
      return;
    case Expr::Kind::Unary:
      out.push_back(Token::operation(e.op()));
      serialize_into(e.child(0), out, values, reject_placeholder);
      return;
    case Expr::Kind::Binary:
      out.push_back(Token::operation(e.op()));
      serialize_into(e.child(0), out, values, reject_placeholder);
      serialize_into(e.child(1), out, values, reject_placeholder);
      return;
  }
}

}  // namespace

TokenSeq serialize(const Expr& e) {
  TokenSeq out;
  serialize_into(e, out, nullptr, false);
  return out;
}

SerializedExpr serialize_with_values(const Expr& e) {
  SerializedExpr s;
  serialize_into(e, s.tokens, &s.constants, true);
  return s;
}

namespace {

Expr parse_prefix(const TokenSeq& seq, std::size_t& pos,
                  std::span<const double> constants, std::size_t& const_pos,
                  bool with_values) {
  if (pos >= seq.size())
    throw MalformedSequence("sequence ended with open slots");
  const Token t = seq[pos++];
  switch (t.kind) {
    case Token::Kind::Var:
      return Expr::variable(t.var);
    case Token::Kind::Const:
      if (!with_values) return Expr::placeholder();
      if (const_pos >= constants.size())
        throw MalformedSequence("more C tokens than constants");
      return Expr::constant(constants[const_pos++]);
    case Token::Kind::Op: {
      if (t.arity() == 1) {
        Expr c = parse_prefix(seq, pos, constants, const_pos, with_values);
        return Expr::unary(t.op, std::move(c));
      }
      Expr l = parse_prefix(seq, pos, constants, const_pos, with_values);
      Expr r = parse_prefix(seq, pos, constants, const_pos, with_values);
      return Expr::binary(t.op, std::move(l), std::move(r));
    }
    default:
      throw MalformedSequence("non-expression token: " + token_text(t));
  }
}

Expr deserialize_impl(const TokenSeq& seq, std::span<const double> constants,
                      bool with_values) {
  std::size_t pos = 0, const_pos = 0;
  Expr e = parse_prefix(seq, pos, constants, const_pos, with_values);
  if (pos != seq.size())
    throw MalformedSequence("trailing tokens after a complete tree");
  if (with_values && const_pos != constants.size())
    throw MalformedSequence("fewer C tokens than constants");
  return e;
}

}  // namespace

Expr deserialize(const TokenSeq& seq) { return deserialize_impl(seq, {}, false); }

Expr deserialize(const TokenSeq& seq, std::span<const double> constants) {
  return deserialize_impl(seq, constants, true);
}

// --- evaluation --------------------------------------------------------------

namespace {

double apply_unary(Op op, double v) {
  switch (op) {
    case Op::Sin: return std::sin(v);
    case Op::Cos: return std::cos(v);
    case Op::Tan: return std::tan(v);
    case Op::Exp: return std::exp(v);
    case Op::Log: return std::log(v);
    case Op::Sqrt: return std::sqrt(v);
    case Op::Asin: return std::asin(v);
    case Op::Pow2: return v * v;
    case Op::Pow3: return v * v * v;
    case Op::Pow4: return (v * v) * (v * v);
    case Op::Pow5: return (v * v) * (v * v) * v;
    default: return std::numeric_limits<double>::quiet_NaN();
  }
}

double apply_binary(Op op, double a, double b) {
  switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
    default: return std::numeric_limits<double>::quiet_NaN();
  }
}

double eval_impl(const Expr& e, std::span<const double> x,
                 std::span<const double> fill, std::size_t& fill_pos,
                 bool with_fill) {
  switch (e.kind()) {
    case Expr::Kind::Var: {
      std::size_t i = std::size_t(e.var_index()) - 1;
      if (i >= x.size())
        throw std::invalid_argument("input dimension below variable index");
      return x[i];
    }
    case Expr::Kind::Const:
      return e.value();
    case Expr::Kind::Placeholder:
      if (!with_fill)
        throw PlaceholderPresent("evaluation needs concrete constants");
      if (fill_pos >= fill.size())
        throw std::invalid_argument("too few placeholder values");
      return fill[fill_pos++];
    case Expr::Kind::Unary: {
      double v = eval_impl(e.child(0), x, fill, fill_pos, with_fill);
      if (!std::isfinite(v)) return v;  // poison wins over 1/inf == 0 etc.
      return apply_unary(e.op(), v);
    }
    case Expr::Kind::Binary: {
      double a = eval_impl(e.child(0), x, fill, fill_pos, with_fill);
      // both children always evaluated so placeholder positions stay aligned
      double b = eval_impl(e.child(1), x, fill, fill_pos, with_fill);
      if (!std::isfinite(a)) return a;
      if (!std::isfinite(b)) return b;
      return apply_binary(e.op(), a, b);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double evaluate(const Expr& e, std::span<const double> x) {
  std::size_t pos = 0;
  return eval_impl(e, x, {}, pos, false);
}

double evaluate(const Expr& e, std::span<const double> x,
                std::span<const double> placeholder_values) {
  std::size_t pos = 0;
  return eval_impl(e, x, placeholder_values, pos, true);
}

// --- template extraction -----------------------------------------------------

namespace {

bool is_constant_leaf(const Expr& e) {
  return e.kind() == Expr::Kind::Const || e.kind() == Expr::Kind::Placeholder;
}

}  // namespace

Expr strip_constants(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Var:
      return e;
    case Expr::Kind::Const:
    case Expr::Kind::Placeholder:
      throw IrreducibleConstant("constant outside a scale/shift position");
    case Expr::Kind::Unary:
      return Expr::unary(e.op(), strip_constants(e.child(0)));
    case Expr::Kind::Binary: {
      const Expr& l = e.child(0);
      const Expr& r = e.child(1);
      if (e.op() == Op::Mul || e.op() == Op::Add) {
        bool lc = is_constant_leaf(l), rc = is_constant_leaf(r);
        if (lc && rc)
          throw IrreducibleConstant("constant combined with constant");
        if (lc) return strip_constants(r);
        if (rc) return strip_constants(l);
      }
      return Expr::binary(e.op(), strip_constants(l), strip_constants(r));
    }
  }
  throw IrreducibleConstant("unreachable");
}

// --- subtrees ----------------------------------------------------------------

bool is_pure_constant(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Var: return false;
    case Expr::Kind::Const:
    case Expr::Kind::Placeholder: return true;
    default:
      for (int i = 0; i < e.arity(); ++i)
        if (!is_pure_constant(e.child(i))) return false;
      return true;
  }
}

namespace {

void collect_subtrees(const Expr& e, std::map<std::string, Expr>& acc) {
  if (!is_pure_constant(e)) acc.emplace(structural_key(e), e);
  for (int i = 0; i < e.arity(); ++i) collect_subtrees(e.child(i), acc);
}

}  // namespace

std::vector<Expr> subtrees(const Expr& e) {
  std::map<std::string, Expr> acc;  // ordered: deterministic output
  collect_subtrees(e, acc);
  std::vector<Expr> out;
  out.reserve(acc.size());
  for (auto& [key, sub] : acc) out.push_back(std::move(sub));
  return out;
}

// --- keys --------------------------------------------------------------------

namespace {

// Serializes with children of commutative ops emitted in key order. Returns
// the key of the subtree so parents can compare without re-serializing.
std::string commutative_key(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Var:
      return "x_" + std::to_string(e.var_index());
    case Expr::Kind::Const:
    case Expr::Kind::Placeholder:
      return "C";
    case Expr::Kind::Unary:
      return std::string(op_name(e.op())) + ' ' + commutative_key(e.child(0));
    case Expr::Kind::Binary: {
      std::string a = commutative_key(e.child(0));
      std::string b = commutative_key(e.child(1));
      if ((e.op() == Op::Add || e.op() == Op::Mul) && b < a) std::swap(a, b);
      return std::string(op_name(e.op())) + ' ' + a + ' ' + b;
    }
  }
  return {};
}

}  // namespace

std::string canonical_key(const Expr& e, KeyMode mode) {
  Expr t = strip_constants(e);
  if (mode == KeyMode::Strict) return join_tokens(serialize(t));
  return commutative_key(t);
}

std::string structural_key(const Expr& e) { return join_tokens(serialize(e)); }

}  // namespace srlab
