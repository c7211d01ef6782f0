#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "srlab/token.hpp"

namespace srlab {

// Immutable expression tree. Copies share structure, so passing and storing
// subtrees is cheap and thread-safe. Constant leaves either carry a concrete
// value or stand open as a placeholder awaiting fitting.
class Expr {
 public:
  enum class Kind : std::uint8_t { Var, Const, Placeholder, Unary, Binary };

  Expr() = default;  // empty; only assignment is valid afterwards

  static Expr variable(int index);
  static Expr constant(double value);
  static Expr placeholder();
  static Expr unary(Op op, Expr child);
  static Expr binary(Op op, Expr lhs, Expr rhs);

  bool empty() const { return !node_; }
  Kind kind() const;
  int var_index() const;   // Kind::Var
  double value() const;    // Kind::Const
  Op op() const;           // Kind::Unary / Kind::Binary
  const Expr& child(int i) const;
  int arity() const;

  int node_count() const;
  int depth() const;  // single leaf has depth 1
  bool has_placeholder() const;
  int placeholder_count() const;
  int constant_count() const;  // concrete constants plus placeholders

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

// exact: constant values compared bit-for-bit
bool exact_equal(const Expr& a, const Expr& b);
// structural: constants and placeholders identified with each other
bool structurally_equal(const Expr& a, const Expr& b);

// --- serialization -----------------------------------------------------------

// Prefix serialization; every constant or placeholder becomes a C token.
TokenSeq serialize(const Expr& e);

struct SerializedExpr {
  TokenSeq tokens;                 // identical to serialize(e)
  std::vector<double> constants;  // concrete values in serialization order
};
// Keeps values: constants travel out-of-band, placeholders are rejected
// (throws PlaceholderPresent) because they have no value to carry.
SerializedExpr serialize_with_values(const Expr& e);

// Rebuilds the tree; C tokens become placeholders. Throws MalformedSequence
// when the arity rule fails.
Expr deserialize(const TokenSeq& seq);
// Same, but the i-th C token takes constants[i]; sizes must agree.
Expr deserialize(const TokenSeq& seq, std::span<const double> constants);

// --- evaluation --------------------------------------------------------------

// Evaluates over the extended reals: IEEE semantics at the fringe, and any
// non-finite intermediate forces a non-finite result (so 1/inf cannot launder
// an overflow back into range). Throws PlaceholderPresent on open constants.
double evaluate(const Expr& e, std::span<const double> x);

// Evaluation with placeholder values supplied positionally (serialization
// order). Concrete constants keep their stored values.
double evaluate(const Expr& e, std::span<const double> x,
                std::span<const double> placeholder_values);

// --- template extraction -----------------------------------------------------

// Inverts constant injection: a constant leaf multiplying or added to a
// subexpression is dropped; a constant anywhere else (sole child of a unary,
// operand of sub/div, both sides of mul/add) throws IrreducibleConstant.
// Output carries no constants, so the map is idempotent.
Expr strip_constants(const Expr& e);

// --- subtrees ----------------------------------------------------------------

// All distinct rooted subtrees under structural equality, excluding subtrees
// with no variable in them; ordered by structural key for determinism.
std::vector<Expr> subtrees(const Expr& e);

bool is_pure_constant(const Expr& e);

// --- keys --------------------------------------------------------------------

enum class KeyMode { Strict, Commutative };

// Template identity: serialization string of strip_constants(e). Commutative
// mode additionally sorts add/mul children by their own key, bottom-up.
std::string canonical_key(const Expr& e, KeyMode mode = KeyMode::Strict);

// Placeholder-preserving identity: serialization string with constants kept
// as C markers. No stripping; distinguishes x_1 from mul(C, x_1).
std::string structural_key(const Expr& e);

}  // namespace srlab
