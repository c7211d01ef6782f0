#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace srlab {

enum class Op : std::uint8_t {
  Add, Sub, Mul, Div,                    // binary
  Sin, Cos, Tan, Exp, Log, Sqrt, Asin,   // unary
  Pow2, Pow3, Pow4, Pow5,                // unary integer powers
};

int op_arity(Op op);
std::string_view op_name(Op op);

// One vocabulary symbol. Expression serializations use Var/Const/Op only;
// End closes a completed sequence, PromptStart/PromptEnd bracket prompt
// blocks and never appear inside an expression.
struct Token {
  enum class Kind : std::uint8_t { Var, Const, Op, End, PromptStart, PromptEnd };

  Kind kind = Kind::End;
  int var = 0;        // 1-based variable index, Kind::Var only
  Op op = Op::Add;    // Kind::Op only

  static Token variable(int index) { return {Kind::Var, index, Op::Add}; }
  static Token constant() { return {Kind::Const, 0, Op::Add}; }
  static Token operation(Op o) { return {Kind::Op, 0, o}; }
  static Token end() { return {Kind::End, 0, Op::Add}; }
  static Token prompt_start() { return {Kind::PromptStart, 0, Op::Add}; }
  static Token prompt_end() { return {Kind::PromptEnd, 0, Op::Add}; }

  // arity of the symbol inside a prefix serialization (0 for leaves)
  int arity() const { return kind == Kind::Op ? op_arity(op) : 0; }

  bool is_expression_token() const {
    return kind == Kind::Var || kind == Kind::Const || kind == Kind::Op;
  }

  // Fixed total order used by every deterministic tie-break:
  // x_1 < x_2 < ... < C < operators (enum order) < end < prompt markers.
  friend auto operator<=>(const Token& a, const Token& b) {
    if (a.kind != b.kind) return a.kind <=> b.kind;
    if (a.kind == Kind::Var) return a.var <=> b.var;
    if (a.kind == Kind::Op) return a.op <=> b.op;
    return std::strong_ordering::equal;
  }
  friend bool operator==(const Token& a, const Token& b) = default;
};

using TokenSeq = std::vector<Token>;

std::string token_text(const Token& t);
Token token_from_text(std::string_view text);  // throws UnknownToken

std::string join_tokens(const TokenSeq& seq);               // space separated
TokenSeq tokens_from_texts(const std::vector<std::string>&);
std::vector<std::string> texts_from_tokens(const TokenSeq&);

// Arity deficit of a partial serialization: starts at 1, each token consumes
// one slot and opens arity(token) new ones. Returns -1 when the sequence is
// not a valid expression prefix (non-expression token, or tokens after the
// deficit already reached zero). A complete serialization ends at exactly 0.
int prefix_deficit(const TokenSeq& seq);
inline bool is_complete_serialization(const TokenSeq& seq) {
  return !seq.empty() && prefix_deficit(seq) == 0;
}

// Operator inventory plus problem dimensions. Generation draws template
// operators from here and policies mask their support to these tokens;
// serialization and evaluation accept the full operator universe.
struct Vocabulary {
  std::vector<Op> binary_ops;
  std::vector<Op> unary_ops;
  int dim = 5;             // variables x_1 .. x_dim
  double c_min = -10.0;    // constant interval for fitted tokens
  double c_max = 10.0;

  static Vocabulary full();
  static Vocabulary simplified();

  bool contains(Op op) const;

  // x_1..x_dim, C, unary ops, binary ops; the fixed enumeration order used
  // for uniform backoff and legality masks
  std::vector<Token> expression_tokens() const;
};

// Tokens a policy may emit after a prefix with the given deficit: End alone
// at deficit 0, every expression token otherwise.
std::vector<Token> legal_tokens(const Vocabulary& vocab, int deficit);

}  // namespace srlab
