#include "srlab/token.hpp"

#include <algorithm>
#include <array>
#include <charconv>

#include "srlab/errors.hpp"

namespace srlab {

namespace {

struct OpInfo {
  Op op;
  std::string_view name;
  int arity;
};

constexpr std::array<OpInfo, 15> kOps{{
    {Op::Add, "add", 2},
    {Op::Sub, "sub", 2},
    {Op::Mul, "mul", 2},
    {Op::Div, "div", 2},
    {Op::Sin, "sin", 1},
    {Op::Cos, "cos", 1},
    {Op::Tan, "tan", 1},
    {Op::Exp, "exp", 1},
    {Op::Log, "log", 1},
    {Op::Sqrt, "sqrt", 1},
    {Op::Asin, "asin", 1},
    {Op::Pow2, "pow2", 1},
    {Op::Pow3, "pow3", 1},
    {Op::Pow4, "pow4", 1},
    {Op::Pow5, "pow5", 1},
}};

}  // namespace

int op_arity(Op op) { return kOps[std::size_t(op)].arity; }
std::string_view op_name(Op op) { return kOps[std::size_t(op)].name; }

std::string token_text(const Token& t) {
  switch (t.kind) {
    case Token::Kind::Var: return "x_" + std::to_string(t.var);
    case Token::Kind::Const: return "C";
    case Token::Kind::Op: return std::string(op_name(t.op));
    case Token::Kind::End: return "<end>";
    case Token::Kind::PromptStart: return "<p>";
    case Token::Kind::PromptEnd: return "</p>";
  }
  return "?";
}

Token token_from_text(std::string_view text) {
  if (text == "C") return Token::constant();
  if (text == "<end>") return Token::end();
  if (text == "<p>") return Token::prompt_start();
  if (text == "</p>") return Token::prompt_end();
  if (text.size() > 2 && text.substr(0, 2) == "x_") {
    int idx = 0;
    auto body = text.substr(2);
    auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), idx);
    if (ec == std::errc() && ptr == body.data() + body.size() && idx >= 1)
      return Token::variable(idx);
  }
  for (const auto& info : kOps)
    if (info.name == text) return Token::operation(info.op);
  throw UnknownToken(std::string(text));
}

std::string join_tokens(const TokenSeq& seq) {
  std::string out;
  for (const Token& t : seq) {
    if (!out.empty()) out += ' ';
    out += token_text(t);
  }
  return out;
}

TokenSeq tokens_from_texts(const std::vector<std::string>& texts) {
  TokenSeq seq;
  seq.reserve(texts.size());
  for (const auto& s : texts) seq.push_back(token_from_text(s));
  return seq;
}

std::vector<std::string> texts_from_tokens(const TokenSeq& seq) {
  std::vector<std::string> out;
  out.reserve(seq.size());
  for (const Token& t : seq) out.push_back(token_text(t));
  return out;
}

int prefix_deficit(const TokenSeq& seq) {
  int deficit = 1;
  for (const Token& t : seq) {
    if (!t.is_expression_token()) return -1;
    if (deficit == 0) return -1;  // tokens after the tree already closed
    deficit += t.arity() - 1;
  }
  return deficit;
}

Vocabulary Vocabulary::full() {
  Vocabulary v;
  v.binary_ops = {Op::Add, Op::Sub, Op::Mul, Op::Div};
  v.unary_ops = {Op::Sin, Op::Cos, Op::Exp, Op::Log, Op::Sqrt,
                 Op::Asin, Op::Pow2, Op::Pow3, Op::Pow4, Op::Pow5};
  return v;
}

Vocabulary Vocabulary::simplified() {
  Vocabulary v;
  v.binary_ops = {Op::Add, Op::Sub};
  v.unary_ops = {Op::Sin, Op::Cos, Op::Tan, Op::Exp};
  return v;
}

bool Vocabulary::contains(Op op) const {
  const auto& pool = op_arity(op) == 2 ? binary_ops : unary_ops;
  return std::find(pool.begin(), pool.end(), op) != pool.end();
}

std::vector<Token> Vocabulary::expression_tokens() const {
  std::vector<Token> out;
  out.reserve(std::size_t(dim) + 1 + unary_ops.size() + binary_ops.size());
  for (int i = 1; i <= dim; ++i) out.push_back(Token::variable(i));
  out.push_back(Token::constant());
  for (Op op : unary_ops) out.push_back(Token::operation(op));
  for (Op op : binary_ops) out.push_back(Token::operation(op));
  return out;
}

std::vector<Token> legal_tokens(const Vocabulary& vocab, int deficit) {
  if (deficit == 0) return {Token::end()};
  return vocab.expression_tokens();
}

}  // namespace srlab
