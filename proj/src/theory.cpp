#include "srlab/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "srlab/errors.hpp"
#include "srlab/expr.hpp"

namespace srlab {

struct BoolFormula::Node {
  Kind kind = Kind::Lit;
  bool value = false;
  BoolFormula lhs, rhs;  // not-child sits in lhs
};

BoolFormula BoolFormula::lit(bool value) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Lit;
  n->value = value;
  return BoolFormula(std::move(n));
}

BoolFormula BoolFormula::negation(BoolFormula child) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Not;
  n->lhs = std::move(child);
  return BoolFormula(std::move(n));
}

BoolFormula BoolFormula::conjunction(BoolFormula lhs, BoolFormula rhs) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::And;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return BoolFormula(std::move(n));
}

BoolFormula BoolFormula::disjunction(BoolFormula lhs, BoolFormula rhs) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Or;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return BoolFormula(std::move(n));
}

BoolFormula::Kind BoolFormula::kind() const { return node_->kind; }
bool BoolFormula::value() const { return node_->value; }

const BoolFormula& BoolFormula::child(int i) const {
  return i == 0 ? node_->lhs : node_->rhs;
}

int BoolFormula::arity() const {
  switch (node_->kind) {
    case Kind::Lit: return 0;
    case Kind::Not: return 1;
    default: return 2;
  }
}

int BoolFormula::node_count() const {
  int n = 1;
  for (int i = 0; i < arity(); ++i) n += child(i).node_count();
  return n;
}

int BoolFormula::depth() const {
  int deepest = 0;
  for (int i = 0; i < arity(); ++i) deepest = std::max(deepest, child(i).depth());
  return 1 + deepest;
}

bool BoolFormula::contains_or() const {
  if (node_->kind == Kind::Or) return true;
  for (int i = 0; i < arity(); ++i)
    if (child(i).contains_or()) return true;
  return false;
}

bool exact_equal(const BoolFormula& a, const BoolFormula& b) {
  if (a.kind() != b.kind()) return false;
  if (a.kind() == BoolFormula::Kind::Lit) return a.value() == b.value();
  for (int i = 0; i < a.arity(); ++i)
    if (!exact_equal(a.child(i), b.child(i))) return false;
  return true;
}

std::string to_string(const BoolFormula& f) {
  switch (f.kind()) {
    case BoolFormula::Kind::Lit: return f.value() ? "1" : "0";
    case BoolFormula::Kind::Not: return "(!" + to_string(f.child(0)) + ")";
    case BoolFormula::Kind::And:
      return "(" + to_string(f.child(0)) + "&" + to_string(f.child(1)) + ")";
    case BoolFormula::Kind::Or:
      return "(" + to_string(f.child(0)) + "|" + to_string(f.child(1)) + ")";
  }
  throw std::logic_error("unreachable formula kind");
}

namespace {

// Recursive descent over formula := 0 | 1 | (¬ formula) | (formula op formula).
// The UTF-8 connectives are matched by their byte sequences.
struct FormulaParser {
  std::string_view text;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("bad formula at offset " + std::to_string(pos) +
                                ": " + what);
  }

  void skip_spaces() {
    while (pos < text.size() && text[pos] == ' ') ++pos;
  }

  bool eat(std::string_view s) {
    if (text.substr(pos, s.size()) != s) return false;
    pos += s.size();
    return true;
  }

  BoolFormula formula() {
    skip_spaces();
    if (eat("0")) return BoolFormula::lit(false);
    if (eat("1")) return BoolFormula::lit(true);
    if (!eat("(")) fail("expected 0, 1 or (");
    skip_spaces();
    if (eat("\xc2\xac") || eat("!")) {  // ¬
      BoolFormula child = formula();
      skip_spaces();
      if (!eat(")")) fail("expected ) after negation");
      return BoolFormula::negation(std::move(child));
    }
    BoolFormula lhs = formula();
    skip_spaces();
    bool is_and;
    if (eat("\xe2\x88\xa7") || eat("&")) {  // ∧
      is_and = true;
    } else if (eat("\xe2\x88\xa8") || eat("|")) {  // ∨
      is_and = false;
    } else {
      fail("expected a connective");
    }
    BoolFormula rhs = formula();
    skip_spaces();
    if (!eat(")")) fail("expected ) after connective");
    return is_and ? BoolFormula::conjunction(std::move(lhs), std::move(rhs))
                  : BoolFormula::disjunction(std::move(lhs), std::move(rhs));
  }
};

}  // namespace

BoolFormula parse_formula(std::string_view text) {
  FormulaParser p{text};
  BoolFormula f = p.formula();
  p.skip_spaces();
  if (p.pos != text.size()) p.fail("trailing characters");
  return f;
}

bool eval_bool(const BoolFormula& f) {
  switch (f.kind()) {
    case BoolFormula::Kind::Lit: return f.value();
    case BoolFormula::Kind::Not: return !eval_bool(f.child(0));
    case BoolFormula::Kind::And:
      return eval_bool(f.child(0)) && eval_bool(f.child(1));
    case BoolFormula::Kind::Or:
      return eval_bool(f.child(0)) || eval_bool(f.child(1));
  }
  throw std::logic_error("unreachable formula kind");
}

BoolFormula eliminate_or(const BoolFormula& f) {
  switch (f.kind()) {
    case BoolFormula::Kind::Lit: return f;
    case BoolFormula::Kind::Not:
      return BoolFormula::negation(eliminate_or(f.child(0)));
    case BoolFormula::Kind::And:
      return BoolFormula::conjunction(eliminate_or(f.child(0)),
                                      eliminate_or(f.child(1)));
    case BoolFormula::Kind::Or:
      return BoolFormula::negation(BoolFormula::conjunction(
          BoolFormula::negation(eliminate_or(f.child(0))),
          BoolFormula::negation(eliminate_or(f.child(1)))));
  }
  throw std::logic_error("unreachable formula kind");
}

namespace {

void emit_bool_tokens(const BoolFormula& f, TokenSeq& out) {
  switch (f.kind()) {
    case BoolFormula::Kind::Lit:
      // x_1 * x_2 is 0 and x_1 - x_2 is 1 on both reduction rows
      out.push_back(Token::operation(f.value() ? Op::Sub : Op::Mul));
      out.push_back(Token::variable(1));
      out.push_back(Token::variable(2));
      return;
    case BoolFormula::Kind::Not:
      // (x_1 - x_2) - a reads 1 - a on both rows
      out.push_back(Token::operation(Op::Sub));
      out.push_back(Token::operation(Op::Sub));
      out.push_back(Token::variable(1));
      out.push_back(Token::variable(2));
      emit_bool_tokens(f.child(0), out);
      return;
    case BoolFormula::Kind::And:
      // a * b agrees with a ∧ b on {0, 1}
      out.push_back(Token::operation(Op::Mul));
      emit_bool_tokens(f.child(0), out);
      emit_bool_tokens(f.child(1), out);
      return;
    case BoolFormula::Kind::Or:
      throw OrPresent("encode after eliminate_or");
  }
}

}  // namespace

TokenSeq bool_to_tokens(const BoolFormula& f) {
  TokenSeq out;
  out.reserve(std::size_t(4) * std::size_t(f.node_count()));
  emit_bool_tokens(f, out);
  return out;
}

LtpInstance build_ltp_instance(const BoolFormula& f) {
  LtpInstance inst;
  inst.prefix.push_back(Token::operation(Op::Add));
  TokenSeq body = bool_to_tokens(eliminate_or(f));
  inst.prefix.insert(inst.prefix.end(), body.begin(), body.end());
  inst.data.dim = 2;
  inst.data.xs = {1.0, 0.0, 0.0, -1.0};
  inst.data.targets = {1.0, 0.0};
  return inst;
}

std::vector<LeafLoss> leaf_losses(const LtpInstance& inst, Rng& rng,
                                  const FitConfig& fit) {
  std::vector<Token> completions;
  for (int v = 1; v <= inst.data.dim; ++v)
    completions.push_back(Token::variable(v));
  completions.push_back(Token::constant());

  std::vector<LeafLoss> out;
  out.reserve(completions.size());
  for (const Token& u : completions) {
    TokenSeq seq = inst.prefix;
    seq.push_back(u);
    LeafLoss row{u, std::numeric_limits<double>::infinity(), {}};
    try {
      FitResult fr = fit_constants(seq, inst.data, fit, rng);
      row.loss = fr.loss;
      row.constants = std::move(fr.constants);
    } catch (const NonFiniteEverywhere&) {
      // keeps +inf; such a completion can never win
    }
    out.push_back(std::move(row));
  }
  return out;
}

Token solve_last_token(const LtpInstance& inst, Rng& rng,
                       const FitConfig& fit) {
  std::vector<LeafLoss> rows = leaf_losses(inst, rng, fit);
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].loss < rows[best].loss) best = i;  // strict: ties keep order
  return rows[best].token;
}

ReductionVerdict check_reduction(const BoolFormula& f, Rng& rng,
                                 const FitConfig& fit) {
  LtpInstance inst = build_ltp_instance(f);
  ReductionVerdict v;
  v.eval = eval_bool(f);
  v.losses = leaf_losses(inst, rng, fit);

  std::size_t best = 0;
  for (std::size_t i = 1; i < v.losses.size(); ++i)
    if (v.losses[i].loss < v.losses[best].loss) best = i;
  v.winner = v.losses[best].token;

  const std::size_t win = v.eval ? 1 : 0;  // x_1 carries the 0 case
  const std::size_t runner = 1 - win;
  v.winner_matches_eval = v.winner == v.losses[win].token;
  v.winning_loss_zero = std::abs(v.losses[win].loss) <= kWinLossTol;
  v.runner_up_loss_one = std::abs(v.losses[runner].loss - 1.0) <= kRunnerUpLossTol;
  v.constant_loss_separated = v.losses[2].loss >= kConstantLossFloor;
  v.pass = v.winner_matches_eval && v.winning_loss_zero &&
           v.runner_up_loss_one && v.constant_loss_separated;
  return v;
}

BoolFormula random_formula(Rng& rng, int max_depth) {
  if (max_depth < 1)
    throw std::invalid_argument("random_formula needs max_depth >= 1");
  if (max_depth == 1) return BoolFormula::lit(rng.coin(0.5));
  switch (rng.below(4)) {
    case 0: return BoolFormula::lit(rng.coin(0.5));
    case 1: return BoolFormula::negation(random_formula(rng, max_depth - 1));
    case 2: {
      BoolFormula lhs = random_formula(rng, max_depth - 1);
      BoolFormula rhs = random_formula(rng, max_depth - 1);
      return BoolFormula::conjunction(std::move(lhs), std::move(rhs));
    }
    default: {
      BoolFormula lhs = random_formula(rng, max_depth - 1);
      BoolFormula rhs = random_formula(rng, max_depth - 1);
      return BoolFormula::disjunction(std::move(lhs), std::move(rhs));
    }
  }
}

PacStats pac_simulate(const PacConfig& cfg) {
  if (cfg.universe < 1 || cfg.per_round < 1 || cfg.trials < 1)
    throw std::invalid_argument("pac config needs positive counts");
  if (cfg.depth0 < 0 || cfg.depth0 > 40)
    throw std::invalid_argument("pac depth0 out of range");
  const long long target_cap = 1LL << cfg.depth0;
  if (cfg.targets < 0 || cfg.targets > target_cap || target_cap > cfg.universe)
    throw std::invalid_argument("pac config needs targets <= 2^depth0 <= universe");
  if (!(cfg.beta > 0.0 && cfg.beta <= 1.0))
    throw std::invalid_argument("pac beta must lie in (0, 1]");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0))
    throw std::invalid_argument("pac delta must lie in (0, 1)");

  PacStats stats;
  stats.trials = cfg.trials;
  const double per_item = double(cfg.universe) / double(cfg.per_round);
  stats.burn_in_rounds = int(
      std::ceil(per_item * std::log(std::ldexp(2.0, cfg.depth0) / cfg.delta)));
  stats.post_rounds = int(std::ceil(std::log(2.0 / cfg.delta) / cfg.beta));

  // Scratch permutation of the library; partial Fisher-Yates draws move seen
  // items to the tail. Swaps only permute, so one allocation serves every
  // trial without re-seeding.
  std::vector<int> items(std::size_t(cfg.universe));
  std::iota(items.begin(), items.end(), 0);

  for (int trial = 0; trial < cfg.trials; ++trial) {
    Rng trial_rng = Rng(cfg.seed).split("pac-trial", std::uint64_t(trial));
    std::size_t unseen = items.size();
    int missing = cfg.targets;  // items 0 .. targets-1 are the required ones
    for (int round = 0; round < stats.burn_in_rounds; ++round) {
      std::size_t take = std::min(std::size_t(cfg.per_round), unseen);
      for (std::size_t j = 0; j < take; ++j) {
        std::size_t pick = std::size_t(trial_rng.below(unseen));
        std::swap(items[pick], items[unseen - 1]);
        if (items[unseen - 1] < cfg.targets) --missing;
        --unseen;
      }
    }
    bool hit = false;
    for (int round = 0; round < stats.post_rounds; ++round)
      if (trial_rng.coin(cfg.beta)) hit = true;
    if (missing > 0)
      ++stats.burn_in_failures;
    else if (!hit)
      ++stats.post_failures;
  }

  stats.failure_rate =
      double(stats.burn_in_failures + stats.post_failures) / double(cfg.trials);
  stats.mean_oracle_calls = double(stats.burn_in_rounds + stats.post_rounds);
  return stats;
}

}  // namespace srlab
