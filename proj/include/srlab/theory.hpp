#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "srlab/dataset.hpp"
#include "srlab/fitting.hpp"
#include "srlab/rng.hpp"
#include "srlab/token.hpp"

namespace srlab {

// Immutable Boolean formula tree: literals 0/1 under not/and/or. Copies
// share structure, exactly like Expr.
class BoolFormula {
 public:
  enum class Kind : std::uint8_t { Lit, Not, And, Or };

  BoolFormula() = default;  // empty; only assignment is valid afterwards

  static BoolFormula lit(bool value);
  static BoolFormula negation(BoolFormula child);
  static BoolFormula conjunction(BoolFormula lhs, BoolFormula rhs);
  static BoolFormula disjunction(BoolFormula lhs, BoolFormula rhs);

  bool empty() const { return !node_; }
  Kind kind() const;
  bool value() const;  // Kind::Lit
  const BoolFormula& child(int i) const;
  int arity() const;

  int node_count() const;
  int depth() const;  // a bare literal has depth 1
  bool contains_or() const;

 private:
  struct Node;
  explicit BoolFormula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

bool exact_equal(const BoolFormula& a, const BoolFormula& b);

// Fully parenthesized ASCII rendering: 0, 1, (!f), (f&g), (f|g).
std::string to_string(const BoolFormula& f);

// Parses the bracket grammar over {0, 1, ∧, ∨, ¬, (, )}; the ASCII aliases
// &, |, ! name the same connectives and spaces are ignored. Bare literals
// aside, every node is parenthesized: (0) without a connective is malformed.
// Throws std::invalid_argument on anything outside the grammar.
BoolFormula parse_formula(std::string_view text);

bool eval_bool(const BoolFormula& f);

// Bottom-up rewrite or(a, b) -> not(and(not(a), not(b))). The result has no
// or-node and evaluates to the same bit; or-free input comes back unchanged.
BoolFormula eliminate_or(const BoolFormula& f);

// Prefix-order arithmetic encoding of an or-free formula:
//   0 -> [mul, x_1, x_2]        1 -> [sub, x_1, x_2]
//   and -> [mul]                not -> [sub, sub, x_1, x_2]
// On both reduction data rows below, x_1 - x_2 is 1 and x_1 * x_2 is 0, so
// the encoded body evaluates to exactly eval_bool(f) on each row. The output
// is always a complete serialization. Throws OrPresent on an or-node.
TokenSeq bool_to_tokens(const BoolFormula& f);

// One last-token prediction problem: a serialization missing exactly one
// leaf, scored by MSE over the attached rows once completed.
struct LtpInstance {
  TokenSeq prefix;  // deficit 1; any single leaf token completes it
  Dataset data;
};

// Reduction instance for a formula: prefix = [add] ++ encoded body (or-nodes
// eliminated first), data rows (x_1, x_2, y) = (1, 0, 1) and (0, -1, 0).
LtpInstance build_ltp_instance(const BoolFormula& f);

struct LeafLoss {
  Token token;
  double loss = 0.0;              // MSE of the completed sequence
  std::vector<double> constants;  // fitted values when token is C
};

// Scores every completion u in {x_1 .. x_dim, C}, in that order. The C
// completion fits its constants first; a completion whose fit never goes
// finite scores +inf.
std::vector<LeafLoss> leaf_losses(const LtpInstance& inst, Rng& rng,
                                  const FitConfig& fit = {});

// Argmin over leaf_losses; ties keep the earliest token in the fixed order.
Token solve_last_token(const LtpInstance& inst, Rng& rng,
                       const FitConfig& fit = {});

// Loss separations the reduction must exhibit on its instance.
inline constexpr double kWinLossTol = 1e-9;          // winning loss vs 0
inline constexpr double kRunnerUpLossTol = 1e-9;     // runner-up loss vs 1
inline constexpr double kConstantLossFloor = 0.25 - 1e-6;

struct ReductionVerdict {
  bool pass = false;                  // conjunction of the four clauses below
  bool winner_matches_eval = false;   // x_1 wins iff the formula is 0, x_2 iff 1
  bool winning_loss_zero = false;     // within kWinLossTol
  bool runner_up_loss_one = false;    // within kRunnerUpLossTol
  bool constant_loss_separated = false;  // C loss >= kConstantLossFloor
  bool eval = false;                  // eval_bool of the checked formula
  Token winner;
  std::vector<LeafLoss> losses;       // x_1, x_2, C
};

// Builds the reduction instance for f and verifies that solving it reads the
// formula's value back out through the loss table.
ReductionVerdict check_reduction(const BoolFormula& f, Rng& rng,
                                 const FitConfig& fit = {});

// Uniform node kind at every step; literals are forced once the depth budget
// reaches 1. max_depth must be >= 1.
BoolFormula random_formula(Rng& rng, int max_depth);

// Self-verification process: a library of `universe` subtrees, a target
// needing `targets` of them, rounds that append `per_round` uniform not yet
// seen subtrees to the prompt, and a verifier that certifies a round with
// probability beta once everything needed is present.
struct PacConfig {
  int universe = 100;    // distinct library subtrees (U)
  int per_round = 5;     // unseen draws appended per round (r)
  int depth0 = 3;        // target depth; 2^depth0 bounds the target count
  int targets = 8;       // distinct subtrees the target requires (K)
  double beta = 0.3;     // per-round verification hit probability, in (0, 1]
  double delta = 0.1;    // failure budget, in (0, 1)
  int trials = 10000;
  std::uint64_t seed = 0;
};

struct PacStats {
  int burn_in_rounds = 0;    // B = ceil((U/r) ln(2^depth0 / (delta/2)))
  int post_rounds = 0;       // R = ceil(ln(2/delta) / beta)
  int trials = 0;
  int burn_in_failures = 0;  // a required subtree never drawn in B rounds
  int post_failures = 0;     // burn-in fine, all R verification rounds missed
  double failure_rate = 0.0;       // all failures over trials
  double mean_oracle_calls = 0.0;  // rounds per trial; always B + R
};

// Monte Carlo check that the failure rate stays within delta. Each trial
// runs B burn-in rounds of without-replacement unseen draws, then R
// verification rounds that each hit with probability beta; the trial fails
// when a required subtree was never drawn or no round hit. Trials are
// seeded independently via split("pac-trial", index), so any execution
// order gives identical statistics. Throws std::invalid_argument when the
// config violates targets <= 2^depth0 <= universe or a range above.
PacStats pac_simulate(const PacConfig& cfg);

}  // namespace srlab
