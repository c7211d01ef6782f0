#pragma once

#include <optional>
#include <string>
#include <vector>

#include "srlab/dataset.hpp"
#include "srlab/expr.hpp"
#include "srlab/fitting.hpp"
#include "srlab/policy.hpp"
#include "srlab/rng.hpp"
#include "srlab/token.hpp"

namespace srlab {

struct BeamConfig {
  int beam_size = 5;
  int max_len = 60;  // token budget per sequence, completions included
  FitConfig fit;
};

struct MctsConfig {
  int rollouts = 3;    // simulations spent before each committed token
  int k_max = 3;       // expansion keeps the policy's k best continuations
  int beam_size = 1;   // completion width inside a simulation
  double lambda = 0.01;
  int max_len = 60;    // doubles as the length scale of the reward bonus
  double c_puct = 1.0;
  int simulation_budget = 0;  // > 0 caps total simulations for the query
  FitConfig fit;
};

struct Prediction {
  Expr expr;                      // placeholder skeleton of the winner
  TokenSeq tokens;                // serialize(expr)
  std::vector<double> constants;  // fitted values, serialization order
  double r2_fit = 0.0;            // against the decode dataset
  std::string strategy;
  std::optional<bool> novelty;    // left empty until an audit fills it
  int candidates_generated = 0;   // decode cost in candidate expressions
};

struct BeamCandidate {
  TokenSeq tokens;
  double logp = 0.0;
};

// Length-capped search over log-probabilities, started from `prefix` (empty
// for a fresh decode). The first slot always holds the greedy argmax
// completion; the remaining beam_size - 1 fill best-first in a fixed global
// order (better log-probability, then shorter, then lexicographic). Both
// halves are independent of the width, so width one is exactly the greedy
// path and the width-b set is contained in every wider one. Results come
// back in global rank order. The prompt is forwarded to the policy as is.
std::vector<BeamCandidate> beam_enumerate(const Policy& policy, int beam_size,
                                          int max_len,
                                          const Dataset* data = nullptr,
                                          const TokenSeq* prompt = nullptr,
                                          const TokenSeq& prefix = {});

// Fits every beam survivor and returns the one with the best r2; ties fall
// back to higher log-probability, then shorter, then lexicographic order.
// Throws NoFiniteCandidate when nothing attains a finite r2.
Prediction beam_decode(const Policy& policy, const Dataset& data,
                       const BeamConfig& cfg, Rng& rng,
                       const TokenSeq* prompt = nullptr);

// Fitting-accuracy reward with a length bonus:
//   1/(1 + nmse) + lambda * exp(-|serialize(e)| / length_scale)
// Any non-finite prediction collapses the reward to 0. The expression must
// be placeholder-free.
double reward(const Expr& e, const Dataset& data, double lambda,
              int length_scale);

// One edge update during search, recorded after backpropagation. `step` is
// the committed-token index the tree was rooted at when the row was written.
struct MctsTraceRow {
  int step = 0;
  int sim = 0;  // global simulation counter, 1-based
  std::string prefix;
  std::string token;
  double q = 0.0;
};

// Token-level tree search. Each committed token is chosen by running
// `rollouts` simulations from the current prefix (selection by
// Q + c_puct * prior * sqrt(N(s)) / (1 + N(s,a)), expansion limited to the
// k_max most probable continuations, simulation by beam completion of width
// beam_size, backpropagation by running maximum), then taking the child with
// the best Q. The answer is the best simulated expression seen anywhere, not
// the committed path. Cost is simulations times beam width.
//
// `trace` and `simulated`, when given, receive every backpropagated edge
// update and every simulated completion; both are test taps.
Prediction mcts_decode(const Policy& policy, const Dataset& data,
                       const MctsConfig& cfg, Rng& rng,
                       const TokenSeq* prompt = nullptr,
                       std::vector<MctsTraceRow>* trace = nullptr,
                       std::vector<TokenSeq>* simulated = nullptr);

}  // namespace srlab
