#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "srlab/datagen.hpp"
#include "srlab/decoding.hpp"
#include "srlab/policy.hpp"
#include "srlab/rng.hpp"

namespace srlab {

// One pool row: a candidate subtree, its verification score z (the running
// mean reward over the predictions that contained it), and that containment
// count c.
struct PoolEntry {
  Expr subtree;
  double z = 0.0;
  int c = 0;
};

// State of the verified-subtree feedback loop. Subtrees are unique under
// structural equality, so constant placeholders in different positions keep
// separate scores while repeated shapes collapse into one running mean.
class CandidatePool {
 public:
  // Folds one scored prediction in: every distinct subtree of the prediction
  // either enters as (reward, 1) or moves to ((c*z + reward)/(c+1), c+1).
  // A non-finite reward contributes 0 but still counts, so failed fits drag
  // a subtree's mean down instead of vanishing from its record.
  void update(const Expr& prediction, double reward);

  // The k best entries by score, ties preferring higher count and then
  // smaller structural key, keeping only entries with z >= z_thres.
  std::vector<PoolEntry> top_k(int k, double z_thres) const;

  const PoolEntry* find(const Expr& subtree) const;

  const std::map<std::string, PoolEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::map<std::string, PoolEntry> entries_;  // keyed by structural_key
};

// Uniform draw without replacement from the subtrees of e that serialize to
// at most l_max tokens. Returns fewer than count when the expression has
// fewer eligible subtrees, and an empty list when it has none.
std::vector<Expr> extract_subtrees(const Expr& e, Rng& rng, int count,
                                   int l_max);

struct GvsConfig {
  int top_k = 39;          // size of the high-scored subtree set
  int rand_k = 9;          // size of the freshly sampled subtree set
  double z_thres = 0.213;  // score floor applied to the high-scored set only
  int l_max = 9;           // longest subtree serialization allowed in a prompt
  int iterations = 30;     // T

  // Prompt budget at iteration t is drawn from U(0, floor(a + b*t)).
  double length_intercept = 15.58;
  double length_slope = 0.42;

  GenConfig sampler;  // expression prior behind the random subtree draws
  BeamConfig beam;    // inner decoder; beam.beam_size is the b in T*b
  std::optional<MctsConfig> mcts;  // decode iterations with MCTS when set
};

// Upper end of the prompt-length draw at iteration t, never negative.
int prompt_length_bound(const GvsConfig& cfg, int t);

// Assembles the iteration-t prompt: merges the pool's top entries with
// rand_k single-subtree draws from fresh sampler expressions, then picks
// from the merged set uniformly without replacement, wrapping each pick in
// <p> ... </p> and skipping any longer than l_max, until the picked
// subtrees' total token count reaches the drawn budget l_t (the pick that
// crosses the budget is kept). t = 1 yields the empty prompt.
TokenSeq build_prompt(const CandidatePool& pool, Rng& rng, int t,
                      const GvsConfig& cfg);

// One replay-log row per iteration. A failed iteration (the inner decoder
// found nothing with a finite r2) keeps an empty prediction and a NaN score,
// which replays as "no pool update".
struct GvsReplayRow {
  int t = 0;
  TokenSeq prompt;
  TokenSeq prediction;
  double r2 = std::numeric_limits<double>::quiet_NaN();
};

// The full loop: for t = 1..T build the prompt, decode with it, verify by
// r2 on data, fold the scored prediction into the pool, and keep the best
// prediction by r2 (first winner on ties). Throws NoFiniteCandidate only
// when every iteration fails. candidates_generated is always T times the
// inner decoder's beam width.
Prediction run_gvs(const Policy& policy, const Dataset& data,
                   const GvsConfig& cfg, Rng& rng,
                   std::vector<GvsReplayRow>* replay = nullptr,
                   CandidatePool* pool_out = nullptr);

}  // namespace srlab
