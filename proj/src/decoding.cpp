#include "srlab/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <stdexcept>
#include <utility>

#include "srlab/errors.hpp"

namespace srlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct BeamItem {
  TokenSeq tokens;
  double logp = 0.0;
  int deficit = 1;
};

// The token-wise argmax path, first token on ties, restricted to tokens the
// sequence can still complete under. Empty when the walk dead-ends.
std::optional<BeamItem> greedy_walk(const Policy& policy, int max_len,
                                    const Dataset* data,
                                    const TokenSeq* prompt, BeamItem item) {
  while (item.deficit > 0) {
    std::optional<TokenProb> best;
    for (const TokenProb& tp :
         policy.next_token_dist(item.tokens, data, prompt)) {
      if (!(tp.prob > 0.0) || !tp.token.is_expression_token()) continue;
      const int child_deficit = item.deficit + tp.token.arity() - 1;
      if (static_cast<int>(item.tokens.size()) + 1 + child_deficit > max_len)
        continue;
      if (!best || tp.prob > best->prob) best = tp;
    }
    if (!best) return std::nullopt;
    item.logp += std::log(best->prob);
    item.deficit += best->token.arity() - 1;
    item.tokens.push_back(best->token);
  }
  return item;
}

double reward_from_predictions(std::span<const double> y,
                               std::span<const double> yhat,
                               std::size_t seq_len, double lambda,
                               int length_scale) {
  for (double v : yhat)
    if (!std::isfinite(v)) return 0.0;
  const double fit_term = 1.0 / (1.0 + nmse(y, yhat));
  const double len_term =
      std::exp(-static_cast<double>(seq_len) / static_cast<double>(length_scale));
  return fit_term + lambda * len_term;
}

}  // namespace

std::vector<BeamCandidate> beam_enumerate(const Policy& policy, int beam_size,
                                          int max_len, const Dataset* data,
                                          const TokenSeq* prompt,
                                          const TokenSeq& prefix) {
  if (beam_size < 1) throw std::invalid_argument("beam width must be positive");
  if (max_len < 1) throw std::invalid_argument("max_len must be positive");
  const int start_deficit = checked_deficit(prefix);
  if (static_cast<int>(prefix.size()) + start_deficit > max_len) return {};

  // Both halves of the result are independent of the width: the greedy
  // completion always takes the first slot, and the rest fill in a fixed
  // global order. Width one is therefore exactly the greedy path, and the
  // width-b set is contained in every wider one.
  std::optional<BeamItem> greedy = greedy_walk(
      policy, max_len, data, prompt, BeamItem{prefix, 0.0, start_deficit});

  auto pops_later = [](const BeamItem& a, const BeamItem& b) {
    if (a.logp != b.logp) return a.logp < b.logp;
    if (a.tokens.size() != b.tokens.size())
      return a.tokens.size() > b.tokens.size();
    return a.tokens > b.tokens;
  };
  std::priority_queue<BeamItem, std::vector<BeamItem>, decltype(pops_later)>
      frontier(pops_later);
  frontier.push({prefix, 0.0, start_deficit});

  std::vector<BeamItem> completed;
  if (greedy) completed.push_back(*greedy);
  while (!frontier.empty() &&
         static_cast<int>(completed.size()) < beam_size) {
    BeamItem item = frontier.top();
    frontier.pop();
    if (item.deficit == 0) {
      if (!greedy || item.tokens != greedy->tokens)
        completed.push_back(std::move(item));
      continue;
    }
    for (const TokenProb& tp :
         policy.next_token_dist(item.tokens, data, prompt)) {
      if (!(tp.prob > 0.0) || !tp.token.is_expression_token()) continue;
      const int child_deficit = item.deficit + tp.token.arity() - 1;
      if (static_cast<int>(item.tokens.size()) + 1 + child_deficit > max_len)
        continue;
      BeamItem child{item.tokens, item.logp + std::log(tp.prob),
                     child_deficit};
      child.tokens.push_back(tp.token);
      frontier.push(std::move(child));
    }
  }

  std::sort(completed.begin(), completed.end(),
            [](const BeamItem& a, const BeamItem& b) {
              if (a.logp != b.logp) return a.logp > b.logp;
              if (a.tokens.size() != b.tokens.size())
                return a.tokens.size() < b.tokens.size();
              return a.tokens < b.tokens;
            });
  std::vector<BeamCandidate> out;
  out.reserve(completed.size());
  for (BeamItem& item : completed)
    out.push_back({std::move(item.tokens), item.logp});
  return out;
}

double reward(const Expr& e, const Dataset& data, double lambda,
              int length_scale) {
  const std::vector<double> yhat = predict(e, data);
  return reward_from_predictions(data.targets, yhat, serialize(e).size(),
                                 lambda, length_scale);
}

Prediction beam_decode(const Policy& policy, const Dataset& data,
                       const BeamConfig& cfg, Rng& rng,
                       const TokenSeq* prompt) {
  struct Ranked {
    TokenSeq tokens;
    std::vector<double> constants;
    double r2 = kNegInf;
    double logp = kNegInf;
  };
  auto ranked_before = [](const Ranked& a, const Ranked& b) {
    if (a.r2 != b.r2) return a.r2 > b.r2;
    if (a.logp != b.logp) return a.logp > b.logp;
    if (a.tokens.size() != b.tokens.size())
      return a.tokens.size() < b.tokens.size();
    return a.tokens < b.tokens;
  };

  std::optional<Ranked> best;
  for (const BeamCandidate& cand :
       beam_enumerate(policy, cfg.beam_size, cfg.max_len, &data, prompt)) {
    Ranked r;
    r.tokens = cand.tokens;
    r.logp = cand.logp;
    try {
      r.constants = fit_constants(cand.tokens, data, cfg.fit, rng).constants;
    } catch (const NonFiniteEverywhere&) {
      continue;
    }
    r.r2 = r2_or_worst(data.targets,
                       predict(deserialize(r.tokens), data, r.constants));
    if (!std::isfinite(r.r2)) continue;
    if (!best || ranked_before(r, *best)) best = std::move(r);
  }
  if (!best) throw NoFiniteCandidate("beam produced nothing with a finite r2");

  Prediction out;
  out.tokens = std::move(best->tokens);
  out.expr = deserialize(out.tokens);
  out.constants = std::move(best->constants);
  out.r2_fit = best->r2;
  out.strategy = "beam";
  out.candidates_generated = cfg.beam_size;
  return out;
}

namespace {

struct MctsEdge {
  Token token;
  double prior = 0.0;
  int visits = 0;
  double q = 0.0;
  int child = -1;  // arena index, -1 until first traversal
  int deficit = 0; // deficit after appending the token
};

struct MctsNode {
  TokenSeq prefix;
  int deficit = 1;
  int visits = 0;
  std::vector<MctsEdge> edges;
};

// Q + c_puct * prior * sqrt(N(s)) / (1 + N(s,a)); first edge wins ties, and
// edges are laid out by prior descending then token order, so unvisited
// nodes start from the most probable continuation.
int pick_edge(const MctsNode& node, double c_puct) {
  const double root_term = std::sqrt(static_cast<double>(node.visits));
  int best = 0;
  double best_score = kNegInf;
  for (int i = 0; i < static_cast<int>(node.edges.size()); ++i) {
    const MctsEdge& e = node.edges[i];
    const double score =
        e.q + c_puct * e.prior * root_term / (1.0 + static_cast<double>(e.visits));
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

void expand_node(MctsNode& node, const Policy& policy, const Dataset& data,
                 const TokenSeq* prompt, int k_max, int max_len) {
  std::vector<TokenProb> options;
  for (const TokenProb& tp : policy.next_token_dist(node.prefix, &data, prompt)) {
    if (!(tp.prob > 0.0) || !tp.token.is_expression_token()) continue;
    const int d = node.deficit + tp.token.arity() - 1;
    if (static_cast<int>(node.prefix.size()) + 1 + d > max_len) continue;
    options.push_back(tp);
  }
  std::stable_sort(options.begin(), options.end(),
                   [](const TokenProb& a, const TokenProb& b) {
                     return a.prob > b.prob;
                   });
  if (static_cast<int>(options.size()) > k_max)
    options.resize(static_cast<std::size_t>(k_max));
  node.edges.reserve(options.size());
  for (const TokenProb& tp : options)
    node.edges.push_back(
        {tp.token, tp.prob, 0, 0.0, -1, node.deficit + tp.token.arity() - 1});
}

struct ScoredSequence {
  std::vector<double> constants;
  double reward = 0.0;
  double r2 = kNegInf;
  bool rankable = false;
};

}  // namespace

Prediction mcts_decode(const Policy& policy, const Dataset& data,
                       const MctsConfig& cfg, Rng& rng, const TokenSeq* prompt,
                       std::vector<MctsTraceRow>* trace,
                       std::vector<TokenSeq>* simulated) {
  if (cfg.rollouts < 1) throw std::invalid_argument("rollouts must be positive");
  if (cfg.k_max < 1) throw std::invalid_argument("k_max must be positive");
  if (cfg.beam_size < 1)
    throw std::invalid_argument("completion width must be positive");
  if (cfg.max_len < 1) throw std::invalid_argument("max_len must be positive");
  if (cfg.c_puct < 0.0)
    throw std::invalid_argument("c_puct must be nonnegative");
  if (cfg.lambda < 0.0)
    throw std::invalid_argument("lambda must be nonnegative");
  if (cfg.simulation_budget < 0)
    throw std::invalid_argument("simulation budget must be nonnegative");

  // Sequences recur across simulations, so fit each one once.
  std::map<std::string, ScoredSequence> cache;
  auto score_sequence = [&](const TokenSeq& seq) -> const ScoredSequence& {
    auto [it, fresh] = cache.try_emplace(join_tokens(seq));
    ScoredSequence& sc = it->second;
    if (!fresh) return sc;
    try {
      sc.constants = fit_constants(seq, data, cfg.fit, rng).constants;
    } catch (const NonFiniteEverywhere&) {
      return sc;  // keeps reward 0, unrankable
    }
    const std::vector<double> yhat =
        predict(deserialize(seq), data, sc.constants);
    sc.reward = reward_from_predictions(data.targets, yhat, seq.size(),
                                        cfg.lambda, cfg.max_len);
    sc.r2 = r2_or_worst(data.targets, yhat);
    sc.rankable = std::isfinite(sc.r2);
    return sc;
  };

  struct Best {
    TokenSeq tokens;
    std::vector<double> constants;
    double reward = 0.0;
    double r2 = kNegInf;
    bool set = false;
  } best;
  auto absorb = [&](const TokenSeq& seq) {
    const ScoredSequence& sc = score_sequence(seq);
    if (simulated) simulated->push_back(seq);
    if (sc.rankable && (!best.set || sc.reward > best.reward))
      best = {seq, sc.constants, sc.reward, sc.r2, true};
    return sc.reward;
  };

  int sims_done = 0;
  TokenSeq committed;
  int committed_deficit = 1;
  int step = 0;

  while (committed_deficit > 0 &&
         static_cast<int>(committed.size()) + committed_deficit <= cfg.max_len) {
    std::vector<MctsNode> arena;
    arena.push_back({committed, committed_deficit, 0, {}});
    expand_node(arena[0], policy, data, prompt, cfg.k_max, cfg.max_len);
    if (arena[0].edges.empty()) break;  // nothing completable from here

    int ran = 0;
    for (int i = 0; i < cfg.rollouts; ++i) {
      if (cfg.simulation_budget > 0 && sims_done >= cfg.simulation_budget)
        break;
      ++sims_done;
      ++ran;

      int node_idx = 0;
      std::vector<std::pair<int, int>> taken;
      std::vector<int> visited{0};
      double sim_reward = 0.0;
      for (;;) {
        if (arena[node_idx].edges.empty()) break;  // dead end scores zero
        const int ei = pick_edge(arena[node_idx], cfg.c_puct);
        taken.emplace_back(node_idx, ei);
        if (arena[node_idx].edges[ei].deficit == 0) {
          TokenSeq cand = arena[node_idx].prefix;
          cand.push_back(arena[node_idx].edges[ei].token);
          sim_reward = absorb(cand);
          break;
        }
        if (arena[node_idx].edges[ei].child < 0) {
          MctsNode child;
          child.prefix = arena[node_idx].prefix;
          child.prefix.push_back(arena[node_idx].edges[ei].token);
          child.deficit = arena[node_idx].edges[ei].deficit;
          arena.push_back(std::move(child));
          const int child_idx = static_cast<int>(arena.size()) - 1;
          arena[node_idx].edges[ei].child = child_idx;
          expand_node(arena[child_idx], policy, data, prompt, cfg.k_max,
                      cfg.max_len);
          visited.push_back(child_idx);
          for (const BeamCandidate& c :
               beam_enumerate(policy, cfg.beam_size, cfg.max_len, &data,
                              prompt, arena[child_idx].prefix))
            sim_reward = std::max(sim_reward, absorb(c.tokens));
          break;
        }
        node_idx = arena[node_idx].edges[ei].child;
        visited.push_back(node_idx);
      }

      for (auto [ni, ei] : taken) {
        MctsEdge& e = arena[ni].edges[ei];
        e.q = std::max(e.q, sim_reward);
        ++e.visits;
        if (trace)
          trace->push_back({step, sims_done, join_tokens(arena[ni].prefix),
                            token_text(e.token), e.q});
      }
      for (int ni : visited) ++arena[ni].visits;
    }
    if (ran == 0) break;  // budget exhausted before this step started

    const MctsNode& root = arena[0];
    int pick = 0;
    for (int i = 1; i < static_cast<int>(root.edges.size()); ++i) {
      const MctsEdge& a = root.edges[i];
      const MctsEdge& b = root.edges[pick];
      const bool wins = a.q != b.q          ? a.q > b.q
                        : a.visits != b.visits ? a.visits > b.visits
                                               : a.token < b.token;
      if (wins) pick = i;
    }
    committed.push_back(root.edges[pick].token);
    committed_deficit = root.edges[pick].deficit;
    ++step;
  }

  if (!best.set)
    throw NoFiniteCandidate("search produced nothing with a finite r2");

  Prediction out;
  out.tokens = std::move(best.tokens);
  out.expr = deserialize(out.tokens);
  out.constants = std::move(best.constants);
  out.r2_fit = best.r2;
  out.strategy = "mcts";
  out.candidates_generated = sims_done * cfg.beam_size;
  return out;
}

}  // namespace srlab
