#include "srlab/gvs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "srlab/errors.hpp"

namespace srlab {

void CandidatePool::update(const Expr& prediction, double reward) {
  double contribution = std::isfinite(reward) ? reward : 0.0;
  for (Expr& sub : subtrees(prediction)) {
    std::string key = structural_key(sub);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      entries_.emplace(std::move(key),
                       PoolEntry{std::move(sub), contribution, 1});
    } else {
      PoolEntry& row = it->second;
      row.z = (double(row.c) * row.z + contribution) / double(row.c + 1);
      row.c += 1;
    }
  }
}

std::vector<PoolEntry> CandidatePool::top_k(int k, double z_thres) const {
  if (k <= 0) return {};

  std::vector<std::pair<const std::string*, const PoolEntry*>> rows;
  rows.reserve(entries_.size());
  for (const auto& [key, entry] : entries_) rows.emplace_back(&key, &entry);
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second->z != b.second->z) return a.second->z > b.second->z;
    if (a.second->c != b.second->c) return a.second->c > b.second->c;
    return *a.first < *b.first;
  });
  if (rows.size() > std::size_t(k)) rows.resize(std::size_t(k));

  std::vector<PoolEntry> out;
  for (const auto& [key, entry] : rows)
    if (entry->z >= z_thres) out.push_back(*entry);
  return out;
}

const PoolEntry* CandidatePool::find(const Expr& subtree) const {
  auto it = entries_.find(structural_key(subtree));
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<Expr> extract_subtrees(const Expr& e, Rng& rng, int count,
                                   int l_max) {
  if (count <= 0) return {};

  std::vector<Expr> eligible;
  for (Expr& sub : subtrees(e))
    if (int(serialize(sub).size()) <= l_max) eligible.push_back(std::move(sub));

  // partial Fisher-Yates: the first `take` slots end up as a uniform
  // without-replacement sample
  int take = std::min<int>(count, int(eligible.size()));
  for (int i = 0; i < take; ++i) {
    int j = i + int(rng.below(std::uint64_t(eligible.size() - std::size_t(i))));
    std::swap(eligible[i], eligible[std::size_t(j)]);
  }
  eligible.resize(std::size_t(take));
  return eligible;
}

int prompt_length_bound(const GvsConfig& cfg, int t) {
  double bound =
      std::floor(cfg.length_intercept + cfg.length_slope * double(t));
  return bound > 0.0 ? int(bound) : 0;
}

TokenSeq build_prompt(const CandidatePool& pool, Rng& rng, int t,
                      const GvsConfig& cfg) {
  if (cfg.top_k < 0 || cfg.rand_k < 0)
    throw std::invalid_argument("subtree set sizes must be non-negative");
  if (t <= 1) return {};

  double l_t = rng.uniform(0.0, double(prompt_length_bound(cfg, t)));

  // merged candidate set, deduplicated under structural identity; map order
  // keeps the later uniform draws deterministic
  std::map<std::string, Expr> merged;
  for (PoolEntry& row : pool.top_k(cfg.top_k, cfg.z_thres))
    merged.emplace(structural_key(row.subtree), std::move(row.subtree));
  for (int i = 0; i < cfg.rand_k; ++i) {
    Expr fresh = sample_expression(rng, cfg.sampler);
    std::vector<Expr> one = extract_subtrees(fresh, rng, 1, cfg.l_max);
    if (!one.empty())
      merged.emplace(structural_key(one.front()), std::move(one.front()));
  }

  std::vector<Expr> remaining;
  remaining.reserve(merged.size());
  for (auto& [key, sub] : merged) remaining.push_back(std::move(sub));

  TokenSeq prompt;
  int total = 0;
  while (double(total) < l_t && !remaining.empty()) {
    std::size_t idx = std::size_t(rng.below(remaining.size()));
    Expr pick = std::move(remaining[idx]);
    remaining.erase(remaining.begin() + std::ptrdiff_t(idx));

    TokenSeq body = serialize(pick);
    if (int(body.size()) > cfg.l_max) continue;

    prompt.push_back(Token::prompt_start());
    prompt.insert(prompt.end(), body.begin(), body.end());
    prompt.push_back(Token::prompt_end());
    total += int(body.size());
  }
  return prompt;
}

Prediction run_gvs(const Policy& policy, const Dataset& data,
                   const GvsConfig& cfg, Rng& rng,
                   std::vector<GvsReplayRow>* replay,
                   CandidatePool* pool_out) {
  if (cfg.iterations < 1)
    throw std::invalid_argument("gvs needs at least one iteration");
  if (cfg.top_k < 0 || cfg.rand_k < 0)
    throw std::invalid_argument("subtree set sizes must be non-negative");

  CandidatePool pool;
  std::optional<Prediction> best;
  for (int t = 1; t <= cfg.iterations; ++t) {
    // a fixed stream per iteration: how much one iteration consumes can
    // never shift the draws of the next
    Rng iter_rng = rng.split("gvs-iteration", std::uint64_t(t));
    Rng prompt_rng = iter_rng.split("prompt");
    Rng decode_rng = iter_rng.split("decode");

    TokenSeq prompt = build_prompt(pool, prompt_rng, t, cfg);

    GvsReplayRow row;
    row.t = t;
    row.prompt = prompt;
    try {
      Prediction pred =
          cfg.mcts ? mcts_decode(policy, data, *cfg.mcts, decode_rng, &prompt)
                   : beam_decode(policy, data, cfg.beam, decode_rng, &prompt);
      pool.update(pred.expr, pred.r2_fit);
      row.prediction = pred.tokens;
      row.r2 = pred.r2_fit;
      if (!best || pred.r2_fit > best->r2_fit) best = std::move(pred);
    } catch (const NoFiniteCandidate&) {
      // tolerated per iteration: the row keeps its empty prediction and the
      // pool is left alone
    }
    if (replay) replay->push_back(std::move(row));
  }
  if (pool_out) *pool_out = std::move(pool);
  if (!best) throw NoFiniteCandidate("every gvs iteration failed");

  int width = cfg.mcts ? cfg.mcts->beam_size : cfg.beam.beam_size;
  best->strategy = cfg.mcts ? "gvs+mcts" : "gvs";
  best->candidates_generated = cfg.iterations * width;
  return std::move(*best);
}

}  // namespace srlab
