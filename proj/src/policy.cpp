#include "srlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "srlab/errors.hpp"
#include "srlab/expr.hpp"
#include "srlab/fitting.hpp"
#include "srlab/rng.hpp"

namespace srlab {

namespace {

std::uint64_t encode_token(const Token& t) {
  return (std::uint64_t(t.kind) << 32) ^ (std::uint64_t(std::uint32_t(t.var)) << 8) ^
         std::uint64_t(t.op);
}

double hash01(std::uint64_t h) { return double(h >> 11) * 0x1.0p-53; }

std::vector<Token> sorted_legal(const Vocabulary& vocab, int deficit) {
  std::vector<Token> legal = legal_tokens(vocab, deficit);
  std::sort(legal.begin(), legal.end());
  return legal;
}

std::vector<TokenProb> uniform_dist(const std::vector<Token>& legal) {
  std::vector<TokenProb> out;
  out.reserve(legal.size());
  double p = 1.0 / double(legal.size());
  for (const Token& t : legal) out.push_back({t, p});
  return out;
}

}  // namespace

int checked_deficit(const TokenSeq& prefix) {
  int d = prefix_deficit(prefix);
  if (d < 0) throw IllegalPrefix(join_tokens(prefix));
  return d;
}

std::vector<TokenProb> UniformPolicy::dist(const TokenSeq& prefix,
                                           const Dataset*,
                                           const TokenSeq*) const {
  return uniform_dist(sorted_legal(vocab_, checked_deficit(prefix)));
}

// --- memory policy -----------------------------------------------------------

void MemoryPolicy::Trie::insert(const TokenSeq& seq, double w) {
  std::size_t cur = 0;
  nodes[cur].weight += w;
  auto step = [&](const Token& t) {
    auto it = nodes[cur].kids.find(t);
    if (it == nodes[cur].kids.end()) {
      nodes.emplace_back();
      it = nodes[cur].kids.emplace(t, nodes.size() - 1).first;
    }
    cur = it->second;
    nodes[cur].weight += w;
  };
  for (const Token& t : seq) step(t);
  step(Token::end());
}

const MemoryPolicy::Trie::Node* MemoryPolicy::Trie::walk(
    const TokenSeq& prefix) const {
  std::size_t cur = 0;
  for (const Token& t : prefix) {
    auto it = nodes[cur].kids.find(t);
    if (it == nodes[cur].kids.end()) return nullptr;
    cur = it->second;
  }
  return &nodes[cur];
}

MemoryPolicy::MemoryPolicy(Vocabulary vocab, std::vector<TokenSeq> templates,
                           double alpha, bool dataset_aware, double tau)
    : vocab_(std::move(vocab)),
      templates_(std::move(templates)),
      alpha_(alpha),
      dataset_aware_(dataset_aware),
      tau_(tau),
      cache_(std::make_unique<TrieCache>()) {
  if (templates_.empty())
    throw std::invalid_argument("memory policy needs a nonempty template set");
  if (!(alpha_ >= 0.0))
    throw std::invalid_argument("smoothing mass must be nonnegative");
  if (!(tau_ > 0.0))
    throw std::invalid_argument("weighting temperature must be positive");
  template_exprs_.reserve(templates_.size());
  for (const TokenSeq& seq : templates_)
    template_exprs_.push_back(deserialize(seq));  // validates well-formedness
  base_trie_ =
      build_trie(templates_, std::vector<double>(templates_.size(), 1.0));
}

std::shared_ptr<const MemoryPolicy::Trie> MemoryPolicy::build_trie(
    const std::vector<TokenSeq>& templates, const std::vector<double>& w) {
  auto trie = std::make_shared<Trie>();
  trie->nodes.emplace_back();
  for (std::size_t i = 0; i < templates.size(); ++i)
    if (w[i] > 0.0) trie->insert(templates[i], w[i]);
  return trie;
}

std::vector<double> MemoryPolicy::template_weights(const Dataset& data) const {
  std::vector<double> scores(templates_.size());
  for (std::size_t i = 0; i < templates_.size(); ++i) {
    const Expr& e = template_exprs_[i];
    std::vector<double> ones(std::size_t(e.placeholder_count()), 1.0);
    scores[i] = r2_or_worst(data.targets, predict(e, data, ones));
  }
  double best = -std::numeric_limits<double>::infinity();
  for (double s : scores)
    if (std::isfinite(s)) best = std::max(best, s);
  std::vector<double> w(scores.size(), 1.0);
  // no template produced a usable score: keep the unweighted corpus
  if (!std::isfinite(best)) return w;
  for (std::size_t i = 0; i < scores.size(); ++i)
    w[i] = std::isfinite(scores[i]) ? std::exp((scores[i] - best) / tau_) : 0.0;
  return w;
}

std::shared_ptr<const MemoryPolicy::Trie> MemoryPolicy::trie_for(
    const Dataset* data) const {
  if (data == nullptr || !dataset_aware_) return base_trie_;
  std::uint64_t key = data->content_hash();
  std::lock_guard<std::mutex> lock(cache_->mutex);
  auto it = cache_->by_hash.find(key);
  if (it != cache_->by_hash.end()) return it->second;
  auto trie = build_trie(templates_, template_weights(*data));
  cache_->by_hash.emplace(key, trie);
  return trie;
}

std::vector<TokenProb> MemoryPolicy::dist(const TokenSeq& prefix,
                                          const Dataset* data,
                                          const TokenSeq*) const {
  int deficit = checked_deficit(prefix);
  std::vector<Token> legal = sorted_legal(vocab_, deficit);
  auto trie = trie_for(data);
  const Trie::Node* node = trie->walk(prefix);
  if (node == nullptr || node->weight <= 0.0) return uniform_dist(legal);

  std::vector<TokenProb> out;
  out.reserve(legal.size());
  double share = alpha_ > 0.0 ? alpha_ / double(legal.size()) : 0.0;
  double total = 0.0;
  for (const Token& t : legal) {
    double w = share;
    auto it = node->kids.find(t);
    if (it != node->kids.end()) w += trie->nodes[it->second].weight;
    out.push_back({t, w});
    total += w;
  }
  // corpus mass can sit entirely outside the legal set only for foreign
  // templates; back off rather than emit a zero distribution
  if (total <= 0.0) return uniform_dist(legal);
  for (TokenProb& tp : out) tp.prob /= total;
  return out;
}

MemoryPolicy train_memory_policy(const Corpus& corpus, double alpha,
                                 Vocabulary vocab, bool dataset_aware) {
  std::vector<TokenSeq> seqs;
  seqs.reserve(corpus.size());
  for (const Expr& t : corpus.templates()) seqs.push_back(serialize(t));
  return MemoryPolicy(std::move(vocab), std::move(seqs), alpha, dataset_aware);
}

// --- splicing wrapper --------------------------------------------------------

namespace {
constexpr std::uint64_t kSpliceSalt = 0x73706c696365;  // stream label
constexpr std::uint64_t kCoinSalt = 0x636f696e;
constexpr std::uint64_t kPickSalt = 0x7069636b;
constexpr std::uint64_t kSectionBreak = 0x2f;
}  // namespace

SplicingPolicy::SplicingPolicy(std::shared_ptr<const Policy> base,
                               double splice_prob, int max_len,
                               std::uint64_t seed)
    : base_(std::move(base)),
      splice_prob_(splice_prob),
      max_len_(max_len),
      seed_(seed) {
  if (base_ == nullptr) throw std::invalid_argument("splicing needs a base policy");
  if (!(splice_prob_ >= 0.0 && splice_prob_ <= 1.0))
    throw std::invalid_argument("splice probability must lie in [0, 1]");
  if (max_len_ < 1) throw std::invalid_argument("max_len must be positive");
}

std::vector<TokenSeq> SplicingPolicy::prompt_segments(const TokenSeq& prompt) {
  bool marked = false;
  for (const Token& t : prompt)
    if (t.kind == Token::Kind::PromptStart || t.kind == Token::Kind::PromptEnd)
      marked = true;
  std::vector<TokenSeq> out;
  if (!marked) {
    if (is_complete_serialization(prompt)) out.push_back(prompt);
    return out;
  }
  TokenSeq cur;
  bool open = false;
  for (const Token& t : prompt) {
    if (t.kind == Token::Kind::PromptStart) {
      cur.clear();
      open = true;
    } else if (t.kind == Token::Kind::PromptEnd) {
      if (open && is_complete_serialization(cur)) out.push_back(cur);
      open = false;
    } else if (open) {
      cur.push_back(t);
    }
  }
  return out;
}

SplicingPolicy::Commit SplicingPolicy::committed_state(
    const TokenSeq& prefix, const std::vector<TokenSeq>& segments) const {
  auto fresh = [&](std::uint64_t h, std::size_t len, int deficit) -> Commit {
    if (deficit < 1) return {};
    if (hash01(Rng::mix(h, kCoinSalt)) >= splice_prob_) return {};
    std::vector<int> eligible;
    for (std::size_t k = 0; k < segments.size(); ++k) {
      // the segment plus one token per remaining open slot must still fit
      if (len + segments[k].size() + std::size_t(deficit - 1) <=
          std::size_t(max_len_))
        eligible.push_back(int(k));
    }
    if (eligible.empty()) return {};
    std::uint64_t pick = Rng::mix(h, kPickSalt);
    return {eligible[pick % eligible.size()], 0};
  };

  std::uint64_t h = Rng::mix(seed_, kSpliceSalt);
  for (const TokenSeq& s : segments) {
    for (const Token& t : s) h = Rng::mix(h, encode_token(t));
    h = Rng::mix(h, kSectionBreak);
  }
  h = Rng::mix(h, kSectionBreak);
  int deficit = 1;
  Commit st = fresh(h, 0, deficit);
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    const Token& t = prefix[i];
    bool continued = false;
    if (st.segment >= 0) {
      const TokenSeq& s = segments[std::size_t(st.segment)];
      if (s[std::size_t(st.pos)] == t && st.pos + 1 < int(s.size())) {
        ++st.pos;
        continued = true;
      }
    }
    h = Rng::mix(h, encode_token(t));
    deficit += t.arity() - 1;
    // a finished or diverged splice leaves a free point; a new coin may fire
    if (!continued) st = fresh(h, i + 1, deficit);
  }
  return st;
}

std::vector<TokenProb> SplicingPolicy::dist(const TokenSeq& prefix,
                                            const Dataset* data,
                                            const TokenSeq* prompt) const {
  checked_deficit(prefix);
  if (splice_prob_ > 0.0 && prompt != nullptr && !prompt->empty()) {
    std::vector<TokenSeq> segments = prompt_segments(*prompt);
    const std::vector<Token> et = vocabulary().expression_tokens();
    std::erase_if(segments, [&](const TokenSeq& s) {
      for (const Token& t : s)
        if (std::find(et.begin(), et.end(), t) == et.end()) return true;
      return false;
    });
    if (!segments.empty()) {
      Commit st = committed_state(prefix, segments);
      if (st.segment >= 0)
        return {{segments[std::size_t(st.segment)][std::size_t(st.pos)], 1.0}};
    }
  }
  return base_->next_token_dist(prefix, data, prompt);
}

}  // namespace srlab
