#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "srlab/datagen.hpp"
#include "srlab/dataset.hpp"
#include "srlab/token.hpp"

namespace srlab {

struct TokenProb {
  Token token;
  double prob;
};

// Next-token distribution contract. Every backend must return entries sorted
// by token order, with support only over the tokens legal at the prefix's
// arity deficit (End alone once the expression is complete) and probabilities
// summing to 1 within 1e-9, deterministically for fixed inputs. data and
// prompt are optional context; backends free to ignore them must still honor
// the invariants. Trained policies are read-only and safe to query from
// multiple threads.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual const Vocabulary& vocabulary() const = 0;

  std::vector<TokenProb> next_token_dist(const TokenSeq& prefix,
                                         const Dataset* data = nullptr,
                                         const TokenSeq* prompt = nullptr) const {
    return dist(prefix, data, prompt);
  }

 private:
  virtual std::vector<TokenProb> dist(const TokenSeq& prefix,
                                      const Dataset* data,
                                      const TokenSeq* prompt) const = 0;
};

// deficit of a valid partial serialization; throws IllegalPrefix otherwise
int checked_deficit(const TokenSeq& prefix);

// Uniform over the legal tokens at every prefix. Reference backend; the
// external-adapter test server mirrors it.
class UniformPolicy final : public Policy {
 public:
  explicit UniformPolicy(Vocabulary vocab) : vocab_(std::move(vocab)) {}

  const Vocabulary& vocabulary() const override { return vocab_; }

 private:
  std::vector<TokenProb> dist(const TokenSeq& prefix, const Dataset* data,
                              const TokenSeq* prompt) const override;

  Vocabulary vocab_;
};

// Trie over template serializations with continuation weights. With zero
// smoothing, any complete sequence reachable with positive probability is a
// corpus template: continuations beyond the stored ones get no mass. With
// alpha > 0 a smoothing mass of alpha (split as alpha/|legal|) is added at
// every seen prefix; unseen prefixes back off to uniform over the legal set
// regardless of alpha, which keeps search total.
//
// When a query carries a dataset and dataset_aware is on, templates are
// reweighted by softmax(r2 / tau) of their direct fit against the data
// (placeholders, if any, evaluated at 1) and the distribution is read from a
// per-dataset trie, built once and cached by dataset content hash.
class MemoryPolicy final : public Policy {
 public:
  MemoryPolicy(Vocabulary vocab, std::vector<TokenSeq> templates, double alpha,
               bool dataset_aware = true, double tau = 0.1);

  const Vocabulary& vocabulary() const override { return vocab_; }

  double alpha() const { return alpha_; }
  std::size_t template_count() const { return templates_.size(); }

 private:
  std::vector<TokenProb> dist(const TokenSeq& prefix, const Dataset* data,
                              const TokenSeq* prompt) const override;

  struct Trie {
    struct Node {
      double weight = 0.0;
      std::map<Token, std::size_t> kids;
    };
    std::vector<Node> nodes;  // nodes[0] is the root

    void insert(const TokenSeq& seq, double w);
    const Node* walk(const TokenSeq& prefix) const;
  };

  static std::shared_ptr<const Trie> build_trie(
      const std::vector<TokenSeq>& templates, const std::vector<double>& w);
  std::shared_ptr<const Trie> trie_for(const Dataset* data) const;
  std::vector<double> template_weights(const Dataset& data) const;

  Vocabulary vocab_;
  std::vector<TokenSeq> templates_;
  std::vector<Expr> template_exprs_;
  double alpha_;
  bool dataset_aware_;
  double tau_;
  std::shared_ptr<const Trie> base_trie_;

  // held behind a pointer so trained policies stay movable
  struct TrieCache {
    std::mutex mutex;
    std::map<std::uint64_t, std::shared_ptr<const Trie>> by_hash;
  };
  std::unique_ptr<TrieCache> cache_;
};

MemoryPolicy train_memory_policy(const Corpus& corpus, double alpha,
                                 Vocabulary vocab,
                                 bool dataset_aware = true);

// Wraps a base policy with verbatim subtree splicing driven by the query
// prompt. At any free generation point with an open slot, with probability
// splice_prob it commits to one prompted subtree whose serialization still
// fits (|prefix| + |subtree| + remaining slots <= max_len) and emits it token
// by token with probability 1. The commitment state is a pure function of
// (seed, prompt, prefix): coin and pick are hashes, and mid-splice state is
// reconstructed by replaying the prefix, so the backend stays stateless and
// deterministic. Off-policy prefixes that diverge from a commitment simply
// fall back to free points.
class SplicingPolicy final : public Policy {
 public:
  SplicingPolicy(std::shared_ptr<const Policy> base, double splice_prob,
                 int max_len = 60, std::uint64_t seed = 0);

  const Vocabulary& vocabulary() const override { return base_->vocabulary(); }

  double splice_prob() const { return splice_prob_; }

  // Spliceable units of a prompt: runs between <p> ... </p> marker pairs, or
  // the whole prompt when no markers are present. Only complete
  // serializations survive; malformed segments are dropped.
  static std::vector<TokenSeq> prompt_segments(const TokenSeq& prompt);

 private:
  std::vector<TokenProb> dist(const TokenSeq& prefix, const Dataset* data,
                              const TokenSeq* prompt) const override;

  struct Commit {
    int segment = -1;  // -1: free point
    int pos = 0;
  };
  Commit committed_state(const TokenSeq& prefix,
                         const std::vector<TokenSeq>& segments) const;

  std::shared_ptr<const Policy> base_;
  double splice_prob_;
  int max_len_;
  std::uint64_t seed_;
};

}  // namespace srlab
