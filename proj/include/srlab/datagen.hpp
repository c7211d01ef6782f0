#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "srlab/dataset.hpp"
#include "srlab/expr.hpp"
#include "srlab/rng.hpp"
#include "srlab/token.hpp"

namespace srlab {

enum class ShapeMode { OperatorCount, UniformDepth };

// Knobs for the synthetic expression distribution. Defaults are the training
// distribution used throughout: depth <= 6, at most 6 constants, five input
// variables, scale constants log-uniform on [0.05, 10], shift constants
// uniform on [-10, 10], per-variable supports [lo, hi] with lo ~ U(-10, 9)
// and hi ~ U(lo+1, 10).
struct GenConfig {
  Vocabulary vocab = Vocabulary::full();
  int max_depth = 6;
  int max_constants = 6;
  int min_ops = 1;
  int max_ops = 5;
  ShapeMode shape_mode = ShapeMode::OperatorCount;
  int n_min = 1;          // dataset rows when the caller does not fix them
  int n_max = 1000;
  double mul_lo = 0.05;   // scale constants, log-uniform
  double mul_hi = 10.0;
  double add_lo = -10.0;  // shift constants, uniform
  double add_hi = 10.0;
  double x_lo = -10.0;    // support interval bounds
  double x_hi = 10.0;
  double constant_site_prob = 0.5;
  std::uint64_t seed = 0;
};

// Bare tree shape: arity per node, children in order.
struct TreeShape {
  int arity = 0;
  std::vector<TreeShape> kids;
  int depth() const;
  int op_count() const;
};

// Draws a unary-binary shape. OperatorCount mode samples the operator count
// uniformly on [min_ops, max_ops] and then the shape uniformly among all
// shapes with that operator count (slot-by-slot recurrence), rejecting
// shapes deeper than max_depth. UniformDepth mode samples uniformly over all
// shapes of depth <= max_depth.
TreeShape sample_skeleton(Rng& rng, const GenConfig& cfg);

// Fills a shape with uniform operator and variable choices from the
// vocabulary. The result is a template: no constants anywhere.
Expr decorate_template(const TreeShape& shape, Rng& rng, const GenConfig& cfg);

// Scale/shift decoration: every unary site u(.) becomes mul(c, u(.)) and
// every variable site x becomes add(mul(c, x), c'), each independently with
// probability constant_site_prob, subject to a total budget of max_constants
// filled in pre-order (sites whose constants no longer fit are left alone).
// Stripping the result recovers the template.
Expr inject_constants(const Expr& templ, Rng& rng, const GenConfig& cfg);

// skeleton -> decorate -> inject; one draw from the expression distribution
Expr sample_expression(Rng& rng, const GenConfig& cfg);

std::vector<std::array<double, 2>> sample_support(Rng& rng,
                                                  const GenConfig& cfg);

// n rows uniform on the support; rows with non-finite targets are redrawn.
// Gives up (SupportIncompatible) after 100*n total draws.
Dataset sample_dataset(const Expr& e,
                       const std::vector<std::array<double, 2>>& support,
                       int n, Rng& rng);

// --- corpus ------------------------------------------------------------------

// Ordered template collection with constant-time membership by template key.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Expr> templates);

  const std::vector<Expr>& templates() const { return templates_; }
  std::size_t size() const { return templates_.size(); }

  bool contains_template(const std::string& strict_key) const;
  bool contains_template_commutative(const std::string& key) const;
  // placeholder-position identity (for corpora holding decorated entries)
  bool contains_structural(const std::string& structural_key) const;

  void save_jsonl(const std::string& path) const;
  static Corpus load_jsonl(const std::string& path);

 private:
  std::vector<Expr> templates_;
  std::unordered_set<std::string> strict_keys_;
  std::unordered_set<std::string> commutative_keys_;
  std::unordered_set<std::string> structural_keys_;
};

// count distinct templates (template-key dedup); AttemptCeiling after
// attempt_ceiling draws (default 200 per requested template plus slack).
Corpus build_corpus(const GenConfig& cfg, int count, Rng& rng,
                    long attempt_ceiling = -1);

}  // namespace srlab
