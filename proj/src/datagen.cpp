#include "srlab/datagen.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "srlab/errors.hpp"

namespace srlab {

int TreeShape::depth() const {
  int d = 0;
  for (const auto& k : kids) d = std::max(d, k.depth());
  return d + 1;
}

int TreeShape::op_count() const {
  int n = arity > 0 ? 1 : 0;
  for (const auto& k : kids) n += k.op_count();
  return n;
}

namespace {

// Number of unary-binary shapes that close e open slots using exactly n
// internal nodes. Classic slot recurrence: the leftmost slot is a leaf, a
// unary node, or a binary node.
//   D(0, n) = 0 for n > 0,  D(e, 0) = 1,
//   D(e, n) = D(e-1, n) + D(e, n-1) + D(e+1, n-1)
std::vector<std::vector<double>> shape_counts(int max_n) {
  int emax = max_n + 2;
  std::vector<std::vector<double>> D(std::size_t(emax) + 1,
                                     std::vector<double>(std::size_t(max_n) + 1, 0.0));
  for (int e = 0; e <= emax; ++e) D[e][0] = 1.0;
  for (int n = 1; n <= max_n; ++n) D[0][n] = 0.0;
  for (int n = 1; n <= max_n; ++n)
    for (int e = 1; e <= emax; ++e) {
      double up = e + 1 <= emax ? D[e + 1][n - 1] : 0.0;
      D[e][n] = D[e - 1][n] + D[e][n - 1] + up;
    }
  return D;
}

// Prefix arity string for a uniform shape with n_ops internal nodes. The
// leftmost open slot is settled at each step, which is exactly prefix order.
std::vector<int> sample_arity_prefix(Rng& rng, int n_ops,
                                     const std::vector<std::vector<double>>& D) {
  std::vector<int> arity;
  int e = 1, n = n_ops;
  while (e > 0) {
    double total = D[e][n];
    double u = rng.uniform() * total;
    double leaf = D[e - 1][n];
    double un = n >= 1 ? D[e][n - 1] : 0.0;
    if (u < leaf || n == 0) {
      arity.push_back(0);
      e -= 1;
    } else if (u < leaf + un) {
      arity.push_back(1);
      n -= 1;
    } else {
      arity.push_back(2);
      e += 1;
      n -= 1;
    }
  }
  return arity;
}

TreeShape parse_shape(const std::vector<int>& arity, std::size_t& pos) {
  TreeShape s;
  s.arity = arity[pos++];
  for (int i = 0; i < s.arity; ++i) s.kids.push_back(parse_shape(arity, pos));
  return s;
}

// Shape counts by depth bound for the uniform-depth mode:
//   T(1) = 1,  T(d) = 1 + T(d-1) + T(d-1)^2.
std::vector<double> depth_counts(int max_depth) {
  std::vector<double> T(std::size_t(max_depth) + 1, 0.0);
  if (max_depth >= 1) T[1] = 1.0;
  for (int d = 2; d <= max_depth; ++d) T[d] = 1.0 + T[d - 1] + T[d - 1] * T[d - 1];
  return T;
}

TreeShape sample_uniform_depth(Rng& rng, int d, const std::vector<double>& T) {
  TreeShape s;
  if (d <= 1) return s;
  double u = rng.uniform() * T[d];
  double sub = T[d - 1];
  if (u < 1.0) return s;  // leaf
  if (u < 1.0 + sub) {
    s.arity = 1;
    s.kids.push_back(sample_uniform_depth(rng, d - 1, T));
  } else {
    s.arity = 2;
    s.kids.push_back(sample_uniform_depth(rng, d - 1, T));
    s.kids.push_back(sample_uniform_depth(rng, d - 1, T));
  }
  return s;
}

}  // namespace

TreeShape sample_skeleton(Rng& rng, const GenConfig& cfg) {
  if (cfg.shape_mode == ShapeMode::UniformDepth) {
    auto T = depth_counts(cfg.max_depth);
    return sample_uniform_depth(rng, cfg.max_depth, T);
  }
  auto D = shape_counts(cfg.max_ops);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    int n_ops = rng.uniform_int(cfg.min_ops, cfg.max_ops);
    auto arity = sample_arity_prefix(rng, n_ops, D);
    std::size_t pos = 0;
    TreeShape s = parse_shape(arity, pos);
    if (s.depth() <= cfg.max_depth) return s;
  }
  throw AttemptCeiling("no shape within the depth bound");
}

namespace {

Expr decorate_rec(const TreeShape& s, Rng& rng, const GenConfig& cfg) {
  if (s.arity == 0)
    return Expr::variable(1 + int(rng.below(std::uint64_t(cfg.vocab.dim))));
  if (s.arity == 1) {
    Op op = cfg.vocab.unary_ops[rng.below(cfg.vocab.unary_ops.size())];
    return Expr::unary(op, decorate_rec(s.kids[0], rng, cfg));
  }
  Op op = cfg.vocab.binary_ops[rng.below(cfg.vocab.binary_ops.size())];
  Expr l = decorate_rec(s.kids[0], rng, cfg);
  Expr r = decorate_rec(s.kids[1], rng, cfg);
  return Expr::binary(op, std::move(l), std::move(r));
}

bool shape_needs(const TreeShape& s, int arity) {
  if (s.arity == arity) return true;
  for (const auto& k : s.kids)
    if (shape_needs(k, arity)) return true;
  return false;
}

Expr inject_rec(const Expr& e, Rng& rng, const GenConfig& cfg, int& budget) {
  switch (e.kind()) {
    case Expr::Kind::Var: {
      // coin first, then constants, so the draw order is site order
      if (rng.coin(cfg.constant_site_prob) && budget >= 2) {
        budget -= 2;
        double cm = rng.log_uniform(cfg.mul_lo, cfg.mul_hi);
        double ca = rng.uniform(cfg.add_lo, cfg.add_hi);
        return Expr::binary(Op::Add,
                            Expr::binary(Op::Mul, Expr::constant(cm), e),
                            Expr::constant(ca));
      }
      return e;
    }
    case Expr::Kind::Unary: {
      bool wrap = rng.coin(cfg.constant_site_prob) && budget >= 1;
      double cm = 0.0;
      if (wrap) {
        budget -= 1;
        cm = rng.log_uniform(cfg.mul_lo, cfg.mul_hi);
      }
      Expr body = Expr::unary(e.op(), inject_rec(e.child(0), rng, cfg, budget));
      if (wrap)
        return Expr::binary(Op::Mul, Expr::constant(cm), std::move(body));
      return body;
    }
    case Expr::Kind::Binary: {
      Expr l = inject_rec(e.child(0), rng, cfg, budget);
      Expr r = inject_rec(e.child(1), rng, cfg, budget);
      return Expr::binary(e.op(), std::move(l), std::move(r));
    }
    default:
      return e;  // constants pass through untouched
  }
}

}  // namespace

Expr decorate_template(const TreeShape& shape, Rng& rng, const GenConfig& cfg) {
  if (shape_needs(shape, 1) && cfg.vocab.unary_ops.empty())
    throw std::invalid_argument("shape needs unary operators");
  if (shape_needs(shape, 2) && cfg.vocab.binary_ops.empty())
    throw std::invalid_argument("shape needs binary operators");
  return decorate_rec(shape, rng, cfg);
}

Expr inject_constants(const Expr& templ, Rng& rng, const GenConfig& cfg) {
  int budget = cfg.max_constants;
  return inject_rec(templ, rng, cfg, budget);
}

Expr sample_expression(Rng& rng, const GenConfig& cfg) {
  TreeShape shape = sample_skeleton(rng, cfg);
  Expr templ = decorate_template(shape, rng, cfg);
  return inject_constants(templ, rng, cfg);
}

std::vector<std::array<double, 2>> sample_support(Rng& rng,
                                                  const GenConfig& cfg) {
  std::vector<std::array<double, 2>> support;
  support.reserve(std::size_t(cfg.vocab.dim));
  for (int j = 0; j < cfg.vocab.dim; ++j) {
    double lo = rng.uniform(cfg.x_lo, cfg.x_hi - 1.0);
    double hi = rng.uniform(lo + 1.0, cfg.x_hi);
    support.push_back({lo, hi});
  }
  return support;
}

Dataset sample_dataset(const Expr& e,
                       const std::vector<std::array<double, 2>>& support,
                       int n, Rng& rng) {
  Dataset d;
  d.dim = int(support.size());
  d.support = support;
  d.xs.reserve(std::size_t(n) * support.size());
  d.targets.reserve(std::size_t(n));
  std::vector<double> row(support.size());
  long attempts = 0;
  const long budget = 100L * n;
  while (d.targets.size() < std::size_t(n)) {
    if (++attempts > budget)
      throw SupportIncompatible("target non-finite on this support");
    for (std::size_t j = 0; j < support.size(); ++j)
      row[j] = rng.uniform(support[j][0], support[j][1]);
    double y = evaluate(e, row);
    if (!std::isfinite(y)) continue;
    d.xs.insert(d.xs.end(), row.begin(), row.end());
    d.targets.push_back(y);
  }
  return d;
}

// --- corpus ------------------------------------------------------------------

Corpus::Corpus(std::vector<Expr> templates) : templates_(std::move(templates)) {
  for (const Expr& t : templates_) {
    structural_keys_.insert(structural_key(t));
    try {
      strict_keys_.insert(canonical_key(t, KeyMode::Strict));
      commutative_keys_.insert(canonical_key(t, KeyMode::Commutative));
    } catch (const IrreducibleConstant&) {
      // imported entry with a free-standing constant: only structurally
      // indexable, template membership cannot be defined for it
    }
  }
}

bool Corpus::contains_template(const std::string& key) const {
  return strict_keys_.count(key) != 0;
}
bool Corpus::contains_template_commutative(const std::string& key) const {
  return commutative_keys_.count(key) != 0;
}
bool Corpus::contains_structural(const std::string& key) const {
  return structural_keys_.count(key) != 0;
}

void Corpus::save_jsonl(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t i = 0; i < templates_.size(); ++i) {
    nlohmann::json j;
    j["id"] = i;
    j["prefix"] = texts_from_tokens(serialize(templates_[i]));
    out << j.dump() << '\n';
  }
}

Corpus Corpus::load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<Expr> templates;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    templates.push_back(
        deserialize(tokens_from_texts(j.at("prefix").get<std::vector<std::string>>())));
  }
  return Corpus(std::move(templates));
}

Corpus build_corpus(const GenConfig& cfg, int count, Rng& rng,
                    long attempt_ceiling) {
  if (attempt_ceiling < 0) attempt_ceiling = 200L * count + 1000;
  std::vector<Expr> templates;
  std::unordered_set<std::string> seen;
  long attempts = 0;
  while (int(templates.size()) < count) {
    if (++attempts > attempt_ceiling)
      throw AttemptCeiling("could not reach the requested corpus size");
    TreeShape shape = sample_skeleton(rng, cfg);
    Expr templ = decorate_template(shape, rng, cfg);
    if (seen.insert(canonical_key(templ, KeyMode::Strict)).second)
      templates.push_back(std::move(templ));
  }
  return Corpus(std::move(templates));
}

}  // namespace srlab
