#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "srlab/datagen.hpp"
#include "srlab/errors.hpp"
#include "srlab/gvs.hpp"
#include "srlab/policy.hpp"

using namespace srlab;

namespace {

Dataset grid_dataset(int dim, int rows, double lo, double hi,
                     double (*f)(std::span<const double>)) {
  Dataset d;
  d.dim = dim;
  for (int i = 0; i < rows; ++i) {
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j)
      x[static_cast<std::size_t>(j)] =
          lo + (hi - lo) * (double(i * dim + j) + 0.5) / double(rows * dim);
    d.xs.insert(d.xs.end(), x.begin(), x.end());
    d.targets.push_back(f(x));
  }
  return d;
}

double sum2(std::span<const double> x) { return x[0] + x[1]; }

Expr from_texts(const std::vector<std::string>& texts) {
  return deserialize(tokens_from_texts(texts));
}

// a generator config small enough that prompt assembly stays fast
GenConfig tiny_sampler() {
  GenConfig cfg;
  cfg.vocab = Vocabulary::simplified();
  cfg.vocab.dim = 2;
  cfg.max_ops = 3;
  return cfg;
}

MemoryPolicy corpus_policy(int templates, double alpha, std::uint64_t seed,
                           Corpus* corpus_out = nullptr) {
  GenConfig cfg;
  cfg.vocab = Vocabulary::simplified();
  cfg.vocab.dim = 2;
  Rng rng(seed);
  Corpus corpus = build_corpus(cfg, templates, rng);
  if (corpus_out != nullptr) *corpus_out = corpus;
  return train_memory_policy(corpus, alpha, cfg.vocab);
}

// prompt blocks split back into their subtree bodies; fails the test when
// the bracket structure is broken
std::vector<TokenSeq> prompt_bodies(const TokenSeq& prompt) {
  std::vector<TokenSeq> bodies;
  std::size_t i = 0;
  while (i < prompt.size()) {
    REQUIRE(prompt[i] == Token::prompt_start());
    std::size_t j = i + 1;
    while (j < prompt.size() && prompt[j] != Token::prompt_end()) ++j;
    REQUIRE(j < prompt.size());
    bodies.emplace_back(prompt.begin() + std::ptrdiff_t(i) + 1,
                        prompt.begin() + std::ptrdiff_t(j));
    i = j + 1;
  }
  return bodies;
}

// the pool a replay log implies, built through the public update rule
CandidatePool replay_pool(const std::vector<GvsReplayRow>& rows) {
  CandidatePool pool;
  for (const GvsReplayRow& row : rows) {
    if (row.prediction.empty()) continue;
    pool.update(deserialize(row.prediction), row.r2);
  }
  return pool;
}

}  // namespace

TEST_SUITE("gvs") {

TEST_CASE("pool update averages an existing entry") {
  // (0.5, 1) then reward 0.9 must land on ((1*0.5 + 0.9) / 2, 2)
  CandidatePool pool;
  Expr leaf = from_texts({"x_1"});
  pool.update(leaf, 0.5);
  pool.update(leaf, 0.9);

  const PoolEntry* row = pool.find(leaf);
  REQUIRE(row != nullptr);
  CHECK(row->z == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(row->c == 2);
  CHECK(pool.size() == 1);
}

TEST_CASE("pool update inserts a fresh subtree as (reward, 1)") {
  CandidatePool pool;
  pool.update(from_texts({"sin", "x_2"}), 0.3);

  const PoolEntry* whole = pool.find(from_texts({"sin", "x_2"}));
  const PoolEntry* leaf = pool.find(from_texts({"x_2"}));
  REQUIRE(whole != nullptr);
  REQUIRE(leaf != nullptr);
  CHECK(whole->z == 0.3);
  CHECK(whole->c == 1);
  CHECK(leaf->z == 0.3);
  CHECK(leaf->c == 1);
  CHECK(pool.size() == 2);
}

TEST_CASE("every distinct subtree of a prediction is folded in once") {
  // add(x_1, x_1) has two x_1 leaves but only one x_1 entry
  CandidatePool pool;
  pool.update(from_texts({"add", "x_1", "x_1"}), 0.8);

  REQUIRE(pool.size() == 2);
  CHECK(pool.find(from_texts({"x_1"}))->c == 1);
  CHECK(pool.find(from_texts({"add", "x_1", "x_1"}))->c == 1);

  // a second prediction touches only the subtrees it actually contains
  pool.update(from_texts({"sin", "x_1"}), 0.2);
  CHECK(pool.find(from_texts({"x_1"}))->c == 2);
  CHECK(pool.find(from_texts({"x_1"}))->z == doctest::Approx(0.5));
  CHECK(pool.find(from_texts({"add", "x_1", "x_1"}))->c == 1);
  CHECK(pool.find(from_texts({"add", "x_1", "x_1"}))->z == 0.8);
  CHECK(pool.find(from_texts({"sin", "x_1"}))->c == 1);
}

TEST_CASE("non-finite rewards count as zero without losing the visit") {
  CandidatePool pool;
  Expr leaf = from_texts({"x_1"});
  pool.update(leaf, 0.8);
  pool.update(leaf, -std::numeric_limits<double>::infinity());
  pool.update(leaf, std::numeric_limits<double>::quiet_NaN());

  const PoolEntry* row = pool.find(leaf);
  REQUIRE(row != nullptr);
  CHECK(row->c == 3);
  CHECK(row->z == doctest::Approx(0.8 / 3.0).epsilon(1e-15));
}

TEST_CASE("top-k selects by score, then count, then key, then filters") {
  CandidatePool pool;
  pool.update(from_texts({"x_1"}), 0.9);
  pool.update(from_texts({"x_2"}), 0.5);
  // same score as x_2 but two visits, so it ranks ahead of x_2
  pool.update(from_texts({"sin", "x_1"}), 0.4);
  pool.update(from_texts({"sin", "x_1"}), 0.6);
  pool.update(from_texts({"cos", "x_2"}), 0.1);
  pool.update(from_texts({"tan", "x_1"}), 0.05);
  // the sin/cos/tan updates also touched the x_1/x_2 leaves, so query the
  // composite entries only
  REQUIRE(pool.find(from_texts({"sin", "x_1"}))->z == doctest::Approx(0.5));

  std::vector<PoolEntry> top = pool.top_k(3, 0.45);
  std::vector<std::string> keys;
  for (const PoolEntry& row : top) keys.push_back(structural_key(row.subtree));

  // the selection order must be score, then count, then key, front to back
  std::vector<PoolEntry> all = pool.top_k(int(pool.size()), -1.0);
  REQUIRE(all.size() == pool.size());
  for (std::size_t i = 1; i < all.size(); ++i) {
    const bool ordered =
        all[i - 1].z > all[i].z ||
        (all[i - 1].z == all[i].z && all[i - 1].c > all[i].c) ||
        (all[i - 1].z == all[i].z && all[i - 1].c == all[i].c &&
         structural_key(all[i - 1].subtree) < structural_key(all[i].subtree));
    CHECK(ordered);
  }
  for (const PoolEntry& row : top) CHECK(row.z >= 0.45);
  // means: sin x_1 = 0.5, the x_1 leaf = (0.9+0.4+0.6+0.05)/4 = 0.4875,
  // x_2 = 0.3; the threshold strikes x_2 from the top three
  REQUIRE(top.size() == 2);
  CHECK(keys[0] == structural_key(from_texts({"sin", "x_1"})));
  CHECK(keys[1] == structural_key(from_texts({"x_1"})));
  CHECK(top[1].z == doctest::Approx(0.4875).epsilon(1e-15));
  CHECK(top[1].c == 4);
}

TEST_CASE("top-k breaks exact score ties by count then structural key") {
  CandidatePool pool;
  pool.update(from_texts({"x_1"}), 0.5);
  pool.update(from_texts({"x_2"}), 0.5);
  pool.update(from_texts({"x_2"}), 0.5);  // same mean, higher count

  std::vector<PoolEntry> top = pool.top_k(2, 0.0);
  REQUIRE(top.size() == 2);
  CHECK(structural_key(top[0].subtree) == structural_key(from_texts({"x_2"})));
  CHECK(top[0].c == 2);
  CHECK(structural_key(top[1].subtree) == structural_key(from_texts({"x_1"})));

  // equal score and count falls back to key order
  CandidatePool tied;
  tied.update(from_texts({"x_1"}), 0.5);
  tied.update(from_texts({"x_2"}), 0.5);
  std::vector<PoolEntry> pair = tied.top_k(2, 0.0);
  REQUIRE(pair.size() == 2);
  CHECK(structural_key(pair[0].subtree) < structural_key(pair[1].subtree));
}

TEST_CASE("extracting from a leaf returns that leaf") {
  Rng rng(7);
  std::vector<Expr> out = extract_subtrees(from_texts({"x_1"}), rng, 5, 9);
  REQUIRE(out.size() == 1);
  CHECK(structural_key(out[0]) == structural_key(from_texts({"x_1"})));
}

TEST_CASE("extraction respects the length cap and set semantics") {
  // sin(x_1 + x_2 * x_1) has subtrees of serialization lengths 1..6
  Expr e = from_texts({"sin", "add", "x_1", "mul", "x_2", "x_1"});
  std::vector<Expr> all = subtrees(e);

  Rng rng(11);
  std::vector<Expr> capped = extract_subtrees(e, rng, 100, 3);
  std::set<std::string> got;
  for (const Expr& s : capped) {
    CHECK(int(serialize(s).size()) <= 3);
    got.insert(structural_key(s));
  }
  CHECK(got.size() == capped.size());  // no repeats within one draw

  std::set<std::string> want;
  for (const Expr& s : all)
    if (int(serialize(s).size()) <= 3) want.insert(structural_key(s));
  CHECK(got == want);  // asking for more than available returns exactly all

  // a cap below every subtree length yields nothing
  Rng rng2(12);
  CHECK(extract_subtrees(e, rng2, 4, 0).empty());
  CHECK(extract_subtrees(e, rng2, 0, 9).empty());
}

TEST_CASE("extraction is uniform over the eligible subtrees") {
  // five eligible subtrees: x_1, x_2, mul(x_2,x_1), add(...), sin(...)
  Expr e = from_texts({"sin", "add", "x_1", "mul", "x_2", "x_1"});
  std::vector<Expr> all = subtrees(e);
  REQUIRE(all.size() == 5);

  std::map<std::string, int> hits;
  Rng rng(123);
  const int draws = 50000;
  for (int i = 0; i < draws; ++i) {
    std::vector<Expr> one = extract_subtrees(e, rng, 1, 9);
    REQUIRE(one.size() == 1);
    hits[structural_key(one[0])] += 1;
  }

  REQUIRE(hits.size() == 5);
  const double p = 1.0 / 5.0;
  const double sigma = std::sqrt(p * (1.0 - p) / double(draws));
  for (const auto& [key, n] : hits)
    CHECK(std::abs(double(n) / double(draws) - p) <= 3.0 * sigma);
}

TEST_CASE("prompt budget bound follows the floor rule") {
  GvsConfig cfg;
  CHECK(prompt_length_bound(cfg, 10) == 19);  // floor(15.58 + 4.2)
  CHECK(prompt_length_bound(cfg, 30) == 28);  // floor(15.58 + 12.6)
  for (int t = 2; t < 40; ++t)
    CHECK(prompt_length_bound(cfg, t) <= prompt_length_bound(cfg, t + 1));

  GvsConfig hostile;
  hostile.length_intercept = -50.0;
  CHECK(prompt_length_bound(hostile, 3) == 0);
}

TEST_CASE("iteration one and empty candidate sets give empty prompts") {
  GvsConfig cfg;
  cfg.sampler = tiny_sampler();
  CandidatePool pool;
  pool.update(from_texts({"sin", "x_1"}), 0.9);

  Rng rng(5);
  CHECK(build_prompt(pool, rng, 1, cfg).empty());

  // nothing to draw from: empty pool and no random subtrees
  GvsConfig no_rand = cfg;
  no_rand.rand_k = 0;
  CandidatePool empty_pool;
  for (int t = 2; t < 8; ++t) {
    Rng r{std::uint64_t(t)};
    CHECK(build_prompt(empty_pool, r, t, no_rand).empty());
  }
}

TEST_CASE("prompts are bracketed blocks of short distinct subtrees") {
  GvsConfig cfg;
  cfg.sampler = tiny_sampler();

  CandidatePool pool;
  pool.update(from_texts({"add", "sin", "x_1", "mul", "x_2", "x_2"}), 0.9);
  pool.update(from_texts({"sub", "x_2", "tan", "x_1"}), 0.6);
  pool.update(from_texts({"mul", "x_1", "cos", "x_2"}), 0.5);

  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    int t = 2 + int(seed % 7);
    Rng rng(seed);
    TokenSeq prompt = build_prompt(pool, rng, t, cfg);

    std::vector<TokenSeq> bodies = prompt_bodies(prompt);
    std::set<std::string> seen;
    int total = 0;
    for (const TokenSeq& body : bodies) {
      CHECK(is_complete_serialization(body));
      CHECK(int(body.size()) <= cfg.l_max);
      CHECK(seen.insert(join_tokens(body)).second);  // no duplicate blocks
      total += int(body.size());
    }
    // the crossing rule: subtree tokens stay within the drawn budget plus
    // one final block, and the budget never exceeds the floor-rule bound
    CHECK(total <= prompt_length_bound(cfg, t) + cfg.l_max);
    CHECK(int(prompt.size()) == total + 2 * int(bodies.size()));
  }
}

TEST_CASE("pool entries longer than the cap never enter a prompt") {
  GvsConfig cfg;
  cfg.sampler = tiny_sampler();
  cfg.rand_k = 0;

  // eleven tokens, over the nine-token cap; its short subtrees still qualify
  Expr wide = from_texts({"add", "mul", "x_1", "x_1", "mul", "x_2", "add",
                          "x_1", "sin", "sin", "x_2"});
  CandidatePool pool;
  pool.update(wide, 0.9);
  REQUIRE(pool.find(wide) != nullptr);

  const std::string wide_key = structural_key(wide);
  bool saw_any_block = false;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    TokenSeq prompt = build_prompt(pool, rng, 6, cfg);
    for (const TokenSeq& body : prompt_bodies(prompt)) {
      saw_any_block = true;
      CHECK(structural_key(deserialize(body)) != wide_key);
      CHECK(int(body.size()) <= cfg.l_max);
    }
  }
  CHECK(saw_any_block);
}

TEST_CASE("the score floor silences the pool but not exploration") {
  GvsConfig cfg;
  cfg.sampler = tiny_sampler();

  CandidatePool weak;  // every entry sits below z_thres = 0.213
  weak.update(from_texts({"sin", "x_1"}), 0.1);
  weak.update(from_texts({"mul", "x_2", "x_1"}), 0.05);

  // with exploration off, a low-scoring pool yields nothing at all
  GvsConfig no_rand = cfg;
  no_rand.rand_k = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed);
    CHECK(build_prompt(weak, rng, 5, no_rand).empty());
  }

  // with exploration on, prompts still appear despite the silent pool
  int nonempty = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed);
    if (!build_prompt(weak, rng, 5, cfg).empty()) ++nonempty;
  }
  CHECK(nonempty > 0);
}

TEST_CASE("prompt assembly is deterministic for a fixed stream") {
  GvsConfig cfg;
  cfg.sampler = tiny_sampler();
  CandidatePool pool;
  pool.update(from_texts({"add", "x_1", "sin", "x_2"}), 0.9);

  Rng a(42), b(42);
  for (int t = 2; t < 6; ++t)
    CHECK(join_tokens(build_prompt(pool, a, t, cfg)) ==
          join_tokens(build_prompt(pool, b, t, cfg)));
}

TEST_CASE("a single iteration is exactly one unprompted beam decode") {
  Corpus corpus;
  MemoryPolicy policy = corpus_policy(10, 0.0, 2024, &corpus);
  Dataset data = grid_dataset(2, 24, -2.0, 2.0, sum2);

  GvsConfig cfg;
  cfg.iterations = 1;
  cfg.sampler = tiny_sampler();
  cfg.beam.beam_size = 4;

  Rng rng(99);
  std::vector<GvsReplayRow> rows;
  Prediction got = run_gvs(policy, data, cfg, rng, &rows);

  // the loop hands iteration one this exact stream and an empty prompt
  Rng oracle_rng = Rng(99).split("gvs-iteration", 1).split("decode");
  TokenSeq empty_prompt;
  Prediction want = beam_decode(policy, data, cfg.beam, oracle_rng,
                                &empty_prompt);

  CHECK(join_tokens(got.tokens) == join_tokens(want.tokens));
  CHECK(got.r2_fit == want.r2_fit);
  REQUIRE(got.constants.size() == want.constants.size());
  for (std::size_t i = 0; i < got.constants.size(); ++i)
    CHECK(got.constants[i] == want.constants[i]);
  CHECK(got.strategy == "gvs");
  CHECK(got.candidates_generated == 4);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].t == 1);
  CHECK(rows[0].prompt.empty());
  CHECK(join_tokens(rows[0].prediction) == join_tokens(want.tokens));
  CHECK(rows[0].r2 == want.r2_fit);
}

TEST_CASE("replaying the log rebuilds the pool and the best is the max") {
  Corpus corpus;
  MemoryPolicy policy = corpus_policy(25, 0.05, 7'000, &corpus);
  Dataset data = grid_dataset(2, 24, -2.0, 2.0, sum2);

  GvsConfig cfg;
  cfg.sampler = tiny_sampler();
  cfg.iterations = 12;
  cfg.beam.beam_size = 3;

  Rng rng(31);
  std::vector<GvsReplayRow> rows;
  CandidatePool pool;
  Prediction best = run_gvs(policy, data, cfg, rng, &rows, &pool);

  REQUIRE(rows.size() == 12);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].t == int(i) + 1);

  // replay oracle: running the public update rule over the log recovers
  // every entry with the count exact and the score to float identity
  CandidatePool replayed = replay_pool(rows);
  REQUIRE(replayed.size() == pool.size());
  for (const auto& [key, row] : pool.entries()) {
    auto it = replayed.entries().find(key);
    REQUIRE(it != replayed.entries().end());
    CHECK(it->second.c == row.c);
    CHECK(it->second.z == doctest::Approx(row.z).epsilon(1e-12));
  }

  // batch-mean audit: z is the mean reward of the rows whose prediction
  // contains the subtree
  for (const auto& [key, row] : pool.entries()) {
    double sum = 0.0;
    int count = 0;
    for (const GvsReplayRow& r : rows) {
      if (r.prediction.empty()) continue;
      for (const Expr& sub : subtrees(deserialize(r.prediction)))
        if (structural_key(sub) == key) {
          sum += std::isfinite(r.r2) ? r.r2 : 0.0;
          count += 1;
          break;
        }
    }
    CHECK(count == row.c);
    CHECK(row.z == doctest::Approx(sum / double(count)).epsilon(1e-12));
  }

  // the returned prediction is the first row attaining the maximum score
  double max_r2 = -std::numeric_limits<double>::infinity();
  for (const GvsReplayRow& r : rows)
    if (std::isfinite(r.r2) && r.r2 > max_r2) max_r2 = r.r2;
  CHECK(best.r2_fit == max_r2);
  for (const GvsReplayRow& r : rows) {
    if (!std::isfinite(r.r2)) continue;
    if (r.r2 == max_r2) {
      CHECK(join_tokens(best.tokens) == join_tokens(r.prediction));
      break;
    }
  }
  CHECK(best.candidates_generated == 12 * 3);
  CHECK(best.strategy == "gvs");
}

TEST_CASE("the full loop is deterministic under a fixed seed") {
  MemoryPolicy policy = corpus_policy(15, 0.05, 555);
  Dataset data = grid_dataset(2, 20, -2.0, 2.0, sum2);

  GvsConfig cfg;
  cfg.sampler = tiny_sampler();
  cfg.iterations = 6;
  cfg.beam.beam_size = 2;

  std::vector<GvsReplayRow> rows_a, rows_b;
  Rng rng_a(77), rng_b(77);
  Prediction a = run_gvs(policy, data, cfg, rng_a, &rows_a);
  Prediction b = run_gvs(policy, data, cfg, rng_b, &rows_b);

  CHECK(join_tokens(a.tokens) == join_tokens(b.tokens));
  CHECK(a.r2_fit == b.r2_fit);
  REQUIRE(rows_a.size() == rows_b.size());
  for (std::size_t i = 0; i < rows_a.size(); ++i) {
    CHECK(join_tokens(rows_a[i].prompt) == join_tokens(rows_b[i].prompt));
    CHECK(join_tokens(rows_a[i].prediction) ==
          join_tokens(rows_b[i].prediction));
    const bool same_r2 =
        rows_a[i].r2 == rows_b[i].r2 ||
        (std::isnan(rows_a[i].r2) && std::isnan(rows_b[i].r2));
    CHECK(same_r2);
  }
}

TEST_CASE("prompted splicing carries pool subtrees into the output") {
  // the base policy knows ten templates; the pool is seeded with the
  // subtrees of a target template the corpus does not contain
  Corpus corpus;
  MemoryPolicy base_owner = corpus_policy(10, 0.05, 404, &corpus);
  auto base = std::make_shared<MemoryPolicy>(std::move(base_owner));

  Expr target = from_texts({"mul", "x_2", "sin", "x_1"});
  REQUIRE(!corpus.contains_template(canonical_key(target)));
  Dataset data = grid_dataset(2, 24, -2.0, 2.0,
                              [](std::span<const double> x) {
                                return x[1] * std::sin(x[0]);
                              });

  CandidatePool pool;
  pool.update(target, 0.9);  // all entries sit above z_thres

  GvsConfig cfg;
  cfg.sampler = tiny_sampler();
  cfg.rand_k = 0;

  const double splice_prob = 0.5;
  const int runs = 500;
  int contained = 0;
  int usable = 0;
  for (int i = 0; i < runs; ++i) {
    Rng rng(std::uint64_t(1000 + i));
    TokenSeq prompt = build_prompt(pool, rng, 2, cfg);
    std::vector<TokenSeq> segments = SplicingPolicy::prompt_segments(prompt);
    if (segments.empty()) continue;  // budget drew near zero
    ++usable;

    SplicingPolicy spliced(base, splice_prob, 60, std::uint64_t(i));
    BeamConfig bc;
    bc.beam_size = 1;
    Rng decode_rng = rng.split("decode");
    Prediction pred;
    try {
      pred = beam_decode(spliced, data, bc, decode_rng, &prompt);
    } catch (const NoFiniteCandidate&) {
      continue;  // counts as a miss
    }

    std::set<std::string> out_keys;
    for (const Expr& sub : subtrees(pred.expr))
      out_keys.insert(structural_key(sub));
    for (const TokenSeq& seg : segments)
      if (out_keys.count(structural_key(deserialize(seg)))) {
        ++contained;
        break;
      }
  }

  // a committed splice guarantees containment, so the hit rate cannot sit
  // below the commitment rate by more than binomial noise
  REQUIRE(usable > 300);
  const double freq = double(contained) / double(usable);
  const double sigma =
      std::sqrt(splice_prob * (1.0 - splice_prob) / double(usable));
  CHECK(freq >= splice_prob - 3.0 * sigma);
}

TEST_CASE("gvs recovers a corpus template end to end") {
  Corpus corpus;
  MemoryPolicy policy = corpus_policy(10, 0.05, 2024, &corpus);
  REQUIRE(corpus.size() >= 4);
  GenConfig gen = tiny_sampler();
  Rng data_rng(406);
  Dataset data = sample_dataset(corpus.templates()[3],
                                sample_support(data_rng, gen), 64, data_rng);

  GvsConfig cfg;
  cfg.sampler = tiny_sampler();
  cfg.iterations = 8;
  cfg.beam.beam_size = 3;

  Rng rng(17);
  Prediction pred = run_gvs(policy, data, cfg, rng);
  CHECK(pred.r2_fit > 1.0 - 1e-6);
  CHECK(pred.strategy == "gvs");
  CHECK(pred.candidates_generated == 8 * 3);
}

TEST_CASE("an mcts inner decoder reports the composed strategy and cost") {
  MemoryPolicy policy = corpus_policy(8, 0.05, 321);
  Dataset data = grid_dataset(2, 20, -2.0, 2.0, sum2);

  GvsConfig cfg;
  cfg.sampler = tiny_sampler();
  cfg.iterations = 3;
  MctsConfig mc;
  mc.rollouts = 2;
  mc.beam_size = 2;
  mc.max_len = 25;
  cfg.mcts = mc;

  Rng rng(88);
  std::vector<GvsReplayRow> rows;
  Prediction pred = run_gvs(policy, data, cfg, rng, &rows);

  CHECK(pred.strategy == "gvs+mcts");
  CHECK(pred.candidates_generated == 3 * 2);
  CHECK(std::isfinite(pred.r2_fit));
  REQUIRE(rows.size() == 3);

  // iteration one must agree with a bare mcts decode on the same stream
  Rng oracle_rng = Rng(88).split("gvs-iteration", 1).split("decode");
  TokenSeq empty_prompt;
  Prediction want = mcts_decode(policy, data, mc, oracle_rng, &empty_prompt);
  CHECK(join_tokens(rows[0].prediction) == join_tokens(want.tokens));
}

TEST_CASE("a hopeless policy fails only after every iteration") {
  // the only reachable template is log(x_1 - x_1), non-finite everywhere
  std::vector<TokenSeq> doomed = {
      tokens_from_texts({"log", "sub", "x_1", "x_1"})};
  Vocabulary vocab = Vocabulary::full();
  vocab.dim = 2;
  MemoryPolicy policy(vocab, doomed, 0.0, false);
  Dataset data = grid_dataset(2, 16, 1.0, 2.0, sum2);

  GvsConfig cfg;
  cfg.sampler = tiny_sampler();
  cfg.iterations = 4;
  cfg.beam.beam_size = 2;

  Rng rng(3);
  std::vector<GvsReplayRow> rows;
  CHECK_THROWS_AS(run_gvs(policy, data, cfg, rng, &rows), NoFiniteCandidate);
  REQUIRE(rows.size() == 4);  // every iteration was attempted and logged
  for (const GvsReplayRow& row : rows) {
    CHECK(row.prediction.empty());
    CHECK(std::isnan(row.r2));
  }
}

TEST_CASE("degenerate loop configurations are rejected") {
  MemoryPolicy policy = corpus_policy(5, 0.05, 1);
  Dataset data = grid_dataset(2, 16, -2.0, 2.0, sum2);
  Rng rng(1);

  GvsConfig zero_iters;
  zero_iters.sampler = tiny_sampler();
  zero_iters.iterations = 0;
  CHECK_THROWS_AS(run_gvs(policy, data, zero_iters, rng),
                  std::invalid_argument);

  GvsConfig bad_sets;
  bad_sets.sampler = tiny_sampler();
  bad_sets.top_k = -1;
  CHECK_THROWS_AS(run_gvs(policy, data, bad_sets, rng), std::invalid_argument);

  CandidatePool pool;
  Rng r(2);
  GvsConfig bad_rand;
  bad_rand.sampler = tiny_sampler();
  bad_rand.rand_k = -2;
  CHECK_THROWS_AS(build_prompt(pool, r, 3, bad_rand), std::invalid_argument);
}

}  // TEST_SUITE
