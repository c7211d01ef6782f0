#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "srlab/audit.hpp"
#include "srlab/datagen.hpp"
#include "srlab/decoding.hpp"
#include "srlab/errors.hpp"
#include "srlab/external_policy.hpp"
#include "srlab/fitting.hpp"
#include "srlab/gvs.hpp"
#include "srlab/policy.hpp"
#include "srlab/rng.hpp"
#include "srlab/serialization.hpp"
#include "srlab/theory.hpp"

namespace fs = std::filesystem;
using namespace srlab;

namespace {

// --- artifact conventions ------------------------------------------------------
// A test set test_<stem>.jsonl keeps its datasets in the sibling directory
// data/ as <stem>_<id>.csv (decode split) and <stem>_<id>_eval.csv (held-out
// split). Every subcommand writes a manifest: <dir>/manifest.json for `gen`,
// <out>.manifest.json sidecars otherwise.

std::string items_stem(const std::string& items_path) {
  std::string name = fs::path(items_path).filename().string();
  if (name.ends_with(".jsonl")) name.resize(name.size() - 6);
  if (name.rfind("test_", 0) == 0) name.erase(0, 5);
  return name;
}

fs::path dataset_path(const std::string& items_path, int id, bool eval) {
  return fs::path(items_path).parent_path() / "data" /
         (items_stem(items_path) + "_" + std::to_string(id) +
          (eval ? "_eval.csv" : ".csv"));
}

void write_json_atomic(const fs::path& path, const Json& j) {
  write_text_atomic(path.string(), j.dump(2) + "\n");
}

void write_csv_atomic(const Dataset& d, const fs::path& path) {
  const fs::path partial = path.string() + ".partial";
  write_csv(d, partial.string());
  fs::rename(partial, path);
}

void write_manifest(const fs::path& path, Json config, std::uint64_t seed) {
  Json m = make_manifest(config, seed);
  m["config"] = std::move(config);
  write_json_atomic(path, m);
}

fs::path sidecar_manifest(const std::string& out) {
  return fs::path(out + ".manifest.json");
}

Vocabulary resolve_vocab(const std::string& config_path,
                         const std::string& name, int dim) {
  Vocabulary v;
  if (!config_path.empty()) {
    v = gen_config_from_json(Json::parse(read_text(config_path))).vocab;
  } else if (name == "full") {
    v = Vocabulary::full();
  } else if (name == "simplified") {
    v = Vocabulary::simplified();
  } else {
    throw std::invalid_argument("unknown vocabulary: " + name);
  }
  if (dim > 0) v.dim = dim;
  return v;
}

// --- gen -----------------------------------------------------------------------

struct GenOpts {
  std::string out;
  std::string config_path;
  int corpus_size = 1000;
  int not_included = 150;
  int baseline = 0;
  int rows = 100;
  int eval_rows = 100;
  std::uint64_t seed = 0;
};

// r2 against these targets is computable: variance finite and nonzero
bool scoreable(const Dataset& d) {
  double mean = 0.0;
  for (double y : d.targets) mean += y;
  mean /= double(d.targets.size());
  double var = 0.0;
  for (double y : d.targets) var += (y - mean) * (y - mean);
  return std::isfinite(var) && var > 0.0;
}

// One test query with both dataset splits. A sampled expression can be
// unevaluable on its support, or can produce targets no r2 can score, so
// the whole (expression, support, rows) bundle is retried under fresh
// splits until both datasets materialize scoreable.
TestItem draw_item(const GenConfig& cfg, const Corpus* corpus, const Rng& root,
                   const std::string& label, int id, int rows, int eval_rows,
                   Dataset* decode_out, Dataset* eval_out) {
  for (int attempt = 0; attempt < 50; ++attempt) {
    Rng item_rng =
        root.split(label, std::uint64_t(id)).split("attempt", attempt);
    Rng expr_rng = item_rng.split("expr");
    std::vector<Expr> drawn =
        corpus ? build_not_included(cfg, *corpus, 1, expr_rng)
               : build_baseline(cfg, 1, expr_rng);
    try {
      Rng support_rng = item_rng.split("support");
      std::vector<std::array<double, 2>> support =
          sample_support(support_rng, cfg);
      Rng decode_rng = item_rng.split("decode-rows");
      Dataset decode = sample_dataset(drawn[0], support, rows, decode_rng);
      Rng eval_rng = item_rng.split("eval-rows");
      Dataset eval = sample_dataset(drawn[0], support, eval_rows, eval_rng);
      if (!scoreable(decode) || !scoreable(eval)) continue;
      *decode_out = std::move(decode);
      *eval_out = std::move(eval);
      return TestItem{id, drawn[0], std::move(support)};
    } catch (const SupportIncompatible&) {
      // redraw everything for this id
    }
  }
  throw AttemptCeiling("no dataset-compatible expression for " + label +
                       " item " + std::to_string(id));
}

int run_gen(const GenOpts& o) {
  GenConfig cfg;
  if (!o.config_path.empty())
    cfg = gen_config_from_json(Json::parse(read_text(o.config_path)));
  cfg.seed = o.seed;

  fs::create_directories(fs::path(o.out) / "data");
  Rng root(o.seed);

  Rng corpus_rng = root.split("corpus");
  Corpus corpus = build_corpus(cfg, o.corpus_size, corpus_rng);
  write_corpus_jsonl(corpus, (fs::path(o.out) / "corpus.jsonl").string());

  auto emit_set = [&](const std::string& stem, int count, bool filtered) {
    std::vector<TestItem> items;
    items.reserve(std::size_t(count));
    for (int id = 0; id < count; ++id) {
      Dataset decode, eval;
      TestItem item = draw_item(cfg, filtered ? &corpus : nullptr, root, stem,
                                id, o.rows, o.eval_rows, &decode, &eval);
      const fs::path data_dir = fs::path(o.out) / "data";
      write_csv_atomic(decode,
                       data_dir / (stem + "_" + std::to_string(id) + ".csv"));
      write_csv_atomic(
          eval, data_dir / (stem + "_" + std::to_string(id) + "_eval.csv"));
      items.push_back(std::move(item));
    }
    write_test_items(items,
                     (fs::path(o.out) / ("test_" + stem + ".jsonl")).string());
  };
  if (o.not_included > 0) emit_set("not_included", o.not_included, true);
  if (o.baseline > 0) emit_set("baseline", o.baseline, false);

  Json resolved = gen_config_to_json(cfg);
  write_json_atomic(fs::path(o.out) / "gen_config.json", resolved);

  Json config;
  config["command"] = "gen";
  config["gen"] = std::move(resolved);
  config["corpus_size"] = o.corpus_size;
  config["not_included"] = o.not_included;
  config["baseline"] = o.baseline;
  config["rows"] = o.rows;
  config["eval_rows"] = o.eval_rows;
  write_manifest(fs::path(o.out) / "manifest.json", std::move(config), o.seed);
  return 0;
}

// --- train ---------------------------------------------------------------------

struct TrainOpts {
  std::string corpus;
  std::string out;
  std::string config_path;
  std::string vocab_name = "full";
  int dim = 0;
  double alpha = 0.0;
  bool dataset_aware = true;
  std::uint64_t seed = 0;
};

int run_train(const TrainOpts& o) {
  Corpus corpus = read_corpus_jsonl(o.corpus);
  Vocabulary vocab = resolve_vocab(o.config_path, o.vocab_name, o.dim);

  // constructing the policy validates corpus against vocabulary
  [[maybe_unused]] MemoryPolicy check =
      train_memory_policy(corpus, o.alpha, vocab, o.dataset_aware);

  Json pj;
  pj["kind"] = "memory";
  pj["alpha"] = o.alpha;
  pj["dataset_aware"] = o.dataset_aware;
  pj["vocab"] = vocabulary_to_json(vocab);
  Json templates = Json::array();
  for (const Expr& t : corpus.templates())
    templates.push_back(texts_from_tokens(serialize(t)));
  pj["templates"] = std::move(templates);
  write_json_atomic(o.out, pj);

  Json config;
  config["command"] = "train";
  config["corpus"] = o.corpus;
  config["alpha"] = o.alpha;
  config["dataset_aware"] = o.dataset_aware;
  config["vocab"] = vocabulary_to_json(vocab);
  write_manifest(sidecar_manifest(o.out), std::move(config), o.seed);
  return 0;
}

// --- infer ---------------------------------------------------------------------

struct InferOpts {
  std::string items;
  std::string out;
  std::string policy_path;
  std::string endpoint;
  std::string config_path;
  std::string vocab_name = "full";
  int dim = 0;
  int timeout_ms = 30000;

  std::string strategy = "beam";
  int beam_size = 5;
  int max_len = 60;
  int rollouts = 3;
  int k_max = 3;
  int mcts_beam = 1;
  int simulation_budget = 0;
  double c_puct = 1.0;
  double lambda = 0.01;
  int iterations = 30;
  int top_k = 39;
  int rand_k = 9;
  double z_thres = 0.213;
  int l_max = 9;

  double splice_prob = 0.0;
  std::uint64_t splice_seed = 0;
  int threads = 0;
  std::string replay_dir;
  std::uint64_t seed = 0;
};

std::unique_ptr<LineTransport> make_transport(const std::string& endpoint) {
  if (endpoint.rfind("cmd:", 0) == 0)
    return std::make_unique<ProcessTransport>(endpoint.substr(4));
  std::string hp = endpoint;
  if (hp.rfind("tcp://", 0) == 0) hp.erase(0, 6);
  const std::size_t colon = hp.rfind(':');
  if (colon == std::string::npos || colon + 1 == hp.size())
    throw std::invalid_argument(
        "endpoint must be host:port, tcp://host:port or cmd:<command>");
  return std::make_unique<TcpTransport>(hp.substr(0, colon),
                                        std::stoi(hp.substr(colon + 1)));
}

std::shared_ptr<const Policy> load_policy(const InferOpts& o) {
  std::string endpoint = o.endpoint;
  if (endpoint.empty())
    if (const char* env = std::getenv("SRLAB_POLICY_ENDPOINT")) endpoint = env;
  if (!o.policy_path.empty() && !endpoint.empty())
    throw std::invalid_argument("give either --policy or an endpoint, not both");

  std::shared_ptr<const Policy> base;
  if (!o.policy_path.empty()) {
    Json pj = Json::parse(read_text(o.policy_path));
    if (pj.at("kind").get<std::string>() != "memory")
      throw std::invalid_argument("unsupported policy kind");
    Vocabulary vocab = vocabulary_from_json(pj.at("vocab"));
    std::vector<TokenSeq> templates;
    for (const Json& row : pj.at("templates"))
      templates.push_back(
          tokens_from_texts(row.get<std::vector<std::string>>()));
    base = std::make_shared<MemoryPolicy>(std::move(vocab),
                                          std::move(templates),
                                          pj.at("alpha").get<double>(),
                                          pj.value("dataset_aware", true));
  } else if (!endpoint.empty()) {
    Vocabulary vocab = resolve_vocab(o.config_path, o.vocab_name, o.dim);
    base = std::make_shared<ExternalPolicy>(make_transport(endpoint),
                                            std::move(vocab), o.timeout_ms);
  } else {
    throw std::invalid_argument(
        "need --policy, --endpoint or SRLAB_POLICY_ENDPOINT");
  }

  if (o.splice_prob > 0.0)
    base = std::make_shared<SplicingPolicy>(std::move(base), o.splice_prob,
                                            o.max_len, o.splice_seed);
  return base;
}

Prediction decode_one(const Policy& policy, const Dataset& data,
                      const InferOpts& o, Rng& rng,
                      std::vector<GvsReplayRow>* replay) {
  if (o.strategy == "beam") {
    BeamConfig cfg;
    cfg.beam_size = o.beam_size;
    cfg.max_len = o.max_len;
    return beam_decode(policy, data, cfg, rng);
  }

  MctsConfig mcts;
  mcts.rollouts = o.rollouts;
  mcts.k_max = o.k_max;
  mcts.beam_size = o.mcts_beam;
  mcts.lambda = o.lambda;
  mcts.max_len = o.max_len;
  mcts.c_puct = o.c_puct;
  mcts.simulation_budget = o.simulation_budget;
  if (o.strategy == "mcts") return mcts_decode(policy, data, mcts, rng);

  if (o.strategy == "gvs" || o.strategy == "gvs+mcts") {
    GvsConfig cfg;
    cfg.iterations = o.iterations;
    cfg.top_k = o.top_k;
    cfg.rand_k = o.rand_k;
    cfg.z_thres = o.z_thres;
    cfg.l_max = o.l_max;
    cfg.sampler.vocab = policy.vocabulary();
    cfg.beam.beam_size = o.beam_size;
    cfg.beam.max_len = o.max_len;
    if (o.strategy == "gvs+mcts") cfg.mcts = mcts;
    return run_gvs(policy, data, cfg, rng, replay);
  }
  throw std::invalid_argument("unknown strategy: " + o.strategy);
}

// Work-stealing batch decode; per-query RNG streams keep the output
// independent of schedule and thread count. The first failure cancels the
// remaining queue and is rethrown once the pool drains.
std::vector<Prediction> run_batch(
    const Policy& policy, const std::vector<TestItem>& items,
    const std::vector<Dataset>& datasets, const InferOpts& o,
    std::vector<std::vector<GvsReplayRow>>* replays) {
  std::vector<Prediction> results(items.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mutex;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      if (failed.load(std::memory_order_relaxed)) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      try {
        Rng rng = Rng(o.seed).split("query", std::uint64_t(items[i].id));
        std::vector<GvsReplayRow>* tap = replays ? &(*replays)[i] : nullptr;
        results[i] = decode_one(policy, datasets[i], o, rng, tap);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  unsigned n =
      o.threads > 0 ? unsigned(o.threads) : std::thread::hardware_concurrency();
  n = std::clamp<unsigned>(n, 1, std::max<std::size_t>(items.size(), 1));
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  for (std::thread& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

Json strategy_config_json(const InferOpts& o) {
  Json j;
  j["strategy"] = o.strategy;
  j["beam_size"] = o.beam_size;
  j["max_len"] = o.max_len;
  if (o.strategy == "mcts" || o.strategy == "gvs+mcts") {
    j["rollouts"] = o.rollouts;
    j["k_max"] = o.k_max;
    j["mcts_beam"] = o.mcts_beam;
    j["c_puct"] = o.c_puct;
    j["lambda"] = o.lambda;
    j["simulation_budget"] = o.simulation_budget;
  }
  if (o.strategy == "gvs" || o.strategy == "gvs+mcts") {
    j["iterations"] = o.iterations;
    j["top_k"] = o.top_k;
    j["rand_k"] = o.rand_k;
    j["z_thres"] = o.z_thres;
    j["l_max"] = o.l_max;
  }
  j["splice_prob"] = o.splice_prob;
  j["splice_seed"] = o.splice_seed;
  return j;
}

int run_infer(const InferOpts& o) {
  // flag conflicts surface before any artifact is touched
  std::shared_ptr<const Policy> policy = load_policy(o);
  std::vector<TestItem> items = read_test_items(o.items);
  std::vector<Dataset> datasets;
  datasets.reserve(items.size());
  for (const TestItem& item : items)
    datasets.push_back(read_csv(dataset_path(o.items, item.id, false).string()));

  if (!o.replay_dir.empty()) {
    if (o.strategy != "gvs" && o.strategy != "gvs+mcts")
      throw std::invalid_argument("--replay-dir needs a gvs strategy");
    fs::create_directories(o.replay_dir);
  }

  std::vector<std::vector<GvsReplayRow>> replays(items.size());
  std::vector<Prediction> results = run_batch(
      *policy, items, datasets, o, o.replay_dir.empty() ? nullptr : &replays);

  write_predictions(results, o.out);
  for (std::size_t i = 0; i < replays.size(); ++i) {
    if (o.replay_dir.empty()) break;
    write_replay(replays[i],
                 (fs::path(o.replay_dir) /
                  ("replay_" + std::to_string(items[i].id) + ".jsonl"))
                     .string());
  }

  Json config;
  config["command"] = "infer";
  config["items"] = o.items;
  config["policy"] = o.policy_path.empty() ? "external" : o.policy_path;
  config["params"] = strategy_config_json(o);
  write_manifest(sidecar_manifest(o.out), std::move(config), o.seed);
  return 0;
}

// --- audit ---------------------------------------------------------------------

struct AuditOpts {
  std::string predictions;
  std::string items;
  std::string corpus;
  std::string out;
  std::string scatter;
  std::string key_mode = "strict";
};

int run_audit(const AuditOpts& o) {
  std::vector<Prediction> preds = read_predictions(o.predictions);
  std::vector<TestItem> items = read_test_items(o.items);
  Corpus corpus = read_corpus_jsonl(o.corpus);
  std::vector<Dataset> eval;
  eval.reserve(items.size());
  for (const TestItem& item : items)
    eval.push_back(read_csv(dataset_path(o.items, item.id, true).string()));

  const KeyMode mode =
      o.key_mode == "commutative" ? KeyMode::Commutative : KeyMode::Strict;
  AuditReport report = audit_run(preds, corpus, eval, mode);

  write_json_atomic(o.out, audit_report_to_json(report));
  if (!o.scatter.empty()) write_text_atomic(o.scatter, audit_scatter_csv(report));

  Json config;
  config["command"] = "audit";
  config["predictions"] = o.predictions;
  config["items"] = o.items;
  config["corpus"] = o.corpus;
  config["key_mode"] = o.key_mode;
  write_manifest(sidecar_manifest(o.out), std::move(config), 0);
  return 0;
}

// --- theory --------------------------------------------------------------------

struct TheoryCheckOpts {
  int count = 1000;
  int max_depth = 8;
  std::uint64_t seed = 0;
  std::string out;
};

int run_theory_check(const TheoryCheckOpts& o) {
  Rng root(o.seed);
  Json checks = Json::array();
  int passes = 0;
  for (int i = 0; i < o.count; ++i) {
    Rng formula_rng = root.split("formula", std::uint64_t(i));
    BoolFormula f = random_formula(formula_rng, o.max_depth);
    Rng fit_rng = root.split("fit", std::uint64_t(i));
    ReductionVerdict v = check_reduction(f, fit_rng);
    passes += v.pass ? 1 : 0;
    checks.push_back(reduction_verdict_to_json(f, v));
  }

  Json cert;
  cert["count"] = o.count;
  cert["max_depth"] = o.max_depth;
  cert["seed"] = o.seed;
  cert["passes"] = passes;
  cert["all_pass"] = passes == o.count;
  cert["checks"] = std::move(checks);
  write_json_atomic(o.out, cert);

  Json config;
  config["command"] = "theory check";
  config["count"] = o.count;
  config["max_depth"] = o.max_depth;
  write_manifest(sidecar_manifest(o.out), std::move(config), o.seed);
  return 0;
}

struct TheoryPacOpts {
  PacConfig pac;
  std::string out;
};

int run_theory_pac(const TheoryPacOpts& o) {
  PacStats stats = pac_simulate(o.pac);
  write_json_atomic(o.out, pac_stats_to_json(o.pac, stats));

  Json config;
  config["command"] = "theory pac";
  config["pac"] = pac_stats_to_json(o.pac, PacStats{})["config"];
  write_manifest(sidecar_manifest(o.out), std::move(config), o.pac.seed);
  return 0;
}

// --- tradeoff ------------------------------------------------------------------

struct TradeoffOpts {
  InferOpts base;  // policy/items/threads/seed plumbing reused
  std::vector<int> beam_sizes{1, 5};
  std::vector<int> mcts_rollouts{3};
  std::vector<int> gvs_iterations{5};
  std::string out;
};

double held_out_r2(const Prediction& p, const Dataset& eval) {
  return r2_or_worst(eval.targets, predict(p.expr, eval, p.constants));
}

int run_tradeoff(const TradeoffOpts& o) {
  std::vector<TestItem> items = read_test_items(o.base.items);
  std::vector<Dataset> datasets, eval;
  datasets.reserve(items.size());
  eval.reserve(items.size());
  for (const TestItem& item : items) {
    datasets.push_back(
        read_csv(dataset_path(o.base.items, item.id, false).string()));
    eval.push_back(
        read_csv(dataset_path(o.base.items, item.id, true).string()));
  }
  std::shared_ptr<const Policy> policy = load_policy(o.base);

  std::string csv = "strategy,setting,mean_cost,median_r2_eval,solve_rate\n";
  auto add_row = [&](const std::string& strategy, int setting,
                     const InferOpts& opts) {
    std::vector<Prediction> preds =
        run_batch(*policy, items, datasets, opts, nullptr);
    double cost = 0.0;
    std::vector<double> scores;
    scores.reserve(preds.size());
    int solved = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      cost += preds[i].candidates_generated;
      const double r2 = held_out_r2(preds[i], eval[i]);
      scores.push_back(r2);
      solved += r2 > kAccurateR2 ? 1 : 0;
    }
    cost /= double(preds.size());
    std::sort(scores.begin(), scores.end());
    const std::size_t mid = scores.size() / 2;
    const double median = scores.size() % 2 == 1
                              ? scores[mid]
                              : 0.5 * (scores[mid - 1] + scores[mid]);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s,%d,%.17g,%.17g,%.17g\n",
                  strategy.c_str(), setting, cost, median,
                  double(solved) / double(preds.size()));
    csv += buf;
  };

  if (items.empty()) throw std::invalid_argument("tradeoff needs a non-empty test set");
  for (int b : o.beam_sizes) {
    InferOpts opts = o.base;
    opts.strategy = "beam";
    opts.beam_size = b;
    add_row("beam", b, opts);
  }
  for (int r : o.mcts_rollouts) {
    InferOpts opts = o.base;
    opts.strategy = "mcts";
    opts.rollouts = r;
    add_row("mcts", r, opts);
  }
  for (int t : o.gvs_iterations) {
    InferOpts opts = o.base;
    opts.strategy = "gvs";
    opts.iterations = t;
    add_row("gvs", t, opts);
  }
  write_text_atomic(o.out, csv);

  Json config;
  config["command"] = "tradeoff";
  config["items"] = o.base.items;
  config["policy"] = o.base.policy_path.empty() ? "external" : o.base.policy_path;
  config["beam_sizes"] = o.beam_sizes;
  config["mcts_rollouts"] = o.mcts_rollouts;
  config["gvs_iterations"] = o.gvs_iterations;
  config["splice_prob"] = o.base.splice_prob;
  write_manifest(sidecar_manifest(o.out), std::move(config), o.base.seed);
  return 0;
}

// --- option wiring --------------------------------------------------------------

void add_policy_options(CLI::App* cmd, InferOpts& o) {
  cmd->add_option("--policy", o.policy_path, "policy.json from `train`");
  cmd->add_option("--endpoint", o.endpoint,
                  "external policy endpoint (host:port, tcp://host:port or "
                  "cmd:<command>); SRLAB_POLICY_ENDPOINT is the fallback");
  cmd->add_option("--config", o.config_path,
                  "gen config JSON supplying the vocabulary for --endpoint");
  cmd->add_option("--vocab", o.vocab_name, "full or simplified")
      ->check(CLI::IsMember({"full", "simplified"}));
  cmd->add_option("--dim", o.dim, "override the variable count");
  cmd->add_option("--timeout-ms", o.timeout_ms, "external call timeout");
  cmd->add_option("--splice-prob", o.splice_prob,
                  "wrap the policy with prompt splicing at this probability");
  cmd->add_option("--splice-seed", o.splice_seed, "splicing hash seed");
  cmd->add_option("--threads", o.threads, "worker threads (0 = hardware)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"symbolic-regression laboratory"};
  app.require_subcommand(1);
  int rc = 0;

  GenOpts gen;
  CLI::App* gen_cmd =
      app.add_subcommand("gen", "build a corpus and its test sets");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--config", gen.config_path, "gen config JSON");
  gen_cmd->add_option("--corpus-size", gen.corpus_size, "templates to draw");
  gen_cmd->add_option("--not-included", gen.not_included,
                      "out-of-corpus test queries");
  gen_cmd->add_option("--baseline", gen.baseline, "unfiltered test queries");
  gen_cmd->add_option("--rows", gen.rows, "decode dataset rows per query");
  gen_cmd->add_option("--eval-rows", gen.eval_rows,
                      "held-out dataset rows per query");
  gen_cmd->add_option("--seed", gen.seed, "root seed");
  gen_cmd->callback([&] { rc = run_gen(gen); });

  TrainOpts train;
  CLI::App* train_cmd =
      app.add_subcommand("train", "fit a memory policy to a corpus");
  train_cmd->add_option("--corpus", train.corpus, "corpus.jsonl")->required();
  train_cmd->add_option("--out", train.out, "policy.json path")->required();
  train_cmd->add_option("--config", train.config_path,
                        "gen config JSON supplying the vocabulary");
  train_cmd->add_option("--vocab", train.vocab_name, "full or simplified")
      ->check(CLI::IsMember({"full", "simplified"}));
  train_cmd->add_option("--dim", train.dim, "override the variable count");
  train_cmd->add_option("--alpha", train.alpha, "smoothing mass");
  train_cmd->add_flag("--dataset-aware,!--no-dataset-aware",
                      train.dataset_aware,
                      "weight templates by fit quality on the query data");
  train_cmd->add_option("--seed", train.seed, "recorded in the manifest");
  train_cmd->callback([&] { rc = run_train(train); });

  InferOpts infer;
  CLI::App* infer_cmd =
      app.add_subcommand("infer", "decode every query in a test set");
  infer_cmd->add_option("--items", infer.items, "test_<stem>.jsonl")
      ->required();
  infer_cmd->add_option("--out", infer.out, "predictions JSONL path")
      ->required();
  infer_cmd
      ->add_option("--strategy", infer.strategy, "beam, mcts, gvs or gvs+mcts")
      ->check(CLI::IsMember({"beam", "mcts", "gvs", "gvs+mcts"}));
  infer_cmd->add_option("--beam-size,-b", infer.beam_size, "beam width");
  infer_cmd->add_option("--max-len", infer.max_len, "token budget");
  infer_cmd->add_option("--rollouts", infer.rollouts,
                        "simulations per committed token");
  infer_cmd->add_option("--k-max", infer.k_max, "expansion width");
  infer_cmd->add_option("--mcts-beam", infer.mcts_beam,
                        "completion width inside a simulation");
  infer_cmd->add_option("--c-puct", infer.c_puct, "exploration constant");
  infer_cmd->add_option("--lambda", infer.lambda, "length bonus weight");
  infer_cmd->add_option("--simulation-budget", infer.simulation_budget,
                        "total simulation cap (0 = unlimited)");
  infer_cmd->add_option("--iterations,-T", infer.iterations,
                        "gvs iteration count");
  infer_cmd->add_option("--top-k", infer.top_k, "pool entries per prompt");
  infer_cmd->add_option("--rand-k", infer.rand_k, "fresh draws per prompt");
  infer_cmd->add_option("--z-thres", infer.z_thres, "pool score floor");
  infer_cmd->add_option("--l-max", infer.l_max, "longest prompt subtree");
  infer_cmd->add_option("--replay-dir", infer.replay_dir,
                        "write per-query gvs replay logs here");
  infer_cmd->add_option("--seed", infer.seed, "root seed");
  add_policy_options(infer_cmd, infer);
  infer_cmd->callback([&] { rc = run_infer(infer); });

  AuditOpts audit;
  CLI::App* audit_cmd =
      app.add_subcommand("audit", "label predictions against a corpus");
  audit_cmd->add_option("--predictions", audit.predictions, "infer output")
      ->required();
  audit_cmd->add_option("--items", audit.items, "test_<stem>.jsonl")
      ->required();
  audit_cmd->add_option("--corpus", audit.corpus, "corpus.jsonl")->required();
  audit_cmd->add_option("--out", audit.out, "report JSON path")->required();
  audit_cmd->add_option("--scatter", audit.scatter,
                        "novelty-vs-accuracy CSV path");
  audit_cmd->add_option("--key-mode", audit.key_mode, "strict or commutative")
      ->check(CLI::IsMember({"strict", "commutative"}));
  audit_cmd->callback([&] { rc = run_audit(audit); });

  CLI::App* theory_cmd =
      app.add_subcommand("theory", "executable theory checks");
  theory_cmd->require_subcommand(1);

  TheoryCheckOpts check;
  CLI::App* check_cmd = theory_cmd->add_subcommand(
      "check", "reduction soundness over random formulas");
  check_cmd->add_option("--count", check.count, "formulas to check");
  check_cmd->add_option("--max-depth", check.max_depth, "formula depth cap");
  check_cmd->add_option("--seed", check.seed, "root seed");
  check_cmd->add_option("--out", check.out, "certificate JSON path")
      ->required();
  check_cmd->callback([&] { rc = run_theory_check(check); });

  TheoryPacOpts pac;
  CLI::App* pac_cmd = theory_cmd->add_subcommand(
      "pac", "self-verification failure-rate simulation");
  pac_cmd->add_option("--universe", pac.pac.universe, "library size U");
  pac_cmd->add_option("--per-round", pac.pac.per_round, "draws per round r");
  pac_cmd->add_option("--depth0", pac.pac.depth0, "target depth D0");
  pac_cmd->add_option("--targets", pac.pac.targets, "required subtrees K");
  pac_cmd->add_option("--beta", pac.pac.beta, "verification hit probability");
  pac_cmd->add_option("--delta", pac.pac.delta, "failure budget");
  pac_cmd->add_option("--trials", pac.pac.trials, "Monte Carlo trials");
  pac_cmd->add_option("--seed", pac.pac.seed, "root seed");
  pac_cmd->add_option("--out", pac.out, "stats JSON path")->required();
  pac_cmd->callback([&] { rc = run_theory_pac(pac); });

  TradeoffOpts tradeoff;
  CLI::App* tradeoff_cmd = app.add_subcommand(
      "tradeoff", "cost-vs-accuracy table across strategies");
  tradeoff_cmd->add_option("--items", tradeoff.base.items, "test_<stem>.jsonl")
      ->required();
  tradeoff_cmd->add_option("--out", tradeoff.out, "CSV path")->required();
  tradeoff_cmd
      ->add_option("--beam-sizes", tradeoff.beam_sizes, "beam widths to sweep")
      ->delimiter(',');
  tradeoff_cmd
      ->add_option("--rollouts", tradeoff.mcts_rollouts,
                   "mcts rollout counts to sweep")
      ->delimiter(',');
  tradeoff_cmd
      ->add_option("--iterations", tradeoff.gvs_iterations,
                   "gvs iteration counts to sweep")
      ->delimiter(',');
  tradeoff_cmd->add_option("--max-len", tradeoff.base.max_len, "token budget");
  tradeoff_cmd->add_option("--seed", tradeoff.base.seed, "root seed");
  add_policy_options(tradeoff_cmd, tradeoff.base);
  tradeoff_cmd->callback([&] { rc = run_tradeoff(tradeoff); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    Json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return rc;
}
