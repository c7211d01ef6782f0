#include "srlab/serialization.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "srlab/errors.hpp"

namespace srlab {

namespace {

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// shared JSONL plumbing: one dump per line, blank lines ignored on read
void write_jsonl(const std::vector<Json>& rows, const std::string& path) {
  std::string text;
  for (const Json& row : rows) {
    text += row.dump();
    text += '\n';
  }
  write_text_atomic(path, text);
}

std::vector<Json> read_jsonl(const std::string& path) {
  std::istringstream in(read_text(path));
  std::vector<Json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json row = Json::parse(line, nullptr, false);
    if (row.is_discarded())
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": not valid JSON");
    rows.push_back(std::move(row));
  }
  return rows;
}

Json finite_or_null(double v) {
  return std::isfinite(v) ? Json(v) : Json();
}

double json_number_or(const Json& j, double fallback) {
  return j.is_number() ? j.get<double>() : fallback;
}

std::string threshold_text(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

Op op_from_name(const std::string& name) {
  Token t = token_from_text(name);  // throws UnknownToken on garbage
  if (t.kind != Token::Kind::Op)
    throw UnknownToken(name + " is not an operator");
  return t.op;
}

template <class T>
void read_field(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

// --- file plumbing -----------------------------------------------------------

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string partial = path + ".partial";
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + partial);
    out.write(text.data(), std::streamsize(text.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed on " + partial);
  }
  if (std::rename(partial.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot move " + partial + " into place");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

// --- manifest ----------------------------------------------------------------

std::string config_hash(const Json& config) {
  // nlohmann objects iterate key-sorted, so dump() is already canonical
  const std::uint64_t h = fnv1a64(config.dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json make_manifest(const Json& config, std::uint64_t seed) {
  Json m;
  m["config_hash"] = config_hash(config);
  m["seed"] = seed;
  m["versions"] = {{"srlab", std::string(kSrlabVersion)},
                   {"format", kArtifactFormat}};
  return m;
}

// --- generation config -------------------------------------------------------

Json vocabulary_to_json(const Vocabulary& v) {
  Json binary = Json::array();
  for (Op op : v.binary_ops) binary.push_back(std::string(op_name(op)));
  Json unary = Json::array();
  for (Op op : v.unary_ops) unary.push_back(std::string(op_name(op)));

  Json j;
  j["binary_ops"] = std::move(binary);
  j["unary_ops"] = std::move(unary);
  j["dim"] = v.dim;
  j["c_min"] = v.c_min;
  j["c_max"] = v.c_max;
  return j;
}

Vocabulary vocabulary_from_json(const Json& j) {
  Vocabulary v = Vocabulary::full();  // absent keys keep the full inventory
  if (j.contains("binary_ops")) {
    v.binary_ops.clear();
    for (const Json& name : j.at("binary_ops"))
      v.binary_ops.push_back(op_from_name(name.get<std::string>()));
  }
  if (j.contains("unary_ops")) {
    v.unary_ops.clear();
    for (const Json& name : j.at("unary_ops"))
      v.unary_ops.push_back(op_from_name(name.get<std::string>()));
  }
  read_field(j, "dim", v.dim);
  read_field(j, "c_min", v.c_min);
  read_field(j, "c_max", v.c_max);
  return v;
}

Json gen_config_to_json(const GenConfig& cfg) {
  Json j;
  j["vocab"] = vocabulary_to_json(cfg.vocab);
  j["max_depth"] = cfg.max_depth;
  j["max_constants"] = cfg.max_constants;
  j["min_ops"] = cfg.min_ops;
  j["max_ops"] = cfg.max_ops;
  j["shape_mode"] = cfg.shape_mode == ShapeMode::OperatorCount
                        ? "operator_count"
                        : "uniform_depth";
  j["n_min"] = cfg.n_min;
  j["n_max"] = cfg.n_max;
  j["mul_lo"] = cfg.mul_lo;
  j["mul_hi"] = cfg.mul_hi;
  j["add_lo"] = cfg.add_lo;
  j["add_hi"] = cfg.add_hi;
  j["x_lo"] = cfg.x_lo;
  j["x_hi"] = cfg.x_hi;
  j["constant_site_prob"] = cfg.constant_site_prob;
  j["seed"] = cfg.seed;
  return j;
}

GenConfig gen_config_from_json(const Json& j) {
  GenConfig cfg;
  if (j.contains("vocab")) cfg.vocab = vocabulary_from_json(j.at("vocab"));
  read_field(j, "max_depth", cfg.max_depth);
  read_field(j, "max_constants", cfg.max_constants);
  read_field(j, "min_ops", cfg.min_ops);
  read_field(j, "max_ops", cfg.max_ops);
  if (j.contains("shape_mode")) {
    const std::string mode = j.at("shape_mode").get<std::string>();
    if (mode == "operator_count") {
      cfg.shape_mode = ShapeMode::OperatorCount;
    } else if (mode == "uniform_depth") {
      cfg.shape_mode = ShapeMode::UniformDepth;
    } else {
      throw std::invalid_argument("unknown shape_mode: " + mode);
    }
  }
  read_field(j, "n_min", cfg.n_min);
  read_field(j, "n_max", cfg.n_max);
  read_field(j, "mul_lo", cfg.mul_lo);
  read_field(j, "mul_hi", cfg.mul_hi);
  read_field(j, "add_lo", cfg.add_lo);
  read_field(j, "add_hi", cfg.add_hi);
  read_field(j, "x_lo", cfg.x_lo);
  read_field(j, "x_hi", cfg.x_hi);
  read_field(j, "constant_site_prob", cfg.constant_site_prob);
  read_field(j, "seed", cfg.seed);
  return cfg;
}

// --- corpus and test sets ----------------------------------------------------

void write_corpus_jsonl(const Corpus& corpus, const std::string& path) {
  std::vector<Json> rows;
  rows.reserve(corpus.size());
  int id = 0;
  for (const Expr& templ : corpus.templates()) {
    Json row;
    row["id"] = id++;
    row["prefix"] = texts_from_tokens(serialize(templ));
    rows.push_back(std::move(row));
  }
  write_jsonl(rows, path);
}

Corpus read_corpus_jsonl(const std::string& path) {
  std::vector<Expr> templates;
  for (const Json& row : read_jsonl(path))
    templates.push_back(
        deserialize(tokens_from_texts(row.at("prefix").get<std::vector<std::string>>())));
  return Corpus(std::move(templates));
}

Json test_item_to_json(const TestItem& item) {
  SerializedExpr s = serialize_with_values(item.expr);
  Json row;
  row["id"] = item.id;
  row["prefix"] = texts_from_tokens(s.tokens);
  row["constants"] = s.constants;
  Json support = Json::array();
  for (const auto& [lo, hi] : item.support) support.push_back({lo, hi});
  row["support"] = std::move(support);
  return row;
}

TestItem test_item_from_json(const Json& j) {
  TestItem item;
  item.id = j.at("id").get<int>();
  const TokenSeq tokens =
      tokens_from_texts(j.at("prefix").get<std::vector<std::string>>());
  const std::vector<double> constants =
      j.at("constants").get<std::vector<double>>();
  item.expr = deserialize(tokens, constants);
  for (const Json& interval : j.at("support")) {
    if (!interval.is_array() || interval.size() != 2)
      throw std::runtime_error("support interval must be [lo, hi]");
    item.support.push_back(
        {interval[0].get<double>(), interval[1].get<double>()});
  }
  return item;
}

void write_test_items(const std::vector<TestItem>& items,
                      const std::string& path) {
  std::vector<Json> rows;
  rows.reserve(items.size());
  for (const TestItem& item : items) rows.push_back(test_item_to_json(item));
  write_jsonl(rows, path);
}

std::vector<TestItem> read_test_items(const std::string& path) {
  std::vector<TestItem> items;
  for (const Json& row : read_jsonl(path))
    items.push_back(test_item_from_json(row));
  return items;
}

// --- predictions -------------------------------------------------------------

Json prediction_to_json(const Prediction& p) {
  Json row;
  row["tokens"] = texts_from_tokens(p.tokens);
  row["constants"] = p.constants;
  row["r2"] = finite_or_null(p.r2_fit);
  row["strategy"] = p.strategy;
  row["cost"] = p.candidates_generated;
  return row;
}

Prediction prediction_from_json(const Json& j) {
  Prediction p;
  p.tokens = tokens_from_texts(j.at("tokens").get<std::vector<std::string>>());
  p.expr = deserialize(p.tokens);
  p.constants = j.at("constants").get<std::vector<double>>();
  p.r2_fit = json_number_or(j.at("r2"),
                            -std::numeric_limits<double>::infinity());
  p.strategy = j.at("strategy").get<std::string>();
  p.candidates_generated = j.at("cost").get<int>();
  return p;
}

void write_predictions(const std::vector<Prediction>& predictions,
                       const std::string& path) {
  std::vector<Json> rows;
  rows.reserve(predictions.size());
  for (const Prediction& p : predictions) rows.push_back(prediction_to_json(p));
  write_jsonl(rows, path);
}

std::vector<Prediction> read_predictions(const std::string& path) {
  std::vector<Prediction> out;
  for (const Json& row : read_jsonl(path))
    out.push_back(prediction_from_json(row));
  return out;
}

// --- gvs replay --------------------------------------------------------------

Json replay_row_to_json(const GvsReplayRow& row) {
  Json j;
  j["t"] = row.t;
  j["prompt"] = texts_from_tokens(row.prompt);
  j["prediction"] = texts_from_tokens(row.prediction);
  j["r2"] = finite_or_null(row.r2);
  return j;
}

GvsReplayRow replay_row_from_json(const Json& j) {
  GvsReplayRow row;
  row.t = j.at("t").get<int>();
  row.prompt = tokens_from_texts(j.at("prompt").get<std::vector<std::string>>());
  row.prediction =
      tokens_from_texts(j.at("prediction").get<std::vector<std::string>>());
  row.r2 = json_number_or(j.at("r2"),
                          std::numeric_limits<double>::quiet_NaN());
  return row;
}

void write_replay(const std::vector<GvsReplayRow>& rows,
                  const std::string& path) {
  std::vector<Json> out;
  out.reserve(rows.size());
  for (const GvsReplayRow& row : rows) out.push_back(replay_row_to_json(row));
  write_jsonl(out, path);
}

std::vector<GvsReplayRow> read_replay(const std::string& path) {
  std::vector<GvsReplayRow> rows;
  for (const Json& row : read_jsonl(path))
    rows.push_back(replay_row_from_json(row));
  return rows;
}

// --- audit -------------------------------------------------------------------

Json audit_report_to_json(const AuditReport& report) {
  Json pass;
  for (std::size_t i = 0; i < kAuditThresholds.size(); ++i)
    pass[threshold_text(kAuditThresholds[i])] = report.pass_pct[i];

  Json j;
  j["rows"] = report.rows.size();
  j["pass_pct"] = std::move(pass);
  j["novelty_pct"] = report.novelty_pct;
  j["novelty_with_constants_pct"] = report.novelty_with_constants_pct;
  j["novel_accurate_pct"] = report.novel_accurate_pct;
  j["novel_inaccurate_pct"] = report.novel_inaccurate_pct;
  j["reproduced_accurate_pct"] = report.reproduced_accurate_pct;
  j["reproduced_inaccurate_pct"] = report.reproduced_inaccurate_pct;
  return j;
}

std::string audit_scatter_csv(const AuditReport& report) {
  std::string csv = "id,novel_template,novel_with_constants,strip_failed,r2_eval\n";
  char buf[64];
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const AuditRow& row = report.rows[i];
    std::snprintf(buf, sizeof buf, "%zu,%d,%d,%d,%.17g\n", i,
                  int(row.novel_template), int(row.novel_with_constants),
                  int(row.strip_failed), row.r2_eval);
    csv += buf;
  }
  return csv;
}

// --- theory ------------------------------------------------------------------

Json reduction_verdict_to_json(const BoolFormula& f,
                               const ReductionVerdict& v) {
  Json losses = Json::array();
  for (const LeafLoss& row : v.losses) {
    Json entry;
    entry["token"] = token_text(row.token);
    entry["loss"] = finite_or_null(row.loss);
    if (!row.constants.empty()) entry["constants"] = row.constants;
    losses.push_back(std::move(entry));
  }

  Json j;
  j["formula"] = to_string(f);
  j["eval"] = v.eval ? 1 : 0;
  j["tokens"] = texts_from_tokens(build_ltp_instance(f).prefix);
  j["losses"] = std::move(losses);
  j["winner"] = token_text(v.winner);
  j["pass"] = v.pass;
  j["winner_matches_eval"] = v.winner_matches_eval;
  j["winning_loss_zero"] = v.winning_loss_zero;
  j["runner_up_loss_one"] = v.runner_up_loss_one;
  j["constant_loss_separated"] = v.constant_loss_separated;
  return j;
}

Json pac_stats_to_json(const PacConfig& cfg, const PacStats& stats) {
  Json config;
  config["universe"] = cfg.universe;
  config["per_round"] = cfg.per_round;
  config["depth0"] = cfg.depth0;
  config["targets"] = cfg.targets;
  config["beta"] = cfg.beta;
  config["delta"] = cfg.delta;
  config["trials"] = cfg.trials;
  config["seed"] = cfg.seed;

  Json j;
  j["config"] = std::move(config);
  j["burn_in_rounds"] = stats.burn_in_rounds;
  j["post_rounds"] = stats.post_rounds;
  j["trials"] = stats.trials;
  j["burn_in_failures"] = stats.burn_in_failures;
  j["post_failures"] = stats.post_failures;
  j["failure_rate"] = stats.failure_rate;
  j["mean_oracle_calls"] = stats.mean_oracle_calls;
  return j;
}

}  // namespace srlab
