#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "srlab/audit.hpp"
#include "srlab/datagen.hpp"
#include "srlab/decoding.hpp"
#include "srlab/gvs.hpp"
#include "srlab/theory.hpp"

namespace srlab {

using Json = nlohmann::json;

inline constexpr std::string_view kSrlabVersion = "0.1.0";
inline constexpr int kArtifactFormat = 1;

// --- file plumbing -----------------------------------------------------------

// Writes path + ".partial" and renames it into place, so a crash never
// leaves a torn final artifact. Throws std::runtime_error on IO failure.
void write_text_atomic(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

// --- manifest ----------------------------------------------------------------

// Stable identity of a config object: FNV-1a over its canonical (key-sorted,
// compact) dump, as 16 hex digits.
std::string config_hash(const Json& config);

// {"config_hash", "seed", "versions": {"srlab", "format"}}
Json make_manifest(const Json& config, std::uint64_t seed);

// --- generation config -------------------------------------------------------

// Operators travel as token text.
Json vocabulary_to_json(const Vocabulary& v);
Vocabulary vocabulary_from_json(const Json& j);

// Field names mirror GenConfig/Vocabulary; operators travel as token text
// and shape_mode as "operator_count" or "uniform_depth".
Json gen_config_to_json(const GenConfig& cfg);

// Keys present override the defaults; absent keys keep them. Throws on type
// mismatches, unknown operator names or an unknown shape_mode.
GenConfig gen_config_from_json(const Json& j);

// --- corpus and test sets ----------------------------------------------------

// One template per line: {"id": int, "prefix": [token strings]}.
void write_corpus_jsonl(const Corpus& corpus, const std::string& path);
Corpus read_corpus_jsonl(const std::string& path);

// A test query: the ground-truth expression (constants resolved) plus the
// support its datasets are sampled from.
struct TestItem {
  int id = 0;
  Expr expr;
  std::vector<std::array<double, 2>> support;
};

Json test_item_to_json(const TestItem& item);
TestItem test_item_from_json(const Json& j);
void write_test_items(const std::vector<TestItem>& items,
                      const std::string& path);
std::vector<TestItem> read_test_items(const std::string& path);

// --- predictions -------------------------------------------------------------

// One record per line: {"tokens": [...], "constants": [...], "r2": float,
// "strategy": str, "cost": int}. Non-finite r2 travels as null.
Json prediction_to_json(const Prediction& p);
Prediction prediction_from_json(const Json& j);
void write_predictions(const std::vector<Prediction>& predictions,
                       const std::string& path);
std::vector<Prediction> read_predictions(const std::string& path);

// --- gvs replay --------------------------------------------------------------

// One row per iteration: {"t": int, "prompt": [...], "prediction": [...],
// "r2": float|null}; null marks an iteration with no finite candidate.
Json replay_row_to_json(const GvsReplayRow& row);
GvsReplayRow replay_row_from_json(const Json& j);
void write_replay(const std::vector<GvsReplayRow>& rows,
                  const std::string& path);
std::vector<GvsReplayRow> read_replay(const std::string& path);

// --- audit -------------------------------------------------------------------

Json audit_report_to_json(const AuditReport& report);

// Novelty-vs-accuracy scatter, one line per audited prediction:
// id,novel_template,novel_with_constants,strip_failed,r2_eval
std::string audit_scatter_csv(const AuditReport& report);

// --- theory ------------------------------------------------------------------

// Certificate entry: formula text, the reduction prefix, per-leaf losses and
// the verdict flags.
Json reduction_verdict_to_json(const BoolFormula& f,
                               const ReductionVerdict& v);

Json pac_stats_to_json(const PacConfig& cfg, const PacStats& stats);

}  // namespace srlab
