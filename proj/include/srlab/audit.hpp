#pragma once

#include <array>
#include <limits>
#include <vector>

#include "srlab/datagen.hpp"
#include "srlab/decoding.hpp"

namespace srlab {

// Which identity a corpus lookup uses. Template strips fitted constants off
// the prediction and compares template keys; WithConstants leaves constant
// placeholders in place and compares placeholder-position structure, for
// corpora whose entries carry placeholders themselves.
enum class ReproductionMode { Template, WithConstants };

// Whether e already exists in the corpus under the chosen identity. The
// key_mode picks strict or commutative-normalized template keys (Template
// mode only; placeholder-position identity is inherently strict). An
// expression whose constants cannot be stripped back to a template counts
// as novel; strip_failed (when non-null) reports that that happened.
bool is_reproduction(const Expr& e, const Corpus& corpus,
                     ReproductionMode mode,
                     KeyMode key_mode = KeyMode::Strict,
                     bool* strip_failed = nullptr);

// Rejection-samples count expressions whose stripped template keys are
// absent from the corpus. Throws AttemptCeiling once the draw budget is
// spent (default 200 per requested expression plus slack).
std::vector<Expr> build_not_included(const GenConfig& cfg,
                                     const Corpus& corpus, int count,
                                     Rng& rng, long attempt_ceiling = -1);

// The unfiltered control draw from the same sampler.
std::vector<Expr> build_baseline(const GenConfig& cfg, int count, Rng& rng);

// Accuracy thresholds reported by every audit, in ascending order. A row
// passes a threshold when its held-out r2 exceeds it strictly.
inline constexpr std::array<double, 7> kAuditThresholds = {
    0.5, 0.9, 0.95, 0.99, 0.999, 0.9999, 0.99999};

// The accuracy cut used by the novelty-by-accuracy breakdown.
inline constexpr double kAccurateR2 = 0.99;

struct AuditRow {
  bool novel_template = false;        // stripped key absent from the corpus
  bool novel_with_constants = false;  // placeholder structure absent
  bool strip_failed = false;          // constants would not strip; novel
  double r2_eval = -std::numeric_limits<double>::infinity();
  std::array<bool, 7> passes{};       // r2_eval > kAuditThresholds[i]
};

// Per-prediction rows plus aggregates over them. Percentages are out of all
// rows, so the four breakdown cells partition 100 whenever rows exist.
struct AuditReport {
  std::vector<AuditRow> rows;

  std::array<double, 7> pass_pct{};
  double novelty_pct = 0.0;  // template-mode novelty, the headline number
  double novelty_with_constants_pct = 0.0;

  // novelty (template mode) crossed with r2_eval > kAccurateR2
  double novel_accurate_pct = 0.0;
  double novel_inaccurate_pct = 0.0;
  double reproduced_accurate_pct = 0.0;
  double reproduced_inaccurate_pct = 0.0;
};

// Scores each prediction on its own held-out dataset and labels it against
// the corpus. eval_data must align with predictions one to one (throws
// LengthMismatch otherwise) and should hold points the decoder never saw.
AuditReport audit_run(const std::vector<Prediction>& predictions,
                      const Corpus& corpus,
                      const std::vector<Dataset>& eval_data,
                      KeyMode key_mode = KeyMode::Strict);

}  // namespace srlab
